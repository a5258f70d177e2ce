//! Color-cap gesture recognition.
//!
//! Frames are segmented by YCbCr chroma distance to a calibrated cap color,
//! matching pixels are grouped into regions, each region is reduced to its
//! centroid, and the number and spacing of regions drive a debounced state
//! machine that emits mouse events in screen coordinates.
//!
//! ```
//! use gesture_core::{ChromaSignature, EngineConfig, Pipeline, Rgb};
//! use gesture_core::synth::{synth_frame, BlobSpec};
//! use gesture_core::mapping::PixelPoint;
//!
//! let green = Rgb::new(0.0, 255.0, 0.0).unwrap();
//! let cfg = EngineConfig::default();
//! let sig = ChromaSignature::from_rgb(green, cfg.threshold).unwrap();
//! let mut pipeline = Pipeline::new(cfg.clone(), sig).unwrap();
//!
//! let cap = BlobSpec::new(PixelPoint::new(160.0, 120.0), 8.0, green);
//! let frame = synth_frame(&[cap], cfg.cam, 0.0, 0);
//! let events = pipeline.process(&frame, 0).unwrap();
//! assert_eq!(events[0].to_line(), r#"{"kind":"move","x":799,"y":450,"frame":0}"#);
//! ```

pub mod bench;
pub mod color;
pub mod config;
pub mod error;
pub mod frame_io;
pub mod gesture;
pub mod image;
pub mod mapping;
pub mod pipeline;
pub mod segment;
pub mod service;
pub mod synth;

pub use color::{calibrate_signature, rgb_to_ycbcr, ChromaSignature, Rgb, Ycbcr};
pub use config::EngineConfig;
pub use error::{Error, Result};
pub use gesture::{
    classify_frame, run_sequence, step, EngineState, EventKind, GestureClass, GestureEngine, GestureTag, MouseEvent,
};
pub use image::{BitMask, Frame};
pub use mapping::{Dims, PixelPoint, ScreenPoint};
pub use pipeline::Pipeline;
pub use segment::{chroma_match_mask, connected_components, extract_rois, ComponentLabeling, Connectivity, Roi};
