//! Frame-to-event pipeline: mask, label, extract, classify, step.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::color::ChromaSignature;
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::frame_io::{load_frame_ppm, read_raw_stream};
use crate::gesture::{classify_frame, EventKind, GestureClass, GestureEngine, MouseEvent};
use crate::image::Frame;
use crate::segment::{chroma_match_mask, connected_components, extract_rois, Roi};

/// One tracking session: a calibrated signature plus gesture state.
#[derive(Debug, Clone)]
pub struct Pipeline {
    sig: ChromaSignature,
    engine: GestureEngine,
}

impl Pipeline {
    pub fn new(cfg: EngineConfig, sig: ChromaSignature) -> Result<Self> {
        Ok(Pipeline {
            sig,
            engine: GestureEngine::new(cfg)?,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        self.engine.config()
    }

    pub fn signature(&self) -> &ChromaSignature {
        &self.sig
    }

    pub fn engine(&self) -> &GestureEngine {
        &self.engine
    }

    pub fn reset(&mut self) {
        self.engine.reset();
    }

    /// Regions of interest for one frame.
    pub fn detect(&self, frame: &Frame) -> Result<Vec<Roi>> {
        let cfg = self.engine.config();
        if frame.dims() != cfg.cam {
            return Err(Error::DimsMismatch {
                expected: cfg.cam,
                got: frame.dims(),
            });
        }
        let mask = chroma_match_mask(frame, &self.sig);
        let labels = connected_components(&mask, cfg.connectivity);
        Ok(extract_rois(&labels, cfg.min_blob_area()))
    }

    pub fn classify(&self, frame: &Frame) -> Result<GestureClass> {
        Ok(classify_frame(&self.detect(frame)?, self.engine.config()))
    }

    pub fn process(&mut self, frame: &Frame, index: u64) -> Result<Vec<MouseEvent>> {
        Ok(self.process_classified(frame, index)?.1)
    }

    /// Like [`Pipeline::process`], also returning the frame's gesture class.
    pub fn process_classified(&mut self, frame: &Frame, index: u64) -> Result<(GestureClass, Vec<MouseEvent>)> {
        let rois = self.detect(frame)?;
        let g = classify_frame(&rois, self.engine.config());
        let events = self.engine.step_class(&g, index)?;
        Ok((g, events))
    }
}

/// Frame and event counts for a finished run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub frames: usize,
    pub events: BTreeMap<&'static str, usize>,
}

impl RunSummary {
    pub fn record(&mut self, events: &[MouseEvent]) {
        self.frames += 1;
        for e in events {
            *self.events.entry(e.kind.name()).or_default() += 1;
        }
    }

    pub fn total_events(&self) -> usize {
        self.events.values().sum()
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frames={} events={}", self.frames, self.total_events())?;
        for kind in EventKind::ALL {
            if let Some(n) = self.events.get(kind.name()) {
                write!(f, " {}={n}", kind.name())?;
            }
        }
        Ok(())
    }
}

/// `.ppm` files in `dir`, sorted lexicographically by file name.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("ppm"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Runs the pipeline over a directory of PPM frames; frame `i` in sorted
/// order gets index `i`. Parse errors carry the offending file name.
pub fn run_directory(pipeline: &mut Pipeline, dir: &Path) -> Result<(Vec<MouseEvent>, RunSummary)> {
    let mut events = Vec::new();
    let mut summary = RunSummary::default();
    for (i, path) in list_frame_files(dir)?.iter().enumerate() {
        let bytes = std::fs::read(path)?;
        let frame = load_frame_ppm(&bytes).map_err(|e| match e {
            Error::Ppm { offset, reason } => Error::Ppm {
                offset,
                reason: format!("{}: {reason}", path.display()),
            },
            other => other,
        })?;
        let out = pipeline.process(&frame, i as u64)?;
        summary.record(&out);
        events.extend(out);
    }
    Ok((events, summary))
}

/// Runs the pipeline over a `GFRM` stream using each record's embedded index.
pub fn run_stream<R: Read>(pipeline: &mut Pipeline, src: R) -> Result<(Vec<MouseEvent>, RunSummary)> {
    let mut events = Vec::new();
    let mut summary = RunSummary::default();
    for rec in read_raw_stream(src, pipeline.config().cam) {
        let rec = rec?;
        let out = pipeline.process(&rec.frame, rec.index as u64)?;
        summary.record(&out);
        events.extend(out);
    }
    Ok((events, summary))
}
