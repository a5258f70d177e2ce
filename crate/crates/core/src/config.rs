use serde::{Deserialize, Serialize};

use crate::color::{luma_scaled_threshold, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::mapping::{check_alpha, Dims, PointerMap};
use crate::segment::{default_min_blob_area, Connectivity};

/// Engine tunables. Fields left as `None` are derived from the camera dims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub cam: Dims,
    pub screen: Dims,
    /// Chroma match threshold used at calibration time.
    pub threshold: f64,
    /// Optional linear dependence of the threshold on calibrated luma; 0 disables it.
    pub threshold_luma_slope: f64,
    pub min_blob_area: Option<usize>,
    pub connectivity: Connectivity,
    /// F=2 split distance in webcam pixels; defaults to a quarter of the camera width.
    pub click_split: Option<f64>,
    pub stable_frames: u32,
    pub smoothing_alpha: f64,
    pub mirror_x: bool,
    pub mirror_y: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            cam: Dims::new(320, 240),
            screen: Dims::new(1600, 900),
            threshold: DEFAULT_THRESHOLD,
            threshold_luma_slope: 0.0,
            min_blob_area: None,
            connectivity: Connectivity::Eight,
            click_split: None,
            stable_frames: 3,
            smoothing_alpha: 1.0,
            mirror_x: true,
            mirror_y: false,
        }
    }
}

impl EngineConfig {
    pub fn with_cam(cam: Dims) -> Self {
        EngineConfig {
            cam,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cam.is_empty() || self.screen.is_empty() {
            return Err(Error::Config(format!(
                "dims must be positive (cam {}, screen {})",
                self.cam, self.screen
            )));
        }
        if self.cam.width > u16::MAX as usize || self.cam.height > u16::MAX as usize {
            return Err(Error::Config(format!("camera dims {} exceed 65535", self.cam)));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::Config(format!("threshold must be >= 0, got {}", self.threshold)));
        }
        if !self.threshold_luma_slope.is_finite() {
            return Err(Error::Config("threshold_luma_slope must be finite".into()));
        }
        if self.stable_frames < 1 {
            return Err(Error::Config("stable_frames must be >= 1".into()));
        }
        if let Some(split) = self.click_split {
            if !(split.is_finite() && split >= 0.0) {
                return Err(Error::Config(format!("click_split must be >= 0, got {split}")));
            }
        }
        check_alpha(self.smoothing_alpha)
    }

    pub fn min_blob_area(&self) -> usize {
        self.min_blob_area.unwrap_or_else(|| default_min_blob_area(self.cam))
    }

    pub fn click_split(&self) -> f64 {
        self.click_split.unwrap_or(0.25 * self.cam.width as f64)
    }

    /// Threshold to calibrate with, given the target's luma.
    pub fn threshold_for_luma(&self, luma: f64) -> f64 {
        luma_scaled_threshold(self.threshold, self.threshold_luma_slope, luma)
    }

    pub fn pointer_map(&self) -> PointerMap {
        PointerMap {
            cam: self.cam,
            screen: self.screen,
            mirror_x: self.mirror_x,
            mirror_y: self.mirror_y,
        }
    }
}
