//! Webcam-to-screen coordinate mapping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub const fn new(width: usize, height: usize) -> Self {
        Dims { width, height }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for Dims {
    type Err = Error;

    /// Parses `WxH`, e.g. `320x240`.
    fn from_str(s: &str) -> Result<Self> {
        s.split_once('x')
            .and_then(|(w, h)| Some(Dims::new(w.trim().parse().ok()?, h.trim().parse().ok()?)))
            .ok_or_else(|| Error::Config(format!("expected WxH dims, got {s:?}")))
    }
}

/// Real-valued webcam-space position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PixelPoint { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Real-valued screen-space position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
}

impl ScreenPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        ScreenPoint { x, y }
    }

    /// Rounds half-up to integer pixels and clamps into `screen`.
    pub fn to_pixel(&self, screen: Dims) -> (i32, i32) {
        let round = |v: f64, len: usize| (v + 0.5).floor().clamp(0.0, (len - 1) as f64) as i32;
        (round(self.x, screen.width), round(self.y, screen.height))
    }
}

/// `x_s = (screen_w / cam_w) x`, `y_s = (screen_h / cam_h) y`.
pub fn scale_to_screen(p: PixelPoint, cam: Dims, screen: Dims) -> Result<ScreenPoint> {
    if cam.is_empty() {
        return Err(Error::Config(format!("camera dims must be positive, got {cam}")));
    }
    Ok(ScreenPoint {
        x: screen.width as f64 / cam.width as f64 * p.x,
        y: screen.height as f64 / cam.height as f64 * p.y,
    })
}

/// Reflects `x` about the screen's vertical center line: `x -> (w - 1) - x`.
pub fn mirror_x(p: ScreenPoint, screen_w: usize) -> ScreenPoint {
    ScreenPoint {
        x: (screen_w as f64 - 1.0) - p.x,
        y: p.y,
    }
}

pub fn mirror_y(p: ScreenPoint, screen_h: usize) -> ScreenPoint {
    ScreenPoint {
        x: p.x,
        y: (screen_h as f64 - 1.0) - p.y,
    }
}

/// Exponential smoothing: `alpha * cur + (1 - alpha) * prev`. No history
/// returns `cur` unchanged.
pub fn smooth(prev: Option<ScreenPoint>, cur: ScreenPoint, alpha: f64) -> Result<ScreenPoint> {
    check_alpha(alpha)?;
    Ok(match prev {
        None => cur,
        Some(prev) => ScreenPoint {
            x: alpha * cur.x + (1.0 - alpha) * prev.x,
            y: alpha * cur.y + (1.0 - alpha) * prev.y,
        },
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("smoothing alpha must be in (0, 1], got {alpha}")))
    }
}

/// Scale, then mirror in screen space. Smoothing is stateful and lives in the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerMap {
    pub cam: Dims,
    pub screen: Dims,
    pub mirror_x: bool,
    pub mirror_y: bool,
}

impl PointerMap {
    pub fn map(&self, p: PixelPoint) -> Result<ScreenPoint> {
        let mut s = scale_to_screen(p, self.cam, self.screen)?;
        if self.mirror_x {
            s = mirror_x(s, self.screen.width);
        }
        if self.mirror_y {
            s = mirror_y(s, self.screen.height);
        }
        Ok(s)
    }
}
