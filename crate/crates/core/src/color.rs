//! RGB to YCbCr conversion and chroma signature calibration.
//!
//! The conversion is the BT.601 studio-swing affine map evaluated in `f64`
//! with no integer quantization:
//!
//! ```text
//! Y  =  0.257 R + 0.504 G + 0.098 B + 16
//! Cb = -0.148 R - 0.291 G + 0.439 B + 128
//! Cr =  0.439 R - 0.368 G - 0.071 B + 128
//! ```
//!
//! The chroma rows sum to zero, so they are evaluated in difference form
//! (`0.148 (B - R) + 0.291 (B - G)` and so on). This is algebraically the same
//! map but makes every gray pixel land on exactly 128.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Frame;
use crate::mapping::PixelPoint;

/// Default chroma match threshold, in chroma units.
pub const DEFAULT_THRESHOLD: f64 = 12.0;

/// Luma of pure green `(0, 255, 0)`, the color the default threshold was tuned on.
pub const REFERENCE_LUMA: f64 = 144.52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    /// Checked constructor; every channel must lie in `[0, 255]`.
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        for (channel, value) in [("r", r), ("g", g), ("b", b)] {
            if !(0.0..=255.0).contains(&value) {
                return Err(Error::Domain { channel, value });
            }
        }
        Ok(Rgb { r, g, b })
    }

    pub fn from_u8(px: [u8; 3]) -> Self {
        Rgb {
            r: px[0] as f64,
            g: px[1] as f64,
            b: px[2] as f64,
        }
    }

    pub fn gray(v: u8) -> Self {
        Self::from_u8([v, v, v])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ycbcr {
    pub y: f64,
    pub cb: f64,
    pub cr: f64,
}

/// Converts an RGB triple to YCbCr, rejecting channels outside `[0, 255]`.
pub fn rgb_to_ycbcr(p: Rgb) -> Result<Ycbcr> {
    let p = Rgb::new(p.r, p.g, p.b)?;
    Ok(ycbcr_unchecked(p.r, p.g, p.b))
}

#[inline]
pub(crate) fn ycbcr_unchecked(r: f64, g: f64, b: f64) -> Ycbcr {
    Ycbcr {
        y: 0.257 * r + 0.504 * g + 0.098 * b + 16.0,
        cb: chroma_b(r, g, b),
        cr: chroma_r(r, g, b),
    }
}

#[inline]
pub(crate) fn chroma_b(r: f64, g: f64, b: f64) -> f64 {
    0.148 * (b - r) + 0.291 * (b - g) + 128.0
}

#[inline]
pub(crate) fn chroma_r(r: f64, g: f64, b: f64) -> f64 {
    0.368 * (r - g) + 0.071 * (r - b) + 128.0
}

/// Calibrated color-cap target plus its match threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaSignature {
    pub target: Ycbcr,
    pub threshold: f64,
}

impl ChromaSignature {
    pub fn new(target: Ycbcr, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::Config(format!(
                "threshold must be finite and >= 0, got {threshold}"
            )));
        }
        Ok(ChromaSignature { target, threshold })
    }

    /// Signature whose target is exactly the conversion of `color`.
    pub fn from_rgb(color: Rgb, threshold: f64) -> Result<Self> {
        Self::new(rgb_to_ycbcr(color)?, threshold)
    }
}

/// Shortest round-trip decimal, zero-padded to at least six significant digits.
fn format_decimal(v: f64) -> String {
    let mut s = v.to_string();
    if !v.is_finite() || s.contains('e') {
        return s;
    }
    let digits = s.trim_start_matches('-').replace('.', "");
    let significant = match digits.trim_start_matches('0').len() {
        0 => 1,
        n => n,
    };
    if significant < 6 {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n('0', 6 - significant));
    }
    s
}

impl fmt::Display for ChromaSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "y={} cb={} cr={} threshold={}",
            format_decimal(self.target.y),
            format_decimal(self.target.cb),
            format_decimal(self.target.cr),
            format_decimal(self.threshold)
        )
    }
}

impl FromStr for ChromaSignature {
    type Err = Error;

    /// Parses `key=value` pairs separated by any whitespace. All four keys
    /// are required; order is free.
    fn from_str(s: &str) -> Result<Self> {
        let (mut y, mut cb, mut cr, mut threshold) = (None, None, None, None);
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Signature(format!("expected key=value, got {token:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| Error::Signature(format!("{key}: not a number: {value:?}")))?;
            let slot = match key {
                "y" => &mut y,
                "cb" => &mut cb,
                "cr" => &mut cr,
                "threshold" => &mut threshold,
                other => return Err(Error::Signature(format!("unknown key {other:?}"))),
            };
            if slot.replace(value).is_some() {
                return Err(Error::Signature(format!("duplicate key {key:?}")));
            }
        }
        let missing = |k: &str| Error::Signature(format!("missing key {k:?}"));
        let target = Ycbcr {
            y: y.ok_or_else(|| missing("y"))?,
            cb: cb.ok_or_else(|| missing("cb"))?,
            cr: cr.ok_or_else(|| missing("cr"))?,
        };
        ChromaSignature::new(target, threshold.ok_or_else(|| missing("threshold"))?)
    }
}

/// Samples the `window`×`window` neighborhood of `at` (clipped to the frame),
/// converts each pixel to YCbCr and takes the per-channel median.
///
/// `at` is truncated to the pixel that contains it. With an even number of
/// in-bounds samples the median is the mean of the two middle values.
pub fn calibrate_signature(
    frame: &Frame,
    at: PixelPoint,
    window: usize,
    threshold: f64,
) -> Result<ChromaSignature> {
    if !matches!(window, 1 | 3 | 5) {
        return Err(Error::InvalidWindow(window));
    }
    let (w, h) = (frame.width(), frame.height());
    let inside = at.x >= 0.0 && at.y >= 0.0 && at.x < w as f64 && at.y < h as f64;
    if !inside {
        return Err(Error::Bounds {
            x: at.x,
            y: at.y,
            width: w,
            height: h,
        });
    }
    let (cx, cy) = (at.x as usize, at.y as usize);
    let half = window / 2;
    let xs = cx.saturating_sub(half)..=(cx + half).min(w - 1);
    let ys = cy.saturating_sub(half)..=(cy + half).min(h - 1);

    let mut luma = Vec::with_capacity(window * window);
    let mut cbs = Vec::with_capacity(window * window);
    let mut crs = Vec::with_capacity(window * window);
    for y in ys {
        for x in xs.clone() {
            let [r, g, b] = frame.pixel(x, y);
            let c = ycbcr_unchecked(r as f64, g as f64, b as f64);
            luma.push(c.y);
            cbs.push(c.cb);
            crs.push(c.cr);
        }
    }
    let target = Ycbcr {
        y: median(&mut luma),
        cb: median(&mut cbs),
        cr: median(&mut crs),
    };
    ChromaSignature::new(target, threshold)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Threshold adjusted linearly by the target's luma:
/// `threshold + slope * (y - REFERENCE_LUMA)`, floored at zero.
/// A slope of zero leaves the threshold untouched.
pub fn luma_scaled_threshold(threshold: f64, slope: f64, luma: f64) -> f64 {
    if slope == 0.0 {
        return threshold;
    }
    (threshold + slope * (luma - REFERENCE_LUMA)).max(0.0)
}
