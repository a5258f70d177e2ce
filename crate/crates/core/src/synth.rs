//! Synthetic color-cap frames and scenario scripts.
//!
//! Scenario script format, one directive per line, `#` starts a comment:
//!
//! ```text
//! cam: 320x240
//! noise_sigma: 2.5
//! frame: point | 100 120 10 0 255 0
//! frames 20: pair_far | 60 120 10 0 255 0 ; 200 120 10 0 255 0
//! frame: empty |
//! ```
//!
//! A frame line names the expected gesture class, then lists blobs after `|`
//! separated by `;`. Each blob is `cx cy radius r g b`. `frames N:` repeats
//! the same frame `N` times. `cam` and `noise_sigma` must precede the first
//! frame line; `noise_sigma` defaults to 0.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::gesture::GestureTag;
use crate::image::Frame;
use crate::mapping::{Dims, PixelPoint};

pub const BACKGROUND: [u8; 3] = [128, 128, 128];

/// A filled disk standing in for one color cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub center: PixelPoint,
    pub radius: f64,
    pub color: Rgb,
}

impl BlobSpec {
    pub fn new(center: PixelPoint, radius: f64, color: Rgb) -> Self {
        BlobSpec { center, radius, color }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptFrame {
    pub blobs: Vec<BlobSpec>,
    pub expected: GestureTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub cam: Dims,
    pub noise_sigma: f64,
    pub frames: Vec<ScriptFrame>,
}

/// Renders blobs over a mid-gray background (later blobs overdraw earlier
/// ones), then adds independent Gaussian noise of `noise_sigma` to every
/// channel, rounding and clamping to `[0, 255]`.
///
/// Noise comes from ChaCha8 seeded with `seed`, so output is reproducible.
pub fn synth_frame(blobs: &[BlobSpec], cam: Dims, noise_sigma: f64, seed: u64) -> Frame {
    let mut frame = Frame::filled(cam.width, cam.height, BACKGROUND);
    for blob in blobs {
        draw_disk(&mut frame, blob);
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("sigma is finite and positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<u8> = frame
            .as_bytes()
            .iter()
            .map(|&v| (v as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
            .collect();
        frame = Frame::from_rgb_bytes(cam.width, cam.height, noisy).expect("same dims");
    }
    frame
}

fn draw_disk(frame: &mut Frame, blob: &BlobSpec) {
    let px = [
        blob.color.r.round() as u8,
        blob.color.g.round() as u8,
        blob.color.b.round() as u8,
    ];
    let (cx, cy, r) = (blob.center.x, blob.center.y, blob.radius);
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil() as i64).min(frame.width() as i64 - 1);
    let y1 = ((cy + r).ceil() as i64).min(frame.height() as i64 - 1);
    if x1 < 0 || y1 < 0 {
        return;
    }
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                frame.set_pixel(x, y, px);
            }
        }
    }
}

/// Seed for frame `i` of a sequence seeded with `seed`.
pub fn frame_seed(seed: u64, i: usize) -> u64 {
    // splitmix64 finalizer over (seed + i)
    let mut z = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders every scripted frame and returns it with its expected class.
pub fn synth_sequence(script: &ScenarioScript, seed: u64) -> (Vec<Frame>, Vec<GestureTag>) {
    script
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            (
                synth_frame(&f.blobs, script.cam, script.noise_sigma, frame_seed(seed, i)),
                f.expected,
            )
        })
        .unzip()
}

fn script_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Script {
        line,
        reason: reason.into(),
    }
}

fn parse_blob(text: &str, cam: Dims, line: usize) -> Result<BlobSpec> {
    let nums: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| script_err(line, format!("bad number {t:?}"))))
        .collect::<Result<_>>()?;
    let [cx, cy, radius, r, g, b] = nums[..] else {
        return Err(script_err(line, format!("blob needs 6 numbers (cx cy radius r g b), got {}", nums.len())));
    };
    if radius.is_nan() || radius < 1.0 {
        return Err(script_err(line, format!("blob radius must be >= 1, got {radius}")));
    }
    if !(cx >= 0.0 && cy >= 0.0 && cx < cam.width as f64 && cy < cam.height as f64) {
        return Err(script_err(line, format!("blob center ({cx}, {cy}) outside {cam}")));
    }
    let color = Rgb::new(r, g, b).map_err(|e| script_err(line, e.to_string()))?;
    Ok(BlobSpec::new(PixelPoint::new(cx, cy), radius, color))
}

impl FromStr for ScenarioScript {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cam = None;
        let mut noise_sigma = 0.0;
        let mut frames = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once(':')
                .ok_or_else(|| script_err(line, "expected `key: value`"))?;
            let key = key.trim();
            let value = value.trim();
            let repeat = match key.split_whitespace().collect::<Vec<_>>()[..] {
                ["cam"] | ["noise_sigma"] => None,
                ["frame"] => Some(1),
                ["frames", n] => Some(
                    n.parse::<usize>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| script_err(line, format!("bad repeat count {n:?}")))?,
                ),
                _ => return Err(script_err(line, format!("unknown key {key:?}"))),
            };
            let Some(repeat) = repeat else {
                if !frames.is_empty() {
                    return Err(script_err(line, format!("{key} must come before frames")));
                }
                if key == "cam" {
                    let dims: Dims = value
                        .parse()
                        .map_err(|_| script_err(line, format!("bad cam dims {value:?}")))?;
                    if dims.is_empty() || dims.width > u16::MAX as usize || dims.height > u16::MAX as usize {
                        return Err(script_err(line, format!("cam dims out of range: {dims}")));
                    }
                    cam = Some(dims);
                } else {
                    noise_sigma = value
                        .parse::<f64>()
                        .ok()
                        .filter(|s| *s >= 0.0 && s.is_finite())
                        .ok_or_else(|| script_err(line, format!("bad noise_sigma {value:?}")))?;
                }
                continue;
            };
            let cam = cam.ok_or_else(|| script_err(line, "cam must be set before frames"))?;
            let (tag, blobs) = value
                .split_once('|')
                .ok_or_else(|| script_err(line, "frame needs `class | blobs`"))?;
            let expected = GestureTag::from_name(tag.trim())
                .ok_or_else(|| script_err(line, format!("unknown gesture class {:?}", tag.trim())))?;
            let blobs = blobs
                .split(';')
                .filter(|b| !b.trim().is_empty())
                .map(|b| parse_blob(b, cam, line))
                .collect::<Result<Vec<_>>>()?;
            let frame = ScriptFrame { blobs, expected };
            frames.extend(std::iter::repeat_n(frame, repeat));
        }
        let cam = cam.ok_or_else(|| script_err(0, "missing cam"))?;
        if frames.is_empty() {
            return Err(script_err(0, "script has no frames"));
        }
        Ok(ScenarioScript { cam, noise_sigma, frames })
    }
}

impl fmt::Display for ScenarioScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cam: {}", self.cam)?;
        writeln!(f, "noise_sigma: {}", self.noise_sigma)?;
        let mut i = 0;
        while i < self.frames.len() {
            let frame = &self.frames[i];
            let run = self.frames[i..].iter().take_while(|g| *g == frame).count();
            if run == 1 {
                write!(f, "frame: {} |", frame.expected.name())?;
            } else {
                write!(f, "frames {run}: {} |", frame.expected.name())?;
            }
            for (k, b) in frame.blobs.iter().enumerate() {
                let sep = if k == 0 { " " } else { " ; " };
                write!(
                    f,
                    "{sep}{} {} {} {} {} {}",
                    b.center.x, b.center.y, b.radius, b.color.r, b.color.g, b.color.b
                )?;
            }
            writeln!(f)?;
            i += run;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::ChromaSignature;
    use crate::segment::{segment, Connectivity};

    const GREEN: Rgb = Rgb { r: 0.0, g: 255.0, b: 0.0 };

    #[test]
    fn no_blobs_no_noise_is_uniform_gray() {
        let f = synth_frame(&[], Dims::new(16, 8), 0.0, 1);
        assert_eq!(f, Frame::filled(16, 8, BACKGROUND));
    }

    #[test]
    fn disk_segments_to_its_center() {
        let blob = BlobSpec::new(PixelPoint::new(50.0, 50.0), 10.0, GREEN);
        let f = synth_frame(&[blob], Dims::new(320, 240), 0.0, 1);
        let sig = ChromaSignature::from_rgb(GREEN, 12.0).unwrap();
        let rois = segment(&f, &sig, Connectivity::Eight, 30);
        assert_eq!(rois.len(), 1);
        assert!(rois[0].centroid.distance(&PixelPoint::new(50.0, 50.0)) <= 0.5);
    }

    #[test]
    fn same_seed_same_frame() {
        let blob = BlobSpec::new(PixelPoint::new(10.0, 10.0), 4.0, GREEN);
        let a = synth_frame(&[blob], Dims::new(40, 30), 5.0, 42);
        let b = synth_frame(&[blob], Dims::new(40, 30), 5.0, 42);
        let c = synth_frame(&[blob], Dims::new(40, 30), 5.0, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn later_blobs_overdraw_and_edges_clip() {
        let red = Rgb { r: 255.0, g: 0.0, b: 0.0 };
        let blobs = [
            BlobSpec::new(PixelPoint::new(0.0, 0.0), 3.0, GREEN),
            BlobSpec::new(PixelPoint::new(0.0, 0.0), 1.0, red),
        ];
        let f = synth_frame(&blobs, Dims::new(8, 8), 0.0, 0);
        assert_eq!(f.pixel(0, 0), [255, 0, 0]);
        assert_eq!(f.pixel(3, 0), [0, 255, 0]);
        assert_eq!(f.pixel(3, 3), BACKGROUND);
    }

    const SCRIPT: &str = "\
# two-phase scenario
cam: 64x48
noise_sigma: 1.5
frames 3: point | 10 10 4 0 255 0
frame: pair_far | 10 10 4 0 255 0 ; 50 30 4 0 255 0   # trailing comment
frame: empty |
";

    #[test]
    fn parse_script() {
        let s: ScenarioScript = SCRIPT.parse().unwrap();
        assert_eq!(s.cam, Dims::new(64, 48));
        assert_eq!(s.noise_sigma, 1.5);
        assert_eq!(s.frames.len(), 5);
        assert_eq!(s.frames[3].blobs.len(), 2);
        assert_eq!(s.frames[4].expected, GestureTag::Empty);
        assert!(s.frames[4].blobs.is_empty());
        let again: ScenarioScript = s.to_string().parse().unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn script_errors_name_the_line() {
        let cases = [
            ("frame: point | 1 1 2 0 255 0\n", 1),
            ("cam: 10x10\nframe: point | 1 1 2 0 255\n", 2),
            ("cam: 10x10\nframe: wave | 1 1 2 0 255 0\n", 2),
            ("cam: 10x10\nframe: point | 1 1 0.5 0 255 0\n", 2),
            ("cam: 10x10\nframe: point | 20 1 2 0 255 0\n", 2),
            ("cam: 10x10\nframe: point | 1 1 2 0 256 0\n", 2),
            ("cam: 10x10\nframes 0: empty |\n", 2),
            ("cam: 10x10\nframe: empty |\nnoise_sigma: 1\n", 3),
            ("cam: 10x10\nbogus: 1\n", 2),
            ("cam: 10x\n", 1),
        ];
        for (text, line) in cases {
            match text.parse::<ScenarioScript>() {
                Err(Error::Script { line: got, .. }) => assert_eq!(got, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!("cam: 10x10\n".parse::<ScenarioScript>().is_err());
    }

    #[test]
    fn sequence_returns_truth_per_frame() {
        let s: ScenarioScript = SCRIPT.parse().unwrap();
        let (frames, truth) = synth_sequence(&s, 9);
        assert_eq!(frames.len(), 5);
        assert_eq!(truth[..3], [GestureTag::Point; 3]);
        assert_eq!(synth_sequence(&s, 9).0, frames);

        let single: ScenarioScript = "cam: 8x8\nframe: empty |\n".parse().unwrap();
        assert_eq!(synth_sequence(&single, 0).0.len(), 1);
    }
}
