//! Synthetic recognition-rate and throughput sweeps.
//!
//! Each cell of the sweep is one (gesture, noise sigma, blob radius) triple.
//! For every trial a drifting arrangement of color caps is synthesized, the
//! full pipeline is run over it, and the per-frame class is compared with the
//! scripted truth. Only pipeline work is timed; synthesis is not.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::color::{ChromaSignature, Rgb};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::gesture::GestureTag;
use crate::mapping::PixelPoint;
use crate::pipeline::Pipeline;
use crate::synth::{frame_seed, synth_frame, BlobSpec, ScenarioScript, ScriptFrame};

pub const CAP_COLOR: Rgb = Rgb { r: 0.0, g: 255.0, b: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchGesture {
    Move,
    LeftClick,
    RightClick,
    DoubleClick,
    Drag,
}

impl BenchGesture {
    pub const ALL: [BenchGesture; 5] = [
        BenchGesture::Move,
        BenchGesture::LeftClick,
        BenchGesture::RightClick,
        BenchGesture::DoubleClick,
        BenchGesture::Drag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchGesture::Move => "move",
            BenchGesture::LeftClick => "left_click",
            BenchGesture::RightClick => "right_click",
            BenchGesture::DoubleClick => "double_click",
            BenchGesture::Drag => "drag",
        }
    }

    pub fn tag(self) -> GestureTag {
        match self {
            BenchGesture::Move => GestureTag::Point,
            BenchGesture::LeftClick => GestureTag::PairFar,
            BenchGesture::RightClick => GestureTag::PairNear,
            BenchGesture::DoubleClick => GestureTag::Quad,
            BenchGesture::Drag => GestureTag::Triple,
        }
    }

    /// Blob offsets from the group anchor, in units of `spacing`.
    fn layout(self) -> &'static [(f64, f64)] {
        match self {
            BenchGesture::Move => &[(0.0, 0.0)],
            BenchGesture::LeftClick => &[(-1.0, 0.0), (1.0, 0.0)],
            BenchGesture::RightClick => &[(-0.5, 0.0), (0.5, 0.0)],
            BenchGesture::Drag => &[(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)],
            BenchGesture::DoubleClick => &[(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)],
        }
    }
}

impl FromStr for BenchGesture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown gesture {s:?}")))
    }
}

impl fmt::Display for BenchGesture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds a drifting scenario for `gesture`. Caps keep a fixed arrangement
/// around an anchor that moves in a straight line, bouncing off the borders.
///
/// The far pair's centroids sit `0.5 * cam_width` apart (twice the default
/// split of `0.25 * cam_width`); neighbors in the near pair, triple and quad
/// sit `0.15 * cam_width` apart.
pub fn gesture_script(
    gesture: BenchGesture,
    cfg: &EngineConfig,
    radius: f64,
    noise_sigma: f64,
    frames: usize,
    seed: u64,
) -> ScenarioScript {
    let cam = cfg.cam;
    let w = cam.width as f64;
    let spacing = match gesture {
        BenchGesture::LeftClick => 0.25 * w,
        _ => 0.15 * w,
    };
    let layout = gesture.layout();
    let extent = |axis: fn(&(f64, f64)) -> f64| {
        layout.iter().map(|o| axis(o).abs()).fold(0.0, f64::max) * spacing + radius + 1.0
    };
    let (ex, ey) = (extent(|o| o.0), extent(|o| o.1));
    let (lo_x, hi_x) = (ex, (w - 1.0 - ex).max(ex));
    let (lo_y, hi_y) = (ey, (cam.height as f64 - 1.0 - ey).max(ey));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = rng.random_range(lo_x..=hi_x);
    let mut y = rng.random_range(lo_y..=hi_y);
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let speed = rng.random_range(0.5..3.0);
    let (mut vx, mut vy) = (speed * heading.cos(), speed * heading.sin());

    let mut script_frames = Vec::with_capacity(frames);
    for _ in 0..frames {
        let blobs = layout
            .iter()
            .map(|(ox, oy)| BlobSpec::new(PixelPoint::new(x + ox * spacing, y + oy * spacing), radius, CAP_COLOR))
            .collect();
        script_frames.push(ScriptFrame {
            blobs,
            expected: gesture.tag(),
        });
        x += vx;
        y += vy;
        if x < lo_x || x > hi_x {
            vx = -vx;
            x = x.clamp(lo_x, hi_x);
        }
        if y < lo_y || y > hi_y {
            vy = -vy;
            y = y.clamp(lo_y, hi_y);
        }
    }
    ScenarioScript {
        cam,
        noise_sigma,
        frames: script_frames,
    }
}

/// Outcome of running one scripted sequence through a fresh pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub frames: usize,
    pub correct: usize,
    pub pipeline_micros: f64,
}

impl TrialResult {
    pub fn rate(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.correct as f64 / self.frames as f64
        }
    }
}

/// Synthesizes `script` and scores per-frame classes against its truth.
pub fn run_trial(script: &ScenarioScript, cfg: &EngineConfig, seed: u64) -> Result<TrialResult> {
    let cfg = EngineConfig {
        cam: script.cam,
        ..cfg.clone()
    };
    let sig = ChromaSignature::from_rgb(CAP_COLOR, cfg.threshold)?;
    let mut pipeline = Pipeline::new(cfg, sig)?;
    let mut result = TrialResult {
        frames: 0,
        correct: 0,
        pipeline_micros: 0.0,
    };
    for (i, sf) in script.frames.iter().enumerate() {
        let frame = synth_frame(&sf.blobs, script.cam, script.noise_sigma, frame_seed(seed, i));
        let start = Instant::now();
        let (g, _) = pipeline.process_classified(&frame, i as u64)?;
        result.pipeline_micros += start.elapsed().as_secs_f64() * 1e6;
        result.frames += 1;
        if g.tag == sf.expected {
            result.correct += 1;
        }
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub gestures: Vec<BenchGesture>,
    pub sigmas: Vec<f64>,
    pub radii: Vec<f64>,
    pub trials: usize,
    pub frames_per_trial: usize,
    pub seed: u64,
    pub config: EngineConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            gestures: BenchGesture::ALL.to_vec(),
            sigmas: vec![0.0, 3.0, 6.0],
            radii: vec![16.0, 12.0, 8.0, 4.0, 2.0],
            trials: 5,
            frames_per_trial: 100,
            seed: 0,
            config: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub gesture: BenchGesture,
    pub sigma: f64,
    pub radius: f64,
    pub trials: usize,
    pub recognition_rate: f64,
    pub mean_frame_micros: f64,
    /// Recognition rate of each trial, in trial order.
    pub trial_rates: Vec<f64>,
}

/// Runs one cell: `trials` sequences, trial `t` seeded with `frame_seed(seed, t)`.
/// The same trial seeds are reused across cells.
pub fn run_cell(
    gesture: BenchGesture,
    sigma: f64,
    radius: f64,
    spec: &BenchSpec,
) -> Result<BenchCell> {
    let mut frames = 0;
    let mut correct = 0;
    let mut micros = 0.0;
    let mut trial_rates = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        let seed = frame_seed(spec.seed, t);
        let script = gesture_script(gesture, &spec.config, radius, sigma, spec.frames_per_trial, seed);
        let r = run_trial(&script, &spec.config, seed)?;
        frames += r.frames;
        correct += r.correct;
        micros += r.pipeline_micros;
        trial_rates.push(r.rate());
    }
    Ok(BenchCell {
        gesture,
        sigma,
        radius,
        trials: spec.trials,
        recognition_rate: if frames == 0 { 0.0 } else { correct as f64 / frames as f64 },
        mean_frame_micros: if frames == 0 { 0.0 } else { micros / frames as f64 },
        trial_rates,
    })
}

/// Every (gesture, sigma, radius) cell, in that nesting order.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchCell>> {
    spec.config.validate()?;
    let mut cells = Vec::new();
    for &g in &spec.gestures {
        for &sigma in &spec.sigmas {
            for &radius in &spec.radii {
                log::debug!("bench cell {g} sigma={sigma} radius={radius}");
                cells.push(run_cell(g, sigma, radius, spec)?);
            }
        }
    }
    Ok(cells)
}

pub const CSV_HEADER: &str = "gesture,sigma,radius,trials,recognition_rate,mean_frame_micros";

pub fn write_csv<W: Write>(mut out: W, cells: &[BenchCell]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.3}",
            c.gesture, c.sigma, c.radius, c.trials, c.recognition_rate, c.mean_frame_micros
        )?;
    }
    Ok(())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based average rank for the tie group i..=j
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with tie-averaged ranks, and its two-sided
/// p-value from the t approximation with `n - 2` degrees of freedom.
///
/// Returns `None` with fewer than 3 points or when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(x.len(), y.len(), "paired samples required");
    let n = x.len();
    if n < 3 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let rho = sxy / (sxx * syy).sqrt();
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Some((rho, p))
}
