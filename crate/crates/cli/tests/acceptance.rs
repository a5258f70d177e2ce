//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::collections::VecDeque;
use std::ffi::OsStr;
use std::fs;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::Instant;

use gesture_core::bench::{run_cell, spearman, BenchGesture, BenchSpec, CSV_HEADER};
use gesture_core::frame_io::write_frame_ppm;
use gesture_core::gesture::format_events;
use gesture_core::mapping::{mirror_x, scale_to_screen, ScreenPoint};
use gesture_core::segment::segment;
use gesture_core::service::{ClientMessage, Client, ServerMessage};
use gesture_core::synth::{synth_frame, synth_sequence, BlobSpec, ScenarioScript};
use gesture_core::{
    connected_components, rgb_to_ycbcr, run_sequence, BitMask, ChromaSignature, Connectivity, Dims, EngineConfig,
    PixelPoint, Rgb, Roi,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_gesture-mouse");
const GREEN: Rgb = Rgb { r: 0.0, g: 255.0, b: 0.0 };

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "conversion exactness", conversion_exactness),
        (2, "labeling oracle", labeling_oracle),
        (3, "centroid accuracy", centroid_accuracy),
        (4, "mapping", mapping),
        (5, "gesture golden scripts", golden_scripts),
        (6, "recognition rate", recognition_rate),
        (7, "distance degradation", distance_degradation),
        (8, "throughput", throughput),
        (9, "transport equivalence", transport_equivalence),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS {name} ({detail}; {secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {name} ({detail}; {secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn conversion_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut inputs: Vec<[f64; 3]> = (0..10_000)
        .map(|_| [rng.random_range(0.0..=255.0), rng.random_range(0.0..=255.0), rng.random_range(0.0..=255.0)])
        .collect();
    inputs.extend((0..=255).map(|v| [v as f64; 3]));

    let mut worst = 0.0f64;
    for [r, g, b] in &inputs {
        let got = rgb_to_ycbcr(Rgb::new(*r, *g, *b).unwrap()).unwrap();
        let y = 0.257 * r + 0.504 * g + 0.098 * b + 16.0;
        let cb = -0.148 * r - 0.291 * g + 0.439 * b + 128.0;
        let cr = 0.439 * r - 0.368 * g - 0.071 * b + 128.0;
        worst = worst.max((got.y - y).abs()).max((got.cb - cb).abs()).max((got.cr - cr).abs());
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e} exceeds 1e-9");
    for v in 0..=255u8 {
        let c = rgb_to_ycbcr(Rgb::gray(v)).unwrap();
        ensure!(c.cb == 128.0 && c.cr == 128.0, "gray {v} gave cb={} cr={}", c.cb, c.cr);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3}s");
    Ok(format!("{} inputs, max deviation {worst:.1e}", inputs.len()))
}

/// Breadth-first flood fill, labels assigned in raster order of first pixel.
fn flood_fill(mask: &BitMask, eight: bool) -> Vec<u32> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut labels = vec![0u32; (w * h) as usize];
    let mut next = 0;
    let offsets: &[(i64, i64)] = if eight {
        &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    } else {
        &[(0, -1), (-1, 0), (1, 0), (0, 1)]
    };
    for sy in 0..h {
        for sx in 0..w {
            if !mask.get(sx as usize, sy as usize) || labels[(sy * w + sx) as usize] != 0 {
                continue;
            }
            next += 1;
            labels[(sy * w + sx) as usize] = next;
            let mut queue = VecDeque::from([(sx, sy)]);
            while let Some((x, y)) = queue.pop_front() {
                for (dx, dy) in offsets {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let i = (ny * w + nx) as usize;
                    if mask.get(nx as usize, ny as usize) && labels[i] == 0 {
                        labels[i] = next;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
    }
    labels
}

fn labeling_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut components = 0;
    for m in 0..200 {
        let density = 0.1 + 0.8 * m as f64 / 199.0;
        let bits = (0..32 * 32).map(|_| rng.random_bool(density)).collect();
        let mask = BitMask::from_bits(32, 32, bits);
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let got = connected_components(&mask, conn);
            let want = flood_fill(&mask, eight);
            ensure!(got.labels() == want.as_slice(), "mask {m} ({conn:?}) differs from flood fill");
            ensure!(got.count() == *want.iter().max().unwrap_or(&0) as usize, "mask {m}: count");
            components += got.count();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.3}s");
    Ok(format!("400 labelings, {components} components"))
}

fn centroid_accuracy() -> Outcome {
    let cam = Dims::new(320, 240);
    let cfg = EngineConfig::with_cam(cam);
    let sig = ChromaSignature::from_rgb(GREEN, cfg.threshold).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let r: f64 = rng.random_range(5.0..=20.0);
        let c = PixelPoint::new(
            rng.random_range(r + 1.0..cam.width as f64 - r - 1.0),
            rng.random_range(r + 1.0..cam.height as f64 - r - 1.0),
        );
        let frame = synth_frame(&[BlobSpec::new(c, r, GREEN)], cam, 0.0, 0);
        let rois = segment(&frame, &sig, cfg.connectivity, cfg.min_blob_area());
        ensure!(rois.len() == 1, "disk {i} (r={r:.2}) gave {} regions", rois.len());
        let err = rois[0].centroid.distance(&c);
        ensure!(err <= 0.5, "disk {i}: centroid off by {err:.3}");
        worst = worst.max(err);
    }
    Ok(format!("50 disks, max centroid error {worst:.4} px"))
}

fn mapping() -> Outcome {
    let (cam, screen) = (Dims::new(640, 480), Dims::new(1600, 900));
    let scaled = scale_to_screen(PixelPoint::new(320.0, 240.0), cam, screen).unwrap();
    ensure!(scaled == ScreenPoint::new(800.0, 450.0), "scaled to {scaled:?}");
    let mirrored = mirror_x(scaled, screen.width);
    ensure!(mirrored == ScreenPoint::new(799.0, 450.0), "mirrored to {mirrored:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let p = ScreenPoint::new(rng.random_range(0..1600) as f64, rng.random_range(0..900) as f64);
        let back = mirror_x(mirror_x(p, screen.width), screen.width);
        ensure!(back == p, "{p:?} came back as {back:?}");
    }
    Ok("(320, 240) -> (800, 450) -> (799, 450); 1000 involutions exact".into())
}

/// Expands a compact frame script into per-frame ROI lists.
///
/// Tokens: `E` empty, `P x y` point, `F` far pair, `N` near pair, `T x y`
/// triple around an anchor, `Q` quad, `O` five regions, `pair x1 y1 x2 y2`.
/// A `k*` prefix repeats the frame.
fn roi_script(lines: &[&str]) -> Vec<Vec<Roi>> {
    let at = |x: f64, y: f64| Roi::at(PixelPoint::new(x, y));
    let mut frames = Vec::new();
    for line in lines {
        let (repeat, body) = match line.split_once('*') {
            Some((k, rest)) => (k.trim().parse().unwrap(), rest.trim()),
            None => (1, line.trim()),
        };
        let words: Vec<&str> = body.split_whitespace().collect();
        let nums: Vec<f64> = words[1..].iter().map(|w| w.parse().unwrap()).collect();
        let rois = match words[0] {
            "E" => vec![],
            "P" => vec![at(nums[0], nums[1])],
            "F" => vec![at(60.0, 120.0), at(260.0, 120.0)],
            "N" => vec![at(100.0, 40.0), at(130.0, 40.0)],
            "T" => vec![at(nums[0] - 40.0, nums[1]), at(nums[0], nums[1]), at(nums[0] + 40.0, nums[1])],
            "Q" => vec![at(145.0, 105.0), at(175.0, 105.0), at(145.0, 135.0), at(175.0, 135.0)],
            "O" => (0..5).map(|i| at(40.0 + 60.0 * i as f64, 200.0)).collect(),
            "pair" => vec![at(nums[0], nums[1]), at(nums[2], nums[3])],
            other => panic!("unknown token {other}"),
        };
        frames.extend(std::iter::repeat_n(rois, repeat));
    }
    frames
}

fn golden_scripts() -> Outcome {
    // Default config: cam 320x240, screen 1600x900, split 80, three stable
    // frames, mirrored x. Screen x = 1599 - 5 cx, screen y = 3.75 cy.
    let scripts: [(&str, &[&str], &str); 10] = [
        (
            "move",
            &["P 100 120", "P 110 120", "P 120 80", "P 130 40"],
            r#"{"kind":"move","x":1099,"y":450,"frame":0}
{"kind":"move","x":1049,"y":450,"frame":1}
{"kind":"move","x":999,"y":300,"frame":2}
{"kind":"move","x":949,"y":150,"frame":3}
"#,
        ),
        (
            "left click",
            &["P 160 120", "4*F", "P 160 120"],
            r#"{"kind":"move","x":799,"y":450,"frame":0}
{"kind":"left_click","x":799,"y":450,"frame":3}
{"kind":"move","x":799,"y":450,"frame":5}
"#,
        ),
        (
            "right click",
            &["P 100 40", "3*N"],
            r#"{"kind":"move","x":1099,"y":150,"frame":0}
{"kind":"right_click","x":1099,"y":150,"frame":3}
"#,
        ),
        (
            "split boundary",
            &["3*pair 0 0 80 0", "3*pair 0 0 80.5 0"],
            r#"{"kind":"right_click","x":800,"y":450,"frame":2}
{"kind":"left_click","x":800,"y":450,"frame":5}
"#,
        ),
        (
            "double click",
            &["P 200 160", "5*Q"],
            r#"{"kind":"move","x":599,"y":600,"frame":0}
{"kind":"double_click","x":599,"y":600,"frame":3}
"#,
        ),
        (
            "drag episode",
            &["P 100 120", "3*T 100 120", "T 110 120", "T 120 120", "P 120 120", "2*P 124 120"],
            r#"{"kind":"move","x":1099,"y":450,"frame":0}
{"kind":"drag_start","x":1099,"y":450,"frame":3}
{"kind":"drag_move","x":1049,"y":450,"frame":4}
{"kind":"drag_move","x":999,"y":450,"frame":5}
{"kind":"drag_move","x":999,"y":450,"frame":6}
{"kind":"drag_move","x":979,"y":450,"frame":7}
{"kind":"drag_end","x":979,"y":450,"frame":8}
{"kind":"move","x":979,"y":450,"frame":8}
"#,
        ),
        (
            "overflow",
            &["P 160 120", "4*O", "P 100 120", "3*F"],
            r#"{"kind":"move","x":799,"y":450,"frame":0}
{"kind":"move","x":1099,"y":450,"frame":5}
{"kind":"left_click","x":1099,"y":450,"frame":8}
"#,
        ),
        (
            "debounce re-arm",
            &["4*F", "E", "3*F", "3*E", "3*F"],
            r#"{"kind":"left_click","x":800,"y":450,"frame":2}
{"kind":"left_click","x":800,"y":450,"frame":13}
"#,
        ),
        (
            "short glitches",
            &["2*N", "E", "2*N", "P 160 120"],
            r#"{"kind":"move","x":799,"y":450,"frame":5}
"#,
        ),
        (
            "drag ended by click class",
            &["P 160 120", "3*T 160 120", "5*F"],
            r#"{"kind":"move","x":799,"y":450,"frame":0}
{"kind":"drag_start","x":799,"y":450,"frame":3}
{"kind":"drag_end","x":799,"y":450,"frame":6}
{"kind":"left_click","x":799,"y":450,"frame":7}
"#,
        ),
    ];
    let cfg = EngineConfig::default();
    for (name, lines, golden) in scripts {
        let events = run_sequence(&roi_script(lines), &cfg).map_err(|e| format!("{name}: {e}"))?;
        let got = format_events(&events);
        ensure!(got == golden, "{name}: got\n{got}");
    }
    Ok("10 scripts byte-exact".into())
}

fn sweep_spec(trials: usize, frames: usize, seed: u64) -> BenchSpec {
    BenchSpec {
        trials,
        frames_per_trial: frames,
        seed,
        ..BenchSpec::default()
    }
}

fn recognition_rate() -> Outcome {
    let spec = sweep_spec(30, 100, 6);
    let mut report = Vec::new();
    for g in BenchGesture::ALL {
        let cell = run_cell(g, 6.0, 8.0, &spec).map_err(|e| e.to_string())?;
        let floor = if g == BenchGesture::Move { 0.95 } else { 0.80 };
        ensure!(
            cell.recognition_rate >= floor,
            "{g} at sigma 6, radius 8: rate {:.4} < {floor}",
            cell.recognition_rate
        );
        report.push(format!("{g}={:.4}", cell.recognition_rate));
    }

    let grid = sweep_spec(5, 100, 60);
    let mut lowest = 1.0f64;
    for sigma in [0.0, 3.0, 6.0] {
        for radius in [8.0, 12.0, 16.0] {
            let cell = run_cell(BenchGesture::Move, sigma, radius, &grid).map_err(|e| e.to_string())?;
            ensure!(
                cell.recognition_rate >= 0.95,
                "move at sigma {sigma}, radius {radius}: rate {:.4}",
                cell.recognition_rate
            );
            lowest = lowest.min(cell.recognition_rate);
        }
    }
    Ok(format!(
        "sigma 6, radius 8, 30 seeds x 100 frames: {}; move grid min {lowest:.4}",
        report.join(" ")
    ))
}

fn distance_degradation() -> Outcome {
    let spec = sweep_spec(30, 40, 7);
    let mut distance = Vec::new();
    let mut rate = Vec::new();
    let mut means = Vec::new();
    for radius in (2..=16).rev() {
        let radius = radius as f64;
        let cell = run_cell(BenchGesture::Move, 3.0, radius, &spec).map_err(|e| e.to_string())?;
        for r in &cell.trial_rates {
            distance.push(1.0 / radius);
            rate.push(*r);
        }
        means.push((radius, cell.recognition_rate));
    }
    let (rho, p) = spearman(&distance, &rate).ok_or("spearman undefined")?;
    ensure!(rho < 0.0 && p < 0.05, "rho {rho:.4}, p {p:.3e}");
    for w in means.windows(2) {
        ensure!(
            w[1].1 <= w[0].1,
            "rate rose from {:.4} at radius {} to {:.4} at radius {}",
            w[0].1,
            w[0].0,
            w[1].1,
            w[1].0
        );
    }
    let profile: Vec<String> = means.iter().map(|(r, m)| format!("{r}:{m:.3}")).collect();
    Ok(format!("rho {rho:.4}, p {p:.2e}; radius:rate {}", profile.join(" ")))
}

fn throughput() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = dir.path().join("bench.csv");
    let out = Command::new(BIN)
        .args(["bench", "--sigmas", "3", "--radii", "12", "--trials", "2", "--frames", "100", "--report"])
        .arg(&report)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "bench exited {:?}", out.status);
    let csv = fs::read_to_string(&report).map_err(|e| e.to_string())?;
    let mut lines = csv.lines();
    ensure!(lines.next() == Some(CSV_HEADER), "bad header");
    let mut slowest = 0.0f64;
    for line in lines {
        let micros: f64 = line.rsplit(',').next().and_then(|v| v.parse().ok()).ok_or("bad row")?;
        slowest = slowest.max(micros);
    }
    ensure!(slowest <= 10_000.0, "slowest cell {slowest:.1} us/frame");
    Ok(format!("slowest cell {slowest:.1} us/frame ({:.0} frames/s)", 1e6 / slowest))
}

const TRANSPORT_SCRIPT: &str = "\
cam: 320x240
noise_sigma: 3
frames 3: point | 160 120 10 0 255 0
frame: point | 150 110 10 0 255 0
frame: point | 140 100 10 0 255 0
frames 4: pair_far | 60 120 10 0 255 0 ; 260 120 10 0 255 0
frames 2: empty |
frames 4: pair_near | 140 100 10 0 255 0 ; 180 100 10 0 255 0
frames 3: triple | 100 120 9 0 255 0 ; 140 120 9 0 255 0 ; 180 120 9 0 255 0
frame: triple | 110 124 9 0 255 0 ; 150 124 9 0 255 0 ; 190 124 9 0 255 0
frame: triple | 120 128 9 0 255 0 ; 160 128 9 0 255 0 ; 200 128 9 0 255 0
frames 3: point | 170 130 10 0 255 0
frames 4: quad | 130 90 9 0 255 0 ; 190 90 9 0 255 0 ; 130 150 9 0 255 0 ; 190 150 9 0 255 0
frames 2: point | 200 140 10 0 255 0
";

struct ServerProcess(Child);

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn run_cli(args: &[&OsStr]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn transport_equivalence() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let frames_dir = tmp.path().join("frames");
    fs::create_dir(&frames_dir).map_err(|e| e.to_string())?;
    let script: ScenarioScript = TRANSPORT_SCRIPT.parse().map_err(|e: gesture_core::Error| e.to_string())?;
    let (frames, _) = synth_sequence(&script, 9);
    for (i, f) in frames.iter().enumerate() {
        fs::write(frames_dir.join(format!("frame_{i:04}.ppm")), write_frame_ppm(f)).map_err(|e| e.to_string())?;
    }

    let snapshot = frames_dir.join("frame_0000.ppm");
    let sig_path = tmp.path().join("sig.txt");
    let events_path = tmp.path().join("events.jsonl");
    let s = OsStr::new;
    run_cli(&[
        s("calibrate"),
        s("--x"),
        s("160"),
        s("--y"),
        s("120"),
        s("--snapshot"),
        snapshot.as_os_str(),
        s("--out"),
        sig_path.as_os_str(),
    ])?;
    run_cli(&[
        s("run"),
        s("--frames"),
        frames_dir.as_os_str(),
        s("--signature"),
        sig_path.as_os_str(),
        s("--events"),
        events_path.as_os_str(),
    ])?;
    let offline = fs::read_to_string(&events_path).map_err(|e| e.to_string())?;

    let mut child = Command::new(BIN)
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().ok_or("no stdout")?;
    let _guard = ServerProcess(child);
    let mut banner = String::new();
    BufReader::new(stdout).read_line(&mut banner).map_err(|e| e.to_string())?;
    let addr = banner.trim().strip_prefix("listening on ").ok_or(format!("banner {banner:?}"))?.to_string();

    let mut client = Client::connect(addr.as_str()).map_err(|e| e.to_string())?;
    let reply = client.request(&ClientMessage::Hello { config: None }).map_err(|e| e.to_string())?;
    ensure!(matches!(reply, ServerMessage::Ready { .. }), "hello -> {reply:?}");
    client.process_frame(0, &frames[0]).map_err(|e| e.to_string())?;
    let reply = client
        .request(&ClientMessage::Calibrate { x: 160.0, y: 120.0, window: 3 })
        .map_err(|e| e.to_string())?;
    ensure!(matches!(reply, ServerMessage::Calibrated { .. }), "calibrate -> {reply:?}");
    let reply = client.request(&ClientMessage::Start).map_err(|e| e.to_string())?;
    ensure!(matches!(reply, ServerMessage::Started), "start -> {reply:?}");

    let mut served = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        for msg in client.process_frame(i as u32, f).map_err(|e| e.to_string())? {
            match msg {
                ServerMessage::Event(e) => served.push(e),
                ServerMessage::Frame { .. } => {}
                other => return Err(format!("frame {i}: {other:?}")),
            }
        }
    }
    let online = format_events(&served);
    ensure!(!offline.is_empty(), "offline run produced no events");
    ensure!(online == offline, "logs differ\noffline:\n{offline}\nserved:\n{online}");
    Ok(format!("{} frames, {} identical event lines", frames.len(), served.len()))
}
