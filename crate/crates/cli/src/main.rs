use std::fs;
use std::io::{self, BufReader, Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gesture_core::bench::{run_bench, write_csv, BenchGesture, BenchSpec};
use gesture_core::color::luma_scaled_threshold;
use gesture_core::frame_io::{encode_gfrm, load_frame_ppm, write_frame_ppm, GFRM_HEADER_LEN};
use gesture_core::gesture::format_events;
use gesture_core::pipeline::{list_frame_files, run_directory, run_stream};
use gesture_core::service::Server;
use gesture_core::synth::{synth_sequence, ScenarioScript};
use gesture_core::{calibrate_signature, ChromaSignature, Connectivity, Dims, EngineConfig, PixelPoint, Pipeline};

#[derive(Parser)]
#[command(name = "gesture-mouse", version, about = "Color-cap gesture recognition to mouse events")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the cap color from a snapshot and write a signature file.
    Calibrate(CalibrateArgs),
    /// Run the pipeline over a frame directory or a GFRM stream.
    Run(RunArgs),
    /// Render a scenario script to PPM frames plus a truth listing.
    Synth(SynthArgs),
    /// Sweep noise and cap radius over synthetic gestures and write a CSV report.
    Bench(BenchArgs),
    /// Serve the session protocol over TCP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Snapshot frame (binary PPM).
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    y: f64,
    /// Sampling window side: 1, 3 or 5.
    #[arg(long, default_value_t = 3, value_parser = parse_window)]
    window: usize,
    #[arg(long, default_value_t = 12.0)]
    threshold: f64,
    /// Threshold change per unit of calibrated luma; 0 keeps it fixed.
    #[arg(long, default_value_t = 0.0)]
    threshold_luma_slope: f64,
    /// Signature output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Camera dims as WxH; defaults to the dims of the input frames.
    #[arg(long)]
    cam: Option<Dims>,
    #[arg(long, default_value = "1600x900")]
    screen: Dims,
    /// Minimum region area in pixels; defaults to 30 scaled to the camera area.
    #[arg(long)]
    min_blob_area: Option<usize>,
    /// Pixel connectivity, 4 or 8.
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    /// Two-region split distance in camera pixels; defaults to a quarter of the camera width.
    #[arg(long)]
    click_split: Option<f64>,
    #[arg(long, default_value_t = 3)]
    stable_frames: u32,
    /// Cursor smoothing weight of the newest position, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Do not mirror the horizontal axis.
    #[arg(long)]
    no_mirror_x: bool,
    /// Mirror the vertical axis.
    #[arg(long)]
    mirror_y: bool,
}

impl EngineArgs {
    fn config(&self, cam: Dims) -> anyhow::Result<EngineConfig> {
        let cfg = EngineConfig {
            cam: self.cam.unwrap_or(cam),
            screen: self.screen,
            min_blob_area: self.min_blob_area,
            connectivity: Connectivity::try_from(self.connectivity)?,
            click_split: self.click_split,
            stable_frames: self.stable_frames,
            smoothing_alpha: self.alpha,
            mirror_x: !self.no_mirror_x,
            mirror_y: self.mirror_y,
            ..EngineConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
#[group(id = "input", required = true, multiple = false)]
struct RunInput {
    /// Directory of `.ppm` frames, processed in file name order.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// File of concatenated GFRM records.
    #[arg(long)]
    stream: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: RunInput,
    #[arg(long)]
    signature: PathBuf,
    /// Event log output, one JSON record per line.
    #[arg(long)]
    events: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    script: PathBuf,
    /// Output directory for `frame_NNNN.ppm` files and `truth.txt`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the frames as one GFRM stream file.
    #[arg(long)]
    stream: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Noise standard deviations, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,3,6")]
    sigmas: Vec<f64>,
    /// Cap radii in camera pixels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "16,12,8,4,2")]
    radii: Vec<f64>,
    /// Gestures to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "move,left_click,right_click,double_click,drag")]
    gestures: Vec<BenchGesture>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Frames per trial.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV report output path.
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// TCP port; 0 picks a free one.
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value_t = 12.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    threshold_luma_slope: f64,
    #[command(flatten)]
    engine: EngineArgs,
}

fn parse_window(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(w @ (1 | 3 | 5)) => Ok(w),
        _ => Err(format!("window must be 1, 3 or 5, got {s}")),
    }
}

/// A failed command and the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitContext<T> {
    fn usage(self) -> Result<T, Failure>;
    fn pipeline(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }

    fn pipeline(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
}

fn read_ppm(path: &Path) -> Result<gesture_core::Frame, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .usage()?;
    load_frame_ppm(&bytes)
        .with_context(|| format!("parsing {}", path.display()))
        .usage()
}

fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let snapshot = read_ppm(&args.snapshot)?;
    let sig = calibrate_signature(&snapshot, PixelPoint::new(args.x, args.y), args.window, args.threshold).usage()?;
    let threshold = luma_scaled_threshold(args.threshold, args.threshold_luma_slope, sig.target.y);
    let sig = ChromaSignature::new(sig.target, threshold).usage()?;
    fs::write(&args.out, format!("{sig}\n"))
        .with_context(|| format!("writing {}", args.out.display()))
        .usage()?;
    println!("{sig}");
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.signature)
        .with_context(|| format!("reading signature {}", args.signature.display()))
        .usage()?;
    let sig: ChromaSignature = text
        .parse()
        .with_context(|| format!("parsing signature {}", args.signature.display()))
        .usage()?;

    let (events, summary) = if let Some(dir) = &args.input.frames {
        let files = list_frame_files(dir)
            .with_context(|| format!("listing {}", dir.display()))
            .usage()?;
        let cam = match (args.engine.cam, files.first()) {
            (Some(cam), _) => cam,
            (None, Some(first)) => read_ppm(first)?.dims(),
            (None, None) => EngineConfig::default().cam,
        };
        let mut pipeline = Pipeline::new(args.engine.config(cam).usage()?, sig).usage()?;
        run_directory(&mut pipeline, dir).pipeline()?
    } else {
        let path = args.input.stream.as_ref().expect("clap enforces one input");
        let mut file = BufReader::new(
            fs::File::open(path)
                .with_context(|| format!("opening {}", path.display()))
                .usage()?,
        );
        let mut head = Vec::with_capacity(GFRM_HEADER_LEN);
        (&mut file)
            .take(GFRM_HEADER_LEN as u64)
            .read_to_end(&mut head)
            .usage()?;
        let cam = match args.engine.cam {
            Some(cam) => cam,
            None if head.len() == GFRM_HEADER_LEN => {
                let rest: [u8; 8] = head[4..].try_into().expect("8 bytes");
                gesture_core::frame_io::parse_gfrm_header(&rest).1
            }
            None => EngineConfig::default().cam,
        };
        let mut pipeline = Pipeline::new(args.engine.config(cam).usage()?, sig).usage()?;
        run_stream(&mut pipeline, Cursor::new(head).chain(file))
            .with_context(|| format!("in stream {}", path.display()))
            .pipeline()?
    };

    fs::write(&args.events, format_events(&events))
        .with_context(|| format!("writing {}", args.events.display()))
        .usage()?;
    println!("{summary}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.script)
        .with_context(|| format!("reading {}", args.script.display()))
        .usage()?;
    let script: ScenarioScript = text
        .parse()
        .with_context(|| format!("parsing {}", args.script.display()))
        .usage()?;
    let (frames, truth) = synth_sequence(&script, args.seed);

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .usage()?;
    let digits = (frames.len().saturating_sub(1)).to_string().len().max(4);
    let mut listing = String::new();
    for (i, (frame, tag)) in frames.iter().zip(&truth).enumerate() {
        let name = format!("frame_{i:0digits$}.ppm");
        let path = args.out.join(&name);
        fs::write(&path, write_frame_ppm(frame))
            .with_context(|| format!("writing {}", path.display()))
            .usage()?;
        listing.push_str(&format!("{name} {}\n", tag.name()));
    }
    let truth_path = args.out.join("truth.txt");
    fs::write(&truth_path, listing)
        .with_context(|| format!("writing {}", truth_path.display()))
        .usage()?;

    if let Some(path) = &args.stream {
        let mut out = io::BufWriter::new(
            fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .usage()?,
        );
        for (i, frame) in frames.iter().enumerate() {
            let index = u32::try_from(i).map_err(|_| anyhow!("too many frames")).usage()?;
            out.write_all(&encode_gfrm(index, frame).usage()?).usage()?;
        }
        out.flush().usage()?;
    }
    println!("frames={} dir={}", frames.len(), args.out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let config = args.engine.config(EngineConfig::default().cam).usage()?;
    let spec = BenchSpec {
        gestures: args.gestures,
        sigmas: args.sigmas,
        radii: args.radii,
        trials: args.trials,
        frames_per_trial: args.frames,
        seed: args.seed,
        config,
    };
    let cells = run_bench(&spec).pipeline()?;
    let file = fs::File::create(&args.report)
        .with_context(|| format!("creating {}", args.report.display()))
        .usage()?;
    let mut out = io::BufWriter::new(file);
    write_csv(&mut out, &cells).usage()?;
    out.flush().usage()?;
    for c in &cells {
        println!(
            "{} sigma={} radius={} rate={:.4} frame_us={:.1}",
            c.gesture, c.sigma, c.radius, c.recognition_rate, c.mean_frame_micros
        );
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut config = args.engine.config(EngineConfig::default().cam).usage()?;
    config.threshold = args.threshold;
    config.threshold_luma_slope = args.threshold_luma_slope;
    let server = Server::bind((args.host.as_str(), args.port), config).usage()?;
    println!("listening on {}", server.local_addr().usage()?);
    io::stdout().flush().usage()?;
    server.run().usage()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GESTURE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::debug!("exit status {}", f.code);
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
