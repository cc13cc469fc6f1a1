use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sceneflow_core::gen::{centered_intrinsics, generate_scene, Catalog, GenParams, Preset};
use sceneflow_core::io::{
    depth_to_color, flow_to_color, parse_scene, read_flo, read_pfm, scene_flow_to_color, write_ppm,
};
use sceneflow_core::render::{render_dataset, thread_pool, RenderOptions};
use sceneflow_core::verify::{verify_dataset, CheckKind, CheckSelection, Tolerances};

#[derive(Parser)]
#[command(name = "sceneflow", version, about = "Generate, render, verify and visualize scene flow ground truth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a procedurally generated scene document.
    Generate(GenerateArgs),
    /// Render ground truth bundles for every frame pair of a scene.
    Render(RenderArgs),
    /// Run consistency checks over a rendered dataset.
    Verify(VerifyArgs),
    /// Color-code a .flo or .pfm file as a .ppm image.
    Visualize(VisualizeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "road", value_parser = parse_preset)]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    actors: usize,
    /// Minimum actor speed in meters per frame.
    #[arg(long, default_value_t = 0.0)]
    speed_min: f64,
    /// Maximum actor speed in meters per frame.
    #[arg(long, default_value_t = 0.5)]
    speed_max: f64,
    /// Camera speed in meters per frame.
    #[arg(long, default_value_t = 0.3)]
    camera_speed: f64,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Focal length in pixels.
    #[arg(long, default_value_t = 500.0)]
    focal: f64,
    #[arg(long, default_value_t = 0.3)]
    baseline: f64,
    /// Scene half-width in meters.
    #[arg(long, default_value_t = 8.0)]
    extent: f64,
    /// Asset catalog file; the built-in catalog is used when absent.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Output scene document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    scene: PathBuf,
    /// Dataset root directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Render forward bundles only.
    #[arg(long)]
    forward_only: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    Roundtrip,
    Fb,
    Ego,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    dataset: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    checks: Vec<CheckArg>,
    /// Base round-trip tolerance in pixels.
    #[arg(long, default_value_t = Tolerances::default().round_trip_px)]
    tol_px: f64,
    /// Forward-backward tolerance in meters.
    #[arg(long, default_value_t = Tolerances::default().forward_backward_m)]
    tol_m: f64,
    /// Ego-motion tolerance in meters.
    #[arg(long, default_value_t = Tolerances::default().ego_motion_m)]
    tol_ego_m: f64,
    /// Directory for report.txt and summary.csv (default: the dataset root).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Args)]
struct VisualizeArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Flow magnitude mapped to full saturation (pixels or meters).
    #[arg(long, default_value_t = 10.0)]
    max_mag: f64,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

fn default_threads() -> usize {
    RenderOptions::default().threads
}

fn threads(arg: Option<u64>) -> usize {
    arg.map_or_else(default_threads, |n| n as usize)
}

fn generate(args: &GenerateArgs) -> Result<String> {
    let catalog = match &args.catalog {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Catalog::load(&text).with_context(|| format!("loading {}", path.display()))?
        }
        None => Catalog::builtin(),
    };
    let params = GenParams {
        preset: args.preset,
        seed: args.seed,
        frames: args.frames,
        actors: args.actors,
        speed_range: [args.speed_min, args.speed_max],
        camera_speed: args.camera_speed,
        intrinsics: centered_intrinsics(args.width, args.height, args.focal),
        baseline: args.baseline,
        extent: args.extent,
    };
    let text = generate_scene(&params, &catalog)?;
    write_text(&args.out, &text)?;
    Ok(format!(
        "generated {} scene (seed {}, {} frames, {} actors) -> {}",
        args.preset,
        args.seed,
        args.frames,
        args.actors,
        args.out.display()
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn render(args: &RenderArgs) -> Result<String> {
    let text = std::fs::read_to_string(&args.scene).with_context(|| format!("reading {}", args.scene.display()))?;
    let scene = parse_scene(&text).with_context(|| format!("parsing {}", args.scene.display()))?;
    let options = RenderOptions {
        threads: threads(args.threads),
        forward_only: args.forward_only,
    };
    let written = render_dataset(&scene, &args.out, &options)?;
    Ok(format!(
        "rendered {} bundles for {} frames with {} threads -> {}",
        written.len(),
        scene.frame_count,
        options.threads,
        args.out.display()
    ))
}

fn selection(checks: &[CheckArg]) -> CheckSelection {
    if checks.contains(&CheckArg::All) {
        return CheckSelection::all();
    }
    CheckSelection(
        checks
            .iter()
            .map(|c| match c {
                CheckArg::Roundtrip => CheckKind::RoundTrip,
                CheckArg::Fb => CheckKind::ForwardBackward,
                CheckArg::Ego | CheckArg::All => CheckKind::EgoMotion,
            })
            .collect(),
    )
}

fn verify(args: &VerifyArgs) -> Result<(bool, String)> {
    let tolerances = Tolerances {
        round_trip_px: args.tol_px,
        forward_backward_m: args.tol_m,
        ego_motion_m: args.tol_ego_m,
    };
    let checks = selection(&args.checks);
    let report = thread_pool(threads(args.threads))?.install(|| verify_dataset(&args.dataset, &checks, &tolerances));
    let dir = args.report.clone().unwrap_or_else(|| args.dataset.clone());
    let (text_path, _) = report
        .write(&dir)
        .with_context(|| format!("writing report to {}", dir.display()))?;
    let failed = report.failures().count();
    let summary = if report.passed() {
        format!("verification passed: {} checks, report {}", report.items.len(), text_path.display())
    } else {
        for item in report.failures() {
            eprintln!("failed: frame {} {} {}", item.frame, item.camera, item.check);
        }
        for e in &report.errors {
            eprintln!("error: {e}");
        }
        format!(
            "verification FAILED: {failed} of {} checks, {} errors, report {}",
            report.items.len(),
            report.errors.len(),
            text_path.display()
        )
    };
    Ok((report.passed(), summary))
}

fn visualize(args: &VisualizeArgs) -> Result<String> {
    if !(args.max_mag > 0.0) {
        bail!("--max-mag must be positive");
    }
    let ext = args.input.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let (image, what) = match ext {
        "flo" => (flow_to_color(&read_flo(&args.input)?, args.max_mag), "optical flow"),
        "pfm" => {
            let map = read_pfm(&args.input)?;
            match map.channels {
                1 => (depth_to_color(&map), "depth"),
                _ => (scene_flow_to_color(&map, args.max_mag), "scene flow"),
            }
        }
        other => bail!("cannot visualize `.{other}` files; expected .flo or .pfm"),
    };
    write_ppm(&image, &args.out)?;
    Ok(format!("visualized {what} {} -> {}", args.input.display(), args.out.display()))
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a).map(|s| (true, s)),
        Command::Render(a) => render(a).map(|s| (true, s)),
        Command::Verify(a) => verify(a),
        Command::Visualize(a) => visualize(a).map(|s| (true, s)),
    };
    match outcome {
        Ok((ok, summary)) => {
            println!("{summary}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
