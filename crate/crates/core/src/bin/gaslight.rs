//! Command-line front end. Exit status 2 means bad input, 1 an internal failure.

use std::io::{self as stdio, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use gaslight::bracket::{
    expand_stack, infer_ev, oracle_predict, protocol, ExpandLimits, ExposureStack, ExternalPredictor, OraclePredictor,
    StackEntry,
};
use gaslight::color::{ExposureValue, LinearImage, Transfer};
use gaslight::config::PipelineConfig;
use gaslight::dataset::{make_dataset, DatasetConfig};
use gaslight::geom::Vec3;
use gaslight::gs::camera::load_views;
use gaslight::gs::fit::{fit, init_from_points, random_points, FitConfig};
use gaslight::gs::ply::{read_ply, write_ply};
use gaslight::gs::{bake_envmap, classify_emitters};
use gaslight::io::{self, png::BitDepth};
use gaslight::merge::{audit_hdr, merge, AuditConfig, WeightProfile};
use gaslight::metrics::{compare, CompareOptions, Domain};
use gaslight::pipeline::run_pipeline;
use gaslight::relight::{evaluate_pair, render, PartialIbl, SceneSpec};
use gaslight::{Error, Result};

#[derive(Parser)]
#[command(name = "gaslight", version, about = "HDR lighting from LDR images: expand, merge, relight, splat")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn", env = "GASLIGHT_LOG")]
    log: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grow an exposure stack around one LDR image with a predictor.
    Expand(ExpandArgs),
    /// Merge a stack directory written by `expand` into linear HDR.
    Merge(MergeArgs),
    /// Flag HDR files whose highlights look clipped.
    Audit(AuditArgs),
    /// Compare a predicted HDR image against ground truth.
    Metrics(MetricsArgs),
    /// Render the sphere-and-plane probe scene lit by an HDR image.
    Relight(RelightArgs),
    /// Fit an HDR Gaussian splat scene to posed images.
    FitGs(FitArgs),
    /// Bake an equirectangular environment map from a splat scene.
    Bake(BakeArgs),
    /// List the gaussians whose radiance exceeds a threshold.
    Emitters(EmitterArgs),
    /// Cut perspective training crops out of HDR panoramas.
    MakeDataset(DatasetArgs),
    /// Run the whole pipeline from a config file.
    Run(RunArgs),
    /// Built-in predictor processes speaking the stdin/stdout protocol.
    #[command(hide = true, subcommand)]
    Predictor(PredictorCmd),
}

#[derive(Args)]
struct ExpandArgs {
    /// LDR input (PNG, gamma 2.2).
    #[arg(long)]
    input: PathBuf,
    /// Linear ground truth; uses the in-process oracle instead of `--predictor`.
    #[arg(long, conflicts_with = "predictor")]
    oracle_gt: Option<PathBuf>,
    /// Predictor command line, spawned once per request. GASLIGHT_PREDICTOR_TIMEOUT
    /// sets the per-request timeout in seconds (default 300).
    #[arg(long, num_args = 1.., allow_hyphen_values = true, required_unless_present = "oracle_gt")]
    predictor: Vec<String>,
    #[arg(long, default_value_t = 8)]
    max_steps: usize,
    #[arg(long, default_value_t = 2.0)]
    step_ev: f64,
    /// Fraction of saturated pixels tolerated before a side stops.
    #[arg(long, default_value_t = 0.001)]
    tolerance: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Index written by `expand` and read by `merge`.
#[derive(Serialize, Deserialize)]
struct StackIndex {
    step_ev: f64,
    entries: Vec<StackFile>,
    darker_steps: usize,
    brighter_steps: usize,
    truncated_darker: bool,
    truncated_brighter: bool,
}

#[derive(Serialize, Deserialize)]
struct StackFile {
    file: String,
    ev: f64,
}

#[derive(Args)]
struct MergeArgs {
    /// Directory containing `stack.json`.
    #[arg(long)]
    stack: PathBuf,
    /// Output `.hdr` or `.pfm`.
    #[arg(long)]
    out: PathBuf,
    /// Lower edge of the reference band.
    #[arg(long, default_value_t = 0.2)]
    band_lo: f32,
    /// Upper edge of the reference band.
    #[arg(long, default_value_t = 0.8)]
    band_hi: f32,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    /// JSON report; stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.005)]
    peak_fraction: f32,
    #[arg(long, default_value_t = 4)]
    min_pixels: usize,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Rescale the prediction to the ground truth's exposure first.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    align: bool,
    /// Compare `display` (gamma 2.2, clamped) or `linear` values.
    #[arg(long, default_value = "display")]
    domain: String,
    /// Luminance of linear 1.0 in cd/m^2, for PU21.
    #[arg(long, default_value_t = 100.0)]
    luminance_scale: f64,
    /// JSON report; stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    /// JSON scene description; flags below override it.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Monte Carlo samples per plane pixel [default: 1024].
    #[arg(long)]
    samples: Option<usize>,
    /// Render width [default: 256].
    #[arg(long)]
    width: Option<usize>,
    /// Render height [default: 256].
    #[arg(long)]
    height: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Vertical field of view of the environment image, degrees.
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
}

#[derive(Args)]
struct RelightArgs {
    /// Environment image (`.hdr` or `.pfm`).
    #[arg(long)]
    env: PathBuf,
    /// Ground-truth environment; enables the report.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, requires = "gt")]
    report: Option<PathBuf>,
    #[command(flatten)]
    scene: SceneArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Image directory; frame paths in the pose file resolve against it.
    #[arg(long)]
    images: PathBuf,
    /// NeRF-style transforms.json.
    #[arg(long)]
    poses: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON fit settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// [default: 2000]
    #[arg(long)]
    iterations: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    sh_degree: usize,
    /// PLY whose gaussian means seed the fit.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Random seeds drawn in `--bounds` when `--init` is absent.
    #[arg(long, default_value_t = 2000)]
    random_points: usize,
    /// Half-width of the cube around the origin for random seeds.
    #[arg(long, default_value_t = 1.0)]
    bounds: f64,
    #[arg(long, default_value_t = 0.1)]
    init_opacity: f64,
}

#[derive(Args)]
struct BakeArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Query point `x,y,z`.
    #[arg(long, value_parser = parse_point)]
    at: [f64; 3],
    #[arg(long)]
    out: PathBuf,
    /// Panorama width; height is half.
    #[arg(long, default_value_t = 256)]
    width: usize,
}

#[derive(Args)]
struct EmitterArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    /// Directions sampled per gaussian.
    #[arg(long, default_value_t = 64)]
    directions: usize,
    /// JSON report; stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory of `.hdr`/`.pfm` panoramas.
    #[arg(long)]
    panoramas: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    crops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config (JSON).
    #[arg(long, required_unless_present = "print_default_config")]
    config: Option<PathBuf>,
    /// Print the default config and exit.
    #[arg(long)]
    print_default_config: bool,
}

#[derive(Subcommand)]
enum PredictorCmd {
    /// Answers with the input image unchanged.
    Echo,
    /// Re-exposes a known linear image, inferring the input's exposure from its pixels.
    Oracle {
        #[arg(long)]
        gt: PathBuf,
    },
}

fn parse_point(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma-separated numbers".to_string())
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: Some(p.into()), source: e }),
        None => Ok(stdio::stdout().write_all(text.as_bytes())?),
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Io { path: Some(p.into()), source: e })
}

fn ev_name(ev: f64) -> String {
    format!("ev_{ev:+}.png")
}

fn cmd_expand(a: ExpandArgs) -> Result<()> {
    let i0 = io::read_display(&a.input, Transfer::Gamma22)?;
    let limits = ExpandLimits {
        max_steps_per_side: a.max_steps,
        step_ev: a.step_ev,
        tolerance_fraction: a.tolerance,
        ..ExpandLimits::default()
    };
    let ex = match &a.oracle_gt {
        Some(gt) => expand_stack(&i0, &mut OraclePredictor::new(io::read_linear(gt)?), &limits),
        None => expand_stack(&i0, &mut ExternalPredictor::new(a.predictor.clone())?.with_env_timeout(), &limits),
    }
    .map_err(|e| {
        log::error!("{e}");
        Error::Predictor(e.source)
    })?;
    ensure_dir(&a.out_dir)?;
    let mut entries = Vec::new();
    for e in ex.stack.entries() {
        let file = ev_name(e.ev.0);
        io::write_display(&e.image, a.out_dir.join(&file), BitDepth::Sixteen)?;
        entries.push(StackFile { file, ev: e.ev.0 });
    }
    let index = StackIndex {
        step_ev: a.step_ev,
        entries,
        darker_steps: ex.darker_steps,
        brighter_steps: ex.brighter_steps,
        truncated_darker: ex.truncated_darker,
        truncated_brighter: ex.truncated_brighter,
    };
    if ex.truncated() {
        log::warn!("expansion hit --max-steps {} while still saturated", a.max_steps);
    }
    emit_json(&index, Some(&a.out_dir.join("stack.json")))
}

fn cmd_merge(a: MergeArgs) -> Result<()> {
    let path = a.stack.join("stack.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: Some(path), source: e })?;
    let index: StackIndex = serde_json::from_str(&text)?;
    let entries = index
        .entries
        .iter()
        .map(|f| {
            Ok(StackEntry {
                image: io::read_display(a.stack.join(&f.file), Transfer::Gamma22)?,
                ev: ExposureValue(f.ev),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stack = ExposureStack::new(entries, index.step_ev)?;
    let hdr = merge(&stack, &WeightProfile { lo: a.band_lo, hi: a.band_hi })?;
    io::write_linear(&hdr, &a.out)
}

#[derive(Serialize)]
struct AuditEntry {
    path: PathBuf,
    #[serde(flatten)]
    verdict: gaslight::merge::AuditVerdict,
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let cfg = AuditConfig {
        peak_fraction: a.peak_fraction,
        min_pixels: a.min_pixels,
    };
    let mut out = Vec::new();
    for p in &a.input {
        let verdict = audit_hdr(&io::read_linear(p)?, &cfg);
        out.push(AuditEntry { path: p.clone(), verdict });
    }
    emit_json(&out, a.report.as_deref())
}

fn parse_domain(s: &str) -> Result<Domain> {
    match s.to_ascii_lowercase().as_str() {
        "display" => Ok(Domain::Display),
        "linear" => Ok(Domain::Linear),
        other => Err(Error::InvalidInput(format!("unknown domain {other:?}"))),
    }
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let opts = CompareOptions {
        align: a.align,
        domain: parse_domain(&a.domain)?,
        luminance_scale: a.luminance_scale,
    };
    let report = compare(&io::read_linear(&a.pred)?, &io::read_linear(&a.gt)?, &opts)?;
    emit_json(&report, a.report.as_deref())
}

fn scene_from(a: &SceneArgs) -> Result<SceneSpec> {
    let mut s = match &a.scene {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: Some(p.clone()), source: e })?;
            serde_json::from_str(&text)?
        }
        None => SceneSpec::default(),
    };
    if let Some(v) = a.samples {
        s.samples = v;
    }
    if let Some(v) = a.width {
        s.width = v;
    }
    if let Some(v) = a.height {
        s.height = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    Ok(s)
}

fn cmd_relight(a: RelightArgs) -> Result<()> {
    let scene = scene_from(&a.scene)?;
    let env = io::read_linear(&a.env)?;
    let fov = a.scene.fov.to_radians();
    match &a.gt {
        Some(gt) => {
            let template = PartialIbl::new(LinearImage::zeros(1, 1)).with_view(Vec3::Z, Vec3::Y, fov);
            let (report, rp, _) = evaluate_pair(&env, &io::read_linear(gt)?, &scene, &template, &CompareOptions::default())?;
            io::write_linear(&rp, &a.out)?;
            emit_json(&report, a.report.as_deref())
        }
        None => {
            let ibl = PartialIbl::new(env).with_view(Vec3::Z, Vec3::Y, fov);
            io::write_linear(&render(&scene, &ibl)?, &a.out)
        }
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: Some(p.clone()), source: e })?;
            serde_json::from_str::<FitConfig>(&text)?
        }
        None => FitConfig::default(),
    };
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let views = load_views(&a.poses, Some(&a.images))?;
    let points: Vec<Vec3> = match &a.init {
        Some(p) => {
            let s = read_ply(p)?;
            (0..s.len()).map(|i| s.position(i)).collect()
        }
        None => random_points(a.random_points, Vec3::new(-a.bounds, -a.bounds, -a.bounds), Vec3::new(a.bounds, a.bounds, a.bounds), cfg.seed),
    };
    let init = init_from_points(&points, None, a.sh_degree, a.init_opacity)?;
    let result = fit(&views, init, &cfg)?;
    log::info!("final loss {:?}", result.final_loss);
    write_ply(&result.scene, &a.out)
}

fn cmd_bake(a: BakeArgs) -> Result<()> {
    let scene = read_ply(&a.scene)?;
    io::write_linear(&bake_envmap(&scene, Vec3::from_array(a.at), a.width)?, &a.out)
}

fn cmd_emitters(a: EmitterArgs) -> Result<()> {
    let scene = read_ply(&a.scene)?;
    emit_json(&classify_emitters(&scene, a.threshold, a.directions), a.report.as_deref())
}

fn cmd_dataset(a: DatasetArgs) -> Result<()> {
    let cfg = DatasetConfig {
        crops_per_panorama: a.crops,
        seed: a.seed,
        width: a.width,
        height: a.height,
    };
    let recs = make_dataset(&a.panoramas, &a.out, &cfg)?;
    log::info!("wrote {} crops", recs.len());
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    if a.print_default_config {
        return emit_json(&PipelineConfig::default(), None);
    }
    let path = a.config.expect("clap enforces --config");
    let cfg = PipelineConfig::load(&path)?;
    let outcome = run_pipeline(&cfg)?;
    log::info!(
        "pipeline finished in {} ({} stages reused)",
        outcome.output_dir.display(),
        outcome.reused.len()
    );
    Ok(())
}

fn cmd_predictor(c: PredictorCmd) -> Result<()> {
    let stdin = stdio::stdin().lock();
    let stdout = BufWriter::new(stdio::stdout().lock());
    match c {
        PredictorCmd::Echo => protocol::serve_one(stdin, stdout, Transfer::Gamma22, |r| Ok(r.image.clone()))?,
        PredictorCmd::Oracle { gt } => {
            let gt = io::read_linear(gt)?;
            protocol::serve_one(stdin, stdout, Transfer::Gamma22, |r| {
                let ev = infer_ev(&gt, &r.image, r.header.step_ev)?;
                Ok(oracle_predict(&gt, ev, r.header.direction, r.header.step_ev))
            })?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.cmd {
        Cmd::Expand(a) => cmd_expand(a),
        Cmd::Merge(a) => cmd_merge(a),
        Cmd::Audit(a) => cmd_audit(a),
        Cmd::Metrics(a) => cmd_metrics(a),
        Cmd::Relight(a) => cmd_relight(a),
        Cmd::FitGs(a) => cmd_fit(a),
        Cmd::Bake(a) => cmd_bake(a),
        Cmd::Emitters(a) => cmd_emitters(a),
        Cmd::MakeDataset(a) => cmd_dataset(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Predictor(c) => cmd_predictor(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
