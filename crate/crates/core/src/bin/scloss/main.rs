//! `scloss` command-line tool.
//!
//! Exit codes: 0 success, 1 check failed, 2 I/O or input error,
//! 3 configuration error, 4 numerical divergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use scloss::golden::{GoldenVector, SELF_CHECK_TOLERANCE};
use scloss::grad::{DEFAULT_FD_STEP, DEFAULT_TOLERANCE};
use scloss::imageio::{self, Scale};
use scloss::metrics;
use scloss::sim::{self, Baseline, BoundaryFirstCriteria, SceneSpec, SimConfig, Verdict};
use scloss::{
    grad_check, image_loss, single_response_map, Error, GridDims, LabelMap, LossConfig,
    ProbabilityMap, Reduction, Regularizer, SingleResponse,
};

#[derive(Parser)]
#[command(name = "scloss", version, about = "Spatial coherence loss toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the loss of a prediction against ground truth.
    Eval(EvalArgs),
    /// Write single-response, coherence-loss and attention maps side by side.
    Compare(CompareArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Run logit-field descent on a synthetic scene.
    Simulate(SimulateArgs),
    /// Saliency metrics: MAE, adaptive and max F-measure.
    Metrics(PairArgs),
    /// Export or verify golden vectors.
    Golden(GoldenArgs),
}

#[derive(Args, Clone, Default)]
struct LossArgs {
    /// TOML loss configuration; missing fields take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of adjacency levels (resets level weights to 1, 1/2, ...).
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// bce | mse | l1 | cross_entropy
    #[arg(long)]
    single_response: Option<SingleResponse>,
    /// gaussian | distance | constant
    #[arg(long)]
    regularizer: Option<Regularizer>,
    /// mean | sum
    #[arg(long)]
    reduction: Option<Reduction>,
}

impl LossArgs {
    fn resolve(&self, base: LossConfig) -> scloss::Result<LossConfig> {
        let mut cfg = match &self.config {
            Some(path) => LossConfig::from_toml_file(path)?,
            None => base,
        };
        if let Some(k) = self.k_max {
            cfg.k_max = k;
            cfg.level_weights = scloss::config::halving_weights(k);
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(s) = self.single_response {
            cfg.single_response = s;
        }
        if let Some(r) = self.regularizer {
            cfg.regularizer = r;
        }
        if let Some(r) = self.reduction {
            cfg.reduction = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PairArgs {
    /// Prediction: grayscale PGM/PNG (value / maxval) or raw SCF1 (.scf).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mask (PGM/PNG).
    #[arg(long)]
    gt: PathBuf,
    /// Binarise ground truth at `value > t * maxval` instead of the midpoint.
    #[arg(long, value_name = "T")]
    soft_gt_threshold: Option<f64>,
    /// Reject ground truth with values other than 0 and maxval.
    #[arg(long)]
    strict_gt: bool,
}

impl PairArgs {
    fn load(&self) -> scloss::Result<(ProbabilityMap, LabelMap)> {
        if let Some(t) = self.soft_gt_threshold {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!(
                    "--soft-gt-threshold must lie in [0, 1), got {t}"
                )));
            }
        }
        let pred = imageio::read_probability_map(&self.pred)?;
        let gt = imageio::read_label_map(&self.gt, self.soft_gt_threshold, self.strict_gt)?;
        if pred.dims() != gt.dims() {
            return Err(Error::DimensionMismatch {
                left: pred.dims(),
                right: gt.dims(),
            });
        }
        Ok((pred, gt))
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    loss: LossArgs,
    /// Write the per-pixel loss map here.
    #[arg(long)]
    loss_map: Option<PathBuf>,
    /// Write the weight attention map here.
    #[arg(long)]
    attention_map: Option<PathBuf>,
    /// Write maps as raw SCF1 instead of normalised 8-bit images.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long)]
    out_dir: PathBuf,
    /// Write maps as raw SCF1 (.scf) instead of normalised PGM.
    #[arg(long)]
    raw: bool,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad size `{s}`: {e}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// HxW or N for a square grid.
    #[arg(long, default_value = "8x8", value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    step: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[command(flatten)]
    loss: LossArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene TOML; the built-in 64x64 phantom when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    snapshot_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// scloss | single_response_only
    #[arg(long, default_value_t = Baseline::Scloss)]
    baseline: Baseline,
    /// Difficulty at or above which a pixel belongs to the hard region.
    #[arg(long, default_value_t = 0.5)]
    hard_threshold: f64,
    /// A pixel counts as learned once |p - label| < 1 - level.
    #[arg(long, default_value_t = sim::LEARNED_LEVEL)]
    learned_level: f64,
    /// Treat an inconclusive boundary-first check as a failure.
    #[arg(long)]
    strict: bool,
    /// Loss options; without --config the reduction defaults to sum.
    #[command(flatten)]
    loss: LossArgs,
}

#[derive(Args)]
struct GoldenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "8x8", value_parser = parse_size)]
    size: (usize, usize),
    /// Output file (or directory with --combinations).
    #[arg(long, required_unless_present = "verify")]
    out: Option<PathBuf>,
    /// Write one vector per single-response x regulariser combination into --out.
    #[arg(long)]
    combinations: bool,
    /// Verify an existing golden vector instead of writing one.
    #[arg(long, conflicts_with_all = ["out", "combinations"])]
    verify: Option<PathBuf>,
    #[command(flatten)]
    loss: LossArgs,
}

enum Failure {
    Check(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidEpsilon(_) | Error::InvalidLevel(_) => 3,
        Error::Divergence { .. } => 4,
        _ => 2,
    }
}

fn print_json<T: Serialize>(value: &T) {
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn write_text(path: &Path, text: &str) -> scloss::Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> scloss::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn eval(args: EvalArgs) -> Outcome {
    let cfg = args.loss.resolve(LossConfig::default())?;
    let (pred, gt) = args.pair.load()?;
    let b = image_loss(&pred, &gt, &cfg)?;
    if let Some(path) = &args.loss_map {
        imageio::write_field(path, &b.loss_map, args.raw)?;
    }
    if let Some(path) = &args.attention_map {
        imageio::write_field(path, &b.attention_map, args.raw)?;
    }
    print_json(&json!({
        "total": b.total,
        "per_level_totals": b.per_level_totals,
        "reduction": b.reduction,
        "config": cfg,
    }));
    Ok(())
}

fn compare(args: CompareArgs) -> Outcome {
    let cfg = args.loss.resolve(LossConfig::default())?;
    let (pred, gt) = args.pair.load()?;
    let b = image_loss(&pred, &gt, &cfg)?;
    let single = single_response_map(&pred, &gt, &cfg)?;
    create_dir(&args.out_dir)?;
    let ext = if args.raw { "scf" } else { "pgm" };
    let mut scales = serde_json::Map::new();
    for (name, field) in [
        ("bce_map", &single),
        ("scloss_map", &b.loss_map),
        ("attention_map", &b.attention_map),
    ] {
        let scale: Scale = imageio::write_field(&args.out_dir.join(format!("{name}.{ext}")), field, args.raw)?;
        scales.insert(
            name.to_string(),
            json!({ "min": scale.min, "max": scale.max, "mean": field.mean() }),
        );
    }
    let sidecar = json!({
        "dims": pred.dims().to_string(),
        "total": b.total,
        "raw": args.raw,
        "maps": scales,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("serialisable") + "\n";
    write_text(&args.out_dir.join("compare.json"), &text)?;
    print_json(&sidecar);
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Outcome {
    let cfg = args.loss.resolve(LossConfig::default())?;
    let dims = GridDims::new(args.size.0, args.size.1)?;
    if dims.len() < 2 {
        return Err(Error::DegenerateGeometry(format!("a {dims} grid has no adjacent pixel pairs")).into());
    }
    let report = grad_check(args.seed, dims, &cfg, args.trials, args.step, args.tol)?;
    print_json(&report);
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "max relative error {:.3e} exceeds tolerance {:.3e}",
            report.max_rel_error, report.tolerance
        )))
    }
}

fn simulate(args: SimulateArgs) -> Outcome {
    let spec = match &args.scene {
        Some(path) => SceneSpec::from_toml_file(path)?,
        None => SceneSpec::canonical_phantom(),
    };
    let scene = sim::build_scene(&spec)?;
    let loss = args.loss.resolve(SimConfig::default().loss)?;
    let cfg = SimConfig {
        steps: args.steps,
        learning_rate: args.lr,
        snapshot_every: args.snapshot_every,
        seed: args.seed,
        loss,
        baseline: args.baseline,
        hard_threshold: args.hard_threshold,
    };
    let criteria = BoundaryFirstCriteria {
        learned_level: args.learned_level,
        ..BoundaryFirstCriteria::default()
    };
    if !sim::TRACKED_LEVELS.contains(&criteria.learned_level) {
        return Err(Error::InvalidConfig(format!(
            "--learned-level must be one of {:?}",
            sim::TRACKED_LEVELS
        ))
        .into());
    }
    let traj = sim::run_descent(&scene, &cfg)?;
    let scale = sim::write_trajectory(&traj, &args.out_dir)?;
    let report = if traj.snapshots.len() >= 3 {
        Some(sim::assert_boundary_first(&traj, criteria)?)
    } else {
        None
    };
    let verdict = report.as_ref().map_or(Verdict::Inconclusive, |r| r.verdict);
    let doc = json!({
        "boundary_first": verdict == Verdict::Holds,
        "verdict": verdict,
        "report": report,
        "summary": traj.summary,
        "snapshots": traj.snapshots.len(),
        "attention_scale": scale,
        "config": cfg,
        "scene": spec,
    });
    let text = serde_json::to_string_pretty(&doc).expect("serialisable") + "\n";
    write_text(&args.out_dir.join("report.json"), &text)?;
    print_json(&doc);
    match verdict {
        Verdict::Holds => Ok(()),
        Verdict::Inconclusive if !args.strict => Ok(()),
        v => Err(Failure::Check(format!("boundary-first check {v}"))),
    }
}

fn metrics_cmd(args: PairArgs) -> Outcome {
    let (pred, gt) = args.load()?;
    let r = metrics::evaluate(&pred, &gt)?;
    print_json(&json!({
        "mae": r.mae,
        "f_adp": r.f_adp,
        "f_max": r.f_max,
        "adaptive_threshold": r.adaptive_threshold,
    }));
    Ok(())
}

fn golden(args: GoldenArgs) -> Outcome {
    if let Some(path) = &args.verify {
        let g = GoldenVector::read(path)?;
        let check = g.verify(SELF_CHECK_TOLERANCE)?;
        print_json(&check);
        return if check.pass {
            Ok(())
        } else {
            Err(Failure::Check(format!("{} does not reproduce", path.display())))
        };
    }
    let out = args.out.expect("required by clap");
    let dims = GridDims::new(args.size.0, args.size.1)?;
    let base = args.loss.resolve(LossConfig::default())?;
    if !args.combinations {
        GoldenVector::generate(args.seed, dims, &base)?.write(&out)?;
        return Ok(());
    }
    create_dir(&out)?;
    for s in SingleResponse::BINARY {
        for r in Regularizer::ALL {
            let cfg = LossConfig {
                single_response: s,
                regularizer: r,
                ..base.clone()
            };
            let path = out.join(format!("golden_{s}_{r}.json"));
            GoldenVector::generate(args.seed, dims, &cfg)?.write(&path)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Simulate(a) => simulate(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Golden(a) => golden(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("scloss: check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("scloss: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
