//! Acceptance suite. One line per criterion; exits non-zero if any fails.
//!
//! Run alone with `cargo test -p scloss --test acceptance`.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use scloss::config::{LossConfig, Regularizer, SingleResponse};
use scloss::kernels::{mutual_response, pairwise_regularizer, single_response};
use scloss::metrics;
use scloss::sim::{self, BoundaryFirstCriteria, SceneSpec, SimConfig, Verdict};
use scloss::{grad_check, image_loss, single_response_map, GridDims, LabelMap, ProbabilityMap};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const CLOSED_FORM: f64 = 0.4802196;
const CLOSED_FORM_TOL: f64 = 1e-6;

fn closed_form() -> Check {
    let d = GridDims::new(8, 8).unwrap();
    let b = image_loss(
        &ProbabilityMap::uniform(d, 0.5).unwrap(),
        &LabelMap::filled(d, 1).unwrap(),
        &LossConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure((b.total - CLOSED_FORM).abs() <= CLOSED_FORM_TOL, || {
        format!("total {} vs {CLOSED_FORM}", b.total)
    })?;
    ensure(rel(b.total, uniform_total()) < 1e-14, || {
        format!("total {} vs oracle {}", b.total, uniform_total())
    })?;
    Ok(format!("total = {:.10} (oracle {:.10})", b.total, uniform_total()))
}

const GRAD_TRIALS: usize = 100;
const GRAD_STEP: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-4;

fn gradient_parity() -> Check {
    let dims = GridDims::new(8, 8).unwrap();
    let mut worst = (0.0, String::new());
    let mut compared = 0;
    let mut failed = Vec::new();
    for (s, r) in combinations() {
        for k in 1..=3 {
            let cfg = LossConfig {
                single_response: s,
                regularizer: r,
                ..LossConfig::with_levels(k)
            };
            let seed = 1000 + k as u64;
            let rep = grad_check(seed, dims, &cfg, GRAD_TRIALS, GRAD_STEP, GRAD_TOL).map_err(|e| e.to_string())?;
            compared += rep.pixels_compared;
            if rep.max_rel_error >= worst.0 || rep.max_rel_error.is_nan() {
                worst = (rep.max_rel_error, format!("{s}/{r}/K={k}"));
            }
            if !rep.pass {
                failed.push(format!("{s}/{r}/K={k} {:.2e}", rep.max_rel_error));
            }
        }
    }
    ensure(failed.is_empty(), || format!("{} of 27 configs over {GRAD_TOL:e}: {}", failed.len(), failed.join(", ")))?;
    Ok(format!("27 configs x {GRAD_TRIALS} trials, {compared} pixels, max rel error {:.2e} ({})", worst.0, worst.1))
}

fn oracle_equivalence() -> Check {
    let mut rng = SplitMix(0x5eed);
    let combos = combinations();
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let (s, r) = combos[t % combos.len()];
        let cfg = LossConfig {
            single_response: s,
            regularizer: r,
            alpha: 0.5 + (t as f64) * 0.1,
            ..LossConfig::with_levels(1 + t % 3)
        };
        let (pred, labels) = rng.instance(16, 16);
        let dims = GridDims::new(16, 16).unwrap();
        let got = image_loss(
            &ProbabilityMap::new(dims, pred.clone()).unwrap(),
            &LabelMap::binary(dims, labels.clone()).unwrap(),
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        let (total, map) = naive_image_loss(&pred, &labels, 16, 16, &cfg);
        let e = map
            .iter()
            .zip(got.loss_map.values())
            .map(|(&a, &b)| rel(a, b))
            .fold(rel(total, got.total), f64::max);
        worst = worst.max(e);
        ensure(e <= 1e-12, || format!("instance {t} ({s}/{r}): rel error {e:.3e}"))?;
    }
    Ok(format!("20 instances of 16x16, max rel error {worst:.2e}"))
}

fn boundary_emphasis() -> Check {
    let (pred, labels, masks) = hard_square_phantom();
    let cfg = LossConfig::default();
    let b = image_loss(&pred, &labels, &cfg).map_err(|e| e.to_string())?;
    let bce = single_response_map(&pred, &labels, &cfg).map_err(|e| e.to_string())?;
    let att_b = masked_mean(b.attention_map.values(), &masks.boundary);
    let att_c = masked_mean(b.attention_map.values(), &masks.core);
    let bce_b = masked_mean(bce.values(), &masks.boundary);
    let bce_c = masked_mean(bce.values(), &masks.core);
    ensure(att_b > att_c, || format!("attention boundary {att_b} <= core {att_c}"))?;
    // Both regions hold the same constant; the two means differ only by summation order.
    let slack = 4.0 * f64::EPSILON * bce_b.abs();
    ensure(bce_c >= bce_b - slack, || format!("BCE core {bce_c} < boundary {bce_b}"))?;
    Ok(format!("attention boundary {att_b:.4} > core {att_c:.4}; BCE core {bce_c:.4} >= boundary {bce_b:.4}"))
}

fn boundary_first() -> Check {
    let scene = sim::build_scene(&SceneSpec::canonical_phantom()).map_err(|e| e.to_string())?;
    let cfg = SimConfig {
        steps: 2000,
        snapshot_every: 100,
        ..SimConfig::default()
    };
    let traj = sim::run_descent(&scene, &cfg).map_err(|e| e.to_string())?;
    let rep = sim::assert_boundary_first(&traj, BoundaryFirstCriteria::default()).map_err(|e| e.to_string())?;
    ensure(rep.verdict == Verdict::Holds, || format!("{}: {}", rep.verdict, rep.reason))?;
    Ok(format!(
        "{} mid-training snapshots, min attention ratio {:.3}, median crossing {} <= {}",
        rep.mid_training_steps.len(),
        rep.min_attention_ratio.unwrap_or(f64::NAN),
        rep.boundary_median_crossing.unwrap_or(f64::NAN),
        rep.core_median_crossing.unwrap_or(f64::NAN)
    ))
}

const FUZZ_INPUTS: usize = 10_000;

fn positivity() -> Check {
    let mut rng = SplitMix(0xf00d);
    let eps = LossConfig::default().epsilon;
    let extreme = [0.0, eps, 1e-12, 0.5, 1.0 - 1e-12, 1.0 - eps, 1.0];
    let draw = |rng: &mut SplitMix| {
        let raw = if rng.next_u64() % 4 == 0 {
            extreme[(rng.next_u64() % extreme.len() as u64) as usize]
        } else {
            rng.unit()
        };
        raw.clamp(eps, 1.0 - eps)
    };
    let mut min_margin = f64::INFINITY;
    for _ in 0..FUZZ_INPUTS {
        let (pi, pj) = (draw(&mut rng), draw(&mut rng));
        let (ni, nj) = ((rng.next_u64() & 1) as u32, (rng.next_u64() & 1) as u32);
        let alpha = 0.01 + 10.0 * rng.unit();
        let mutual = mutual_response(pi, pj, ni * nj).map_err(|e| e.to_string())?;
        let gauss = pairwise_regularizer(Regularizer::Gaussian, pi, pj).map_err(|e| e.to_string())?;
        let d = mutual + alpha * gauss;
        let floor = alpha * (-1.0f64).exp();
        ensure(d.is_finite() && d >= floor, || format!("denominator {d} < {floor} at ({pi}, {pj})"))?;
        min_margin = min_margin.min(d - floor);
        for s in SingleResponse::BINARY {
            let v = single_response(s, pi, ni).map_err(|e| e.to_string())?;
            ensure(v.is_finite() && v >= 0.0, || format!("{s}({pi}, {ni}) = {v}"))?;
            for r in Regularizer::ALL {
                let f = pairwise_regularizer(r, pi, pj).map_err(|e| e.to_string())?;
                let term = v / (mutual + alpha * f);
                ensure(term.is_finite() && term >= 0.0, || format!("{s}/{r} pair term {term}"))?;
            }
        }
    }
    // Whole images built from the same extremes, unclamped.
    let dims = GridDims::new(8, 8).unwrap();
    for t in 0..FUZZ_INPUTS / 64 {
        let p: Vec<f64> = (0..64)
            .map(|_| if rng.next_u64() % 3 == 0 { extreme[(rng.next_u64() % 7) as usize] } else { rng.unit() })
            .collect();
        let l: Vec<u32> = (0..64).map(|_| (rng.next_u64() & 1) as u32).collect();
        let (s, r) = combinations()[t % 9];
        let cfg = LossConfig { single_response: s, regularizer: r, ..LossConfig::default() };
        let b = image_loss(
            &ProbabilityMap::new(dims, p).unwrap(),
            &LabelMap::binary(dims, l).unwrap(),
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        ensure(b.total.is_finite() && b.total >= 0.0, || format!("image total {}", b.total))?;
        ensure(b.loss_map.values().iter().all(|v| v.is_finite() && *v >= 0.0), || "negative or non-finite loss map".into())?;
    }
    Ok(format!("{FUZZ_INPUTS} pairs x 9 combinations + {} images; min denominator margin {min_margin:.3e}", FUZZ_INPUTS / 64))
}

fn monotonicity() -> Check {
    let eps = LossConfig::default().epsilon;
    let grid: Vec<f64> = (0..1000).map(|i| eps + (1.0 - 2.0 * eps) * i as f64 / 999.0).collect();
    let alpha = LossConfig::default().alpha;
    for r in [Regularizer::Gaussian, Regularizer::Constant] {
        for pi in [eps, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0 - eps] {
            let mut prev = f64::NEG_INFINITY;
            for &pj in &grid {
                let d = mutual_response(pi, pj, 1).unwrap() + alpha * pairwise_regularizer(r, pi, pj).unwrap();
                let weight = 1.0 / d;
                ensure(weight > prev, || format!("{r}: weight not increasing at p_i={pi}, p_j={pj}"))?;
                prev = weight;
            }
        }
    }
    Ok("1/denominator strictly increasing in p_j over 1000 points (gaussian, constant; 7 values of p_i)".into())
}

fn metrics_criteria() -> Check {
    let d = GridDims::new(1, 4).unwrap();
    let pred = ProbabilityMap::new(d, vec![0.8, 0.6, 0.2, 0.0]).unwrap();
    let gt = LabelMap::binary(d, vec![1, 1, 0, 0]).unwrap();
    let r = metrics::evaluate(&pred, &gt).map_err(|e| e.to_string())?;
    ensure((r.f_adp - 0.8125).abs() < 1e-12, || format!("f_adp {}", r.f_adp))?;
    ensure(r.f_max == 1.0, || format!("f_max {}", r.f_max))?;

    let mut rng = SplitMix(0xabc);
    for t in 0..100 {
        let (h, w) = (1 + (t % 7), 1 + (t % 5) * 3);
        let (p, l) = rng.instance(h, w);
        let dims = GridDims::new(h, w).unwrap();
        let r = metrics::evaluate(&ProbabilityMap::new(dims, p).unwrap(), &LabelMap::binary(dims, l).unwrap())
            .map_err(|e| e.to_string())?;
        ensure(r.f_max >= r.f_adp, || format!("instance {t}: f_max {} < f_adp {}", r.f_max, r.f_adp))?;
    }

    let d = GridDims::new(4, 4).unwrap();
    let gt_values: Vec<u32> = (0..16).map(|i| (i % 3 == 0) as u32).collect();
    let gt = LabelMap::binary(d, gt_values.clone()).unwrap();
    let same = ProbabilityMap::new(d, gt_values.iter().map(|&v| v as f64).collect()).unwrap();
    let inv = ProbabilityMap::new(d, gt_values.iter().map(|&v| 1.0 - v as f64).collect()).unwrap();
    let half = ProbabilityMap::uniform(d, 0.5).unwrap();
    let maes = [
        metrics::mae(&same, &gt).unwrap(),
        metrics::mae(&half, &gt).unwrap(),
        metrics::mae(&inv, &gt).unwrap(),
    ];
    ensure(maes == [0.0, 0.5, 1.0], || format!("mae identities {maes:?}"))?;
    Ok("worked example 0.8125 / 1.0; f_max >= f_adp on 100 instances; mae 0 / 0.5 / 1.0 exact".into())
}

fn run_cli(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scloss"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("scloss {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    run_cli(&["golden", "--seed", "42", "--size", "8x8", "--out", &p("a.json")])?;
    run_cli(&["golden", "--seed", "42", "--size", "8x8", "--out", &p("b.json")])?;
    let a = std::fs::read(p("a.json")).map_err(|e| e.to_string())?;
    let b = std::fs::read(p("b.json")).map_err(|e| e.to_string())?;
    ensure(a == b, || "golden outputs differ".into())?;

    let sim_args = |out: &str| {
        vec!["simulate".to_string(), "--steps".into(), "400".into(), "--snapshot-every".into(), "50".into(), "--out-dir".into(), out.to_string()]
    };
    for out in ["s1", "s2"] {
        let args = sim_args(&p(out));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run_cli(&refs)?;
    }
    let c1 = std::fs::read(dir.path().join("s1/trajectory.csv")).map_err(|e| e.to_string())?;
    let c2 = std::fs::read(dir.path().join("s2/trajectory.csv")).map_err(|e| e.to_string())?;
    ensure(c1 == c2, || "simulator CSV logs differ".into())?;
    Ok(format!("golden {} bytes identical; CSV logs {} bytes identical", a.len(), c1.len()))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "closed-form loss value", budget: Duration::from_secs(1), run: closed_form },
        Criterion { name: "gradient parity", budget: Duration::from_secs(30), run: gradient_parity },
        Criterion { name: "oracle equivalence", budget: Duration::from_secs(10), run: oracle_equivalence },
        Criterion { name: "boundary emphasis", budget: Duration::from_secs(1), run: boundary_emphasis },
        Criterion { name: "boundary-first dynamics", budget: Duration::from_secs(120), run: boundary_first },
        Criterion { name: "positivity and finiteness", budget: Duration::from_secs(10), run: positivity },
        Criterion { name: "weight monotonicity", budget: Duration::from_secs(1), run: monotonicity },
        Criterion { name: "metrics", budget: Duration::from_secs(5), run: metrics_criteria },
        Criterion { name: "determinism", budget: Duration::from_secs(30), run: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let line = match result {
            Ok(detail) if elapsed <= c.budget => format!("PASS  {:<26} {detail} [{elapsed:.2?}]", c.name),
            Ok(detail) => {
                failed += 1;
                format!("FAIL  {:<26} over budget {elapsed:.2?} > {:?}: {detail}", c.name, c.budget)
            }
            Err(why) => {
                failed += 1;
                format!("FAIL  {:<26} {why} [{elapsed:.2?}]", c.name)
            }
        };
        println!("{line}");
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
