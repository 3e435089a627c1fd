//! Experiment runners behind the command line. Each one composes library
//! calls into CSV rows plus a summary document, deterministically in
//! (config, seed): replicate j always runs on sub-seed mix(seed, j), and
//! parallel results are collected in replicate order, so the thread count
//! never changes a byte of output.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use entirelab::dist::{CoefficientStream, DistSpec};
use entirelab::growth::{self, BoundTable, GrowthCurve, MeanOrder, ReferenceRate};
use entirelab::hypercyclicity::{
    self, CoefficientEnvelope, EventKind, JointPrediction, TraceOptions,
};
use entirelab::math::seed_mix;
use entirelab::radius;
use entirelab::series::{EvalOptions, SeriesHandle};
use entirelab::Error;

use crate::config::{ExperimentConfig, ExperimentKind, FamilyKind};

/// Divergence-test factor: crossings of log|X_n| > n log(M n) with M = 1.
const M_FACTOR: f64 = 1.0;
/// Truncation cut for envelope tail sums and products.
const TAIL_CUT: f64 = 1e-9;
/// Search ceiling for the sup-norm exceedance constant.
const C_MAX: f64 = 3.0;
/// Closed-form joints below this many expected Monte Carlo hits are
/// reported but not scored; the sample cannot resolve them.
const MIN_EXPECTED_HITS: f64 = 25.0;

pub enum RunError {
    /// Bad or semantically inapplicable configuration; exit code 2.
    Config(String),
    /// Numerical failure during the run; exit code 3.
    Numeric(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::BadParameter { .. }
            | Error::BadGrid { .. }
            | Error::BadRadiusGrid { .. }
            | Error::SubGaussianRequired { .. }
            | Error::NonSummableTail { .. }
            | Error::SlowTailDecay { .. }
            | Error::RadiusTooLarge { .. }
            | Error::NotEnough { .. } => RunError::Config(e.to_string()),
            other => RunError::Numeric(other.to_string()),
        }
    }
}

impl From<String> for RunError {
    fn from(msg: String) -> Self {
        RunError::Config(msg)
    }
}

pub struct RunOutput {
    pub pass: bool,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

pub struct Batch {
    pub header: &'static str,
    pub rows: Vec<Vec<String>>,
    pub stats: Value,
    pub flags: Value,
    pub pass: bool,
}

/// Full-precision decimal rendering; 17 significant digits round-trip
/// every f64, so reruns are byte-identical.
pub fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let started = Instant::now();
    let batch = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| RunError::Numeric(e.to_string()))?;
        pool.install(|| dispatch(cfg))?
    } else {
        dispatch(cfg)?
    };
    write_outputs(cfg, batch, started.elapsed().as_secs_f64())
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    match cfg.experiment {
        ExperimentKind::Density => density(cfg),
        ExperimentKind::Probabilities => probabilities(cfg),
        ExperimentKind::Variance => variance(cfg),
        ExperimentKind::Growth => growth_experiment(cfg),
        ExperimentKind::Moments => moments(cfg),
        ExperimentKind::Kahane => kahane(cfg),
        ExperimentKind::Radius => radius_experiment(cfg),
        ExperimentKind::Verify => {
            Err(RunError::Config("verify has its own entry point".to_string()))
        }
    }
}

/// Single-writer output step: runs only after the computation succeeded,
/// so failed runs leave no files behind.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    batch: Batch,
    runtime_seconds: f64,
) -> Result<RunOutput, RunError> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(io_err)?;

    let mut text = String::new();
    text.push_str(batch.header);
    text.push('\n');
    for row in &batch.rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let csv_path = dir.join(cfg.csv_name());
    fs::write(&csv_path, text).map_err(io_err)?;

    let summary = json!({
        "schema": 1,
        "experiment": cfg.experiment.name(),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "csv": cfg.csv_name(),
        "runtime_seconds": runtime_seconds,
        "stats": batch.stats,
        "flags": batch.flags,
        "pass": batch.pass,
    });
    let mut body = serde_json::to_string_pretty(&summary).expect("summary serializes");
    body.push('\n');
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, body).map_err(io_err)?;

    Ok(RunOutput {
        pass: batch.pass,
        csv_path,
        summary_path,
    })
}

fn io_err(e: std::io::Error) -> RunError {
    RunError::Numeric(format!("io: {e}"))
}

fn eval_options(cfg: &ExperimentConfig) -> EvalOptions {
    EvalOptions {
        tol: cfg.tol,
        ..EvalOptions::default()
    }
}

/// Derived coefficient-check depth, capped at 2000 past the envelope head.
/// Slowly decaying envelope tails (the heavy-tailed laws) would otherwise
/// derive depths near 10^6 per event; the cap trades that for an explicit
/// failure bound reported in the summary.
fn guarded_depth(dist: DistSpec, env: &CoefficientEnvelope) -> Result<(u64, f64), Error> {
    let (derived, bound) = hypercyclicity::default_check_depth(dist, env, 1e-6)?;
    let cap = env.head_len + 2000;
    if derived <= cap {
        Ok((derived, bound))
    } else {
        let bound = hypercyclicity::envelope_tail_sum(dist, env, cap + 1, TAIL_CUT)?;
        Ok((cap, bound))
    }
}

/// Indices 1, then x1.25 steps, always ending at n_max: enough to plot a
/// density trace without writing every shift.
fn thin_grid(n_max: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut n = 1u64;
    while n < n_max {
        grid.push(n);
        n = ((n as f64) * 1.25).ceil() as u64;
    }
    grid.push(n_max);
    grid
}

/// ~2.15x geometric steps from 100 (or n_max when smaller) to n_max.
fn geometric_grid(n_max: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = Vec::new();
    let mut x = 100.0f64.min(n_max as f64);
    loop {
        let n = x.round() as u64;
        if grid.last() != Some(&n) {
            grid.push(n);
        }
        if n >= n_max {
            break;
        }
        x = (x * 2.15).min(n_max as f64);
    }
    grid
}

/// Orbit density of the sup-norm approximation event, with the predicted
/// floor p*Q and the flag min_density >= floor/2 past the burn-in.
fn density(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    let dist = cfg.dist.to_spec()?;
    let target = cfg.target.to_spec()?;
    let opts = TraceOptions {
        grid: cfg.grid_m,
        eval: eval_options(cfg),
        ..TraceOptions::default()
    };
    let traces = (0..cfg.replicates)
        .into_par_iter()
        .map(|j| {
            let s = CoefficientStream::new(dist, seed_mix(cfg.seed, j))?;
            hypercyclicity::density_trace(s, &target, EventKind::SupNorm, cfg.n_max, &opts)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let env = CoefficientEnvelope::for_target(&target)?;
    let p = hypercyclicity::head_probability_mc(
        dist,
        &target,
        20_000,
        seed_mix(cfg.seed, u64::MAX / 2),
    )?;
    // Non-summable envelope tails make the event probability zero; the
    // floor claim is then vacuous rather than an error.
    let q = match hypercyclicity::envelope_product(dist, &env, env.head_len + 1, TAIL_CUT) {
        Ok(v) => v,
        Err(Error::NonSummableTail { .. }) | Err(Error::SlowTailDecay { .. }) => 0.0,
        Err(e) => return Err(e.into()),
    };
    let floor = 0.5 * p.value * q;
    let burn_in = cfg.n_max.min(1_000);
    let per_min: Vec<f64> = traces.iter().map(|t| t.min_density_from(burn_in)).collect();
    let min_density = per_min.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = min_density >= floor;

    let grid = thin_grid(cfg.n_max);
    let mut rows = Vec::with_capacity(traces.len() * grid.len());
    for (j, t) in traces.iter().enumerate() {
        for &n in &grid {
            rows.push(vec![j.to_string(), n.to_string(), fnum(t.density(n))]);
        }
    }

    Ok(Batch {
        header: "replicate,n,density",
        rows,
        stats: json!({
            "head_probability": p.value,
            "head_probability_se": p.std_error,
            "envelope_product": q,
            "floor": floor,
            "burn_in": burn_in,
            "min_density": min_density,
            "per_replicate_min": per_min,
        }),
        flags: json!({ "density_floor": pass }),
        pass,
    })
}

/// Closed-form joint event probabilities against Monte Carlo, across
/// shifts from just past the envelope head to five past the
/// factorization threshold.
fn probabilities(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    let dist = cfg.dist.to_spec()?;
    let target = cfg.target.to_spec()?;
    let env = CoefficientEnvelope::for_target(&target)?;
    let threshold = hypercyclicity::factorization_threshold(dist, &target, &env)?;
    let samples = cfg.replicates.max(10_000);
    let p = hypercyclicity::head_probability_mc(dist, &target, samples, seed_mix(cfg.seed, 1))?;
    let q_base = hypercyclicity::envelope_product(dist, &env, env.head_len + 1, TAIL_CUT)?;
    let (depth, failure_bound) = guarded_depth(dist, &env)?;

    let ds: Vec<u64> = (env.head_len + 1..=threshold + 5).collect();
    let per_d = ds
        .par_iter()
        .map(|&d| -> Result<_, Error> {
            let q_d = hypercyclicity::envelope_product(dist, &env, d, TAIL_CUT)?;
            let closed = match hypercyclicity::joint_prediction(p.value, q_base, q_d, d, threshold)? {
                JointPrediction::Closed(v) => Some(v),
                JointPrediction::MonteCarloRequired => None,
            };
            let mc = hypercyclicity::joint_coefficient_frequency(
                dist,
                &target,
                d,
                samples,
                seed_mix(cfg.seed, 1_000 + d),
                Some(depth),
            )?;
            Ok((d, q_d, closed, mc))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut rows = Vec::with_capacity(per_d.len());
    let mut all_pass = true;
    let mut scored = 0u64;
    let mut unresolved = 0u64;
    for (d, q_d, closed, mc) in &per_d {
        let (closed_text, row_pass) = match closed {
            Some(v) => {
                if v * (samples as f64) < MIN_EXPECTED_HITS {
                    unresolved += 1;
                    (fnum(*v), true)
                } else {
                    scored += 1;
                    // 1% slack on top of 4 standard errors: one law's
                    // stated tail is asymptotic, not exact
                    let ok = (mc.value - v).abs() <= 4.0 * mc.std_error + 0.01 * v;
                    if !ok {
                        all_pass = false;
                    }
                    (fnum(*v), ok)
                }
            }
            None => (String::new(), true),
        };
        rows.push(vec![
            d.to_string(),
            fnum(*q_d),
            closed_text,
            fnum(mc.value),
            fnum(mc.std_error),
            u8::from(row_pass).to_string(),
        ]);
    }

    Ok(Batch {
        header: "d,envelope_product,closed_form,mc_frequency,mc_std_error,pass",
        rows,
        stats: json!({
            "head_probability": p.value,
            "head_probability_se": p.std_error,
            "base_envelope_product": q_base,
            "factorization_threshold": threshold,
            "samples": samples,
            "check_depth": depth,
            "event_failure_bound": failure_bound,
            "scored": scored,
            "unresolved": unresolved,
        }),
        flags: json!({ "joint_agreement": all_pass }),
        pass: all_pass,
    })
}

/// Variance of the coefficient-event hit count across replicates, fitted
/// for sub-quadratic scaling in n.
fn variance(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    let dist = cfg.dist.to_spec()?;
    let target = cfg.target.to_spec()?;
    let env = CoefficientEnvelope::for_target(&target)?;
    let (depth, failure_bound) = guarded_depth(dist, &env)?;
    let opts = TraceOptions {
        grid: cfg.grid_m,
        eval: eval_options(cfg),
        check_depth: Some(depth),
        failure_target: 1e-6,
    };
    let replicates = cfg.replicates.max(100);
    let traces = (0..replicates)
        .into_par_iter()
        .map(|j| {
            let s = CoefficientStream::new(dist, seed_mix(cfg.seed, j))?;
            hypercyclicity::density_trace(s, &target, EventKind::Coefficient, cfg.n_max, &opts)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let n_grid = geometric_grid(cfg.n_max);
    let fit = hypercyclicity::variance_scaling(&traces, &n_grid)?;
    let rows = fit
        .points
        .iter()
        .map(|&(n, v)| vec![n.to_string(), fnum(v)])
        .collect();

    Ok(Batch {
        header: "n,variance",
        rows,
        stats: json!({
            "slope": fit.slope,
            "std_error": fit.std_error,
            "upper_ci": fit.upper_ci,
            "replicates": replicates,
            "check_depth": depth,
            "event_failure_bound": failure_bound,
        }),
        flags: json!({ "subquadratic_variance": fit.pass }),
        pass: fit.pass,
    })
}

/// Growth of circle means (or the sup) against the matching reference
/// rate; the ensemble max curve must not drift across the top decade.
fn growth_experiment(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    let dist = cfg.dist.to_spec()?;
    let (order, rate) = match cfg.p {
        0 => (MeanOrder::Sup, ReferenceRate::SupEnvelope),
        1 => (MeanOrder::P1, ReferenceRate::Mean(MeanOrder::P1)),
        2 => (MeanOrder::P2, ReferenceRate::Mean(MeanOrder::P2)),
        _ => (MeanOrder::P4, ReferenceRate::Mean(MeanOrder::P4)),
    };
    let table = BoundTable::default();
    let opts = eval_options(cfg);
    let curves = (0..cfg.replicates)
        .into_par_iter()
        .map(|j| -> Result<GrowthCurve, Error> {
            let s = CoefficientStream::new(dist, seed_mix(cfg.seed, j))?;
            let handle = SeriesHandle::new(s);
            growth::growth_ratio_curve(&handle, &cfg.r_grid, order, rate, &table, &opts)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut max_vals = vec![f64::NEG_INFINITY; cfg.r_grid.len()];
    for c in &curves {
        for (slot, v) in max_vals.iter_mut().zip(&c.log_values) {
            *slot = slot.max(*v);
        }
    }
    let max_curve = GrowthCurve {
        radii: cfg.r_grid.clone(),
        log_values: max_vals,
        p: order,
        normalization: Some(rate),
    };
    let drift = max_curve.drift().map_err(RunError::from)?;
    let pass = drift <= 0.5;

    let mut rows = Vec::with_capacity(curves.len() * cfg.r_grid.len());
    for (j, c) in curves.iter().enumerate() {
        for (&r, &v) in c.radii.iter().zip(&c.log_values) {
            rows.push(vec![j.to_string(), fnum(r), fnum(v)]);
        }
    }

    Ok(Batch {
        header: "replicate,r,log_ratio",
        rows,
        stats: json!({
            "drift": drift,
            "max_log_ratio": max_curve.max_value(),
            "replicates": cfg.replicates,
        }),
        flags: json!({ "bounded_growth_ratio": pass }),
        pass,
    })
}

/// Gaussian circle-moment identities at orders 1, 2, 4 over the radius
/// grid; each relative error must sit within three standard errors.
fn moments(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    if cfg.dist.family != FamilyKind::ComplexGaussianStd {
        return Err(RunError::Config(
            "the moment identity check targets the standard complex Gaussian law".to_string(),
        ));
    }
    let replicates = cfg.replicates.max(10_000);
    let mut jobs = Vec::new();
    for (k, &(pe, order)) in [(1u32, MeanOrder::P1), (2, MeanOrder::P2), (4, MeanOrder::P4)]
        .iter()
        .enumerate()
    {
        for (i, &r) in cfg.r_grid.iter().enumerate() {
            let sub = seed_mix(cfg.seed, (k * cfg.r_grid.len() + i) as u64);
            jobs.push((pe, order, r, sub));
        }
    }
    let checks = jobs
        .par_iter()
        .map(|&(pe, order, r, sub)| {
            growth::gaussian_moment_check(r, order, replicates, sub).map(|c| (pe, r, c))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut rows = Vec::with_capacity(checks.len());
    let mut worst = 0.0f64;
    let mut pass = true;
    for (pe, r, c) in &checks {
        let score = c.relative_error.abs() / c.std_error;
        worst = worst.max(score);
        let ok = score < 3.0;
        if !ok {
            pass = false;
        }
        rows.push(vec![
            pe.to_string(),
            fnum(*r),
            fnum(c.empirical),
            fnum(c.target),
            fnum(c.relative_error),
            fnum(c.std_error),
            u8::from(ok).to_string(),
        ]);
    }

    Ok(Batch {
        header: "p,r,empirical,target,relative_error,std_error,pass",
        rows,
        stats: json!({ "replicates": replicates, "worst_score": worst }),
        flags: json!({ "moment_identities": pass }),
        pass,
    })
}

/// Sup-norm exceedance constant search at degrees 64, 256, 1024 on the
/// first grid radius; the search must settle below c = 3 at each degree.
fn kahane(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    let dist = cfg.dist.to_spec()?;
    let replicates = cfg.replicates.max(10_000);
    let r = cfg.r_grid[0];
    let degrees = [64usize, 256, 1024];
    let searched = degrees
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            match growth::kahane_search(dist, r, n, C_MAX, replicates, seed_mix(cfg.seed, i as u64))
            {
                Ok((c, est)) => Ok((n, Some((c, est)))),
                Err(Error::ThresholdSearchExhausted { .. }) => Ok((n, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut rows = Vec::with_capacity(searched.len());
    let mut pass = true;
    let mut constants = Vec::new();
    for (n, found) in &searched {
        let target = 1.0 / (*n as f64 * *n as f64);
        match found {
            Some((c, est)) => {
                constants.push(*c);
                rows.push(vec![
                    n.to_string(),
                    fnum(*c),
                    fnum(est.value),
                    fnum(est.std_error),
                    fnum(target),
                ]);
            }
            None => {
                pass = false;
                rows.push(vec![
                    n.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    fnum(target),
                ]);
            }
        }
    }

    Ok(Batch {
        header: "n_degree,c,exceedance,std_error,target",
        rows,
        stats: json!({
            "r": r,
            "replicates": replicates,
            "c_max": C_MAX,
            "constants": constants,
        }),
        flags: json!({ "threshold_found": pass }),
        pass,
    })
}

/// Root-test profiles and divergence crossings per replicate, with the
/// law-appropriate dichotomy flag: heavy divergent tails must show a
/// zero radius of convergence, every other family an infinite one.
fn radius_experiment(cfg: &ExperimentConfig) -> Result<Batch, RunError> {
    let dist = cfg.dist.to_spec()?;
    let per = (0..cfg.replicates)
        .into_par_iter()
        .map(|j| -> Result<_, Error> {
            let s = CoefficientStream::new(dist, seed_mix(cfg.seed, j))?;
            let profile = radius::root_test_profile(&s, cfg.n_max)?;
            let window = (profile.len() as u64 / 2).max(1);
            let est = radius::radius_estimate(&profile, window)?;
            let cross = radius::divergence_crossings(&s, M_FACTOR, cfg.n_max)?;
            Ok((est, cross))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let total = cfg.replicates as f64;
    let frac_diverging = per
        .iter()
        .filter(|(e, _)| e.global_log_max > 0.0)
        .count() as f64
        / total;
    let frac_small_trailing = per.iter().filter(|(e, _)| e.trailing_max() < 0.1).count() as f64
        / total;
    let mean_crossings = per.iter().map(|(_, c)| c.count as f64).sum::<f64>() / total;
    let expected = per[0].1.expected_count;

    let entire = !matches!(dist, DistSpec::DivergentLogTail);
    let pass = if entire {
        frac_small_trailing >= 0.99
    } else {
        frac_diverging >= 0.9
    };

    let rows = per
        .iter()
        .enumerate()
        .map(|(j, (e, c))| {
            vec![
                j.to_string(),
                fnum(e.trailing_log_max),
                fnum(e.global_log_max),
                c.count.to_string(),
            ]
        })
        .collect();

    Ok(Batch {
        header: "replicate,trailing_log_max,global_log_max,crossings",
        rows,
        stats: json!({
            "fraction_diverging": frac_diverging,
            "fraction_small_trailing": frac_small_trailing,
            "mean_crossings": mean_crossings,
            "expected_crossings": expected,
            "m_factor": M_FACTOR,
        }),
        flags: json!({ "radius_dichotomy": pass }),
        pass,
    })
}
