//! End-to-end pass/fail checks tying the library together: moment
//! identities, closed-form probability agreement, density floors,
//! variance scaling, growth envelopes, and the radius dichotomy. Each
//! check returns a labeled result with a human-readable detail line, so
//! the same battery backs both the test suite and the command-line
//! verifier.

use crate::dist::{CoefficientStream, DistSpec};
use crate::error::Result;
use crate::growth::{
    gaussian_moment_check, growth_ratio_curve, log_second_moment, BoundTable, GrowthCurve,
    MeanOrder, ReferenceRate,
};
use crate::hypercyclicity::{
    coefficient_event, density_trace, envelope_product, factorization_threshold,
    joint_coefficient_frequency, joint_prediction, radial_offset_cdf, sup_norm_event,
    CoefficientEnvelope, EventKind, JointPrediction, TargetSpec, TraceOptions,
};
use crate::math::{poisson_weights, seed_mix};
use crate::radius::{radius_estimate, root_test_profile};
use crate::series::{grid_for_degree, EvalOptions, SeriesHandle};
use num_complex::Complex64;

pub const MOMENT_SE_FACTOR: f64 = 3.0;
pub const ASYMPTOTIC_LO: f64 = 0.99;
pub const ASYMPTOTIC_HI: f64 = 1.01;
pub const DENSITY_FLOOR_FACTOR: f64 = 0.5;
pub const JOINT_SE_FACTOR: f64 = 3.0;
pub const DRIFT_LIMIT: f64 = 0.5;
pub const DIVERGENT_FRACTION: f64 = 0.90;
pub const CONVERGENT_FRACTION: f64 = 0.99;
pub const TRAILING_MAX_LIMIT: f64 = 0.1;
pub const PARSEVAL_TOL: f64 = 1e-8;
pub const WEIGHT_MASS_TOL: f64 = 1e-12;
pub const DERIVATIVE_TOL: f64 = 1e-6;

/// Workload knobs for the check battery. `full` is the reference run;
/// `quick` shrinks every Monte Carlo dimension to smoke-test levels
/// while keeping each check statistically meaningful.
#[derive(Debug, Clone)]
pub struct Profile {
    pub moment_replicates: u64,
    pub density_seeds: u64,
    pub density_n_max: u64,
    pub density_burn_in: u64,
    pub joint_samples: u64,
    pub variance_replicates: u64,
    pub variance_n_max: u64,
    pub envelope_seeds: u64,
    pub dichotomy_seeds: u64,
    pub dichotomy_n_max: u64,
    pub pair_samples: u64,
}

impl Profile {
    pub fn full() -> Self {
        Profile {
            moment_replicates: 10_000,
            density_seeds: 10,
            density_n_max: 100_000,
            density_burn_in: 1_000,
            joint_samples: 100_000,
            variance_replicates: 200,
            variance_n_max: 10_000,
            envelope_seeds: 100,
            dichotomy_seeds: 200,
            dichotomy_n_max: 10_000,
            pair_samples: 10_000,
        }
    }

    pub fn quick() -> Self {
        Profile {
            moment_replicates: 10_000,
            density_seeds: 2,
            density_n_max: 20_000,
            density_burn_in: 1_000,
            joint_samples: 20_000,
            variance_replicates: 100,
            variance_n_max: 3_200,
            envelope_seeds: 10,
            dichotomy_seeds: 50,
            dichotomy_n_max: 2_000,
            pair_samples: 1_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn frozen_gaussian_target() -> TargetSpec {
    TargetSpec::zero(1.0, 4.0)
}

/// A1: the ensemble mean of |f(r)|^2 reproduces the second-moment series
/// within Monte Carlo resolution at small, medium, and large radius.
pub fn second_moment_agreement(profile: &Profile) -> Result<CriterionResult> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, r) in [1.0, 5.0, 10.0].into_iter().enumerate() {
        let check = gaussian_moment_check(r, MeanOrder::P2, profile.moment_replicates, 101 + i as u64)?;
        let ok = check.relative_error.abs() < MOMENT_SE_FACTOR * check.std_error;
        pass &= ok;
        parts.push(format!(
            "r={r}: rel err {:+.2e} (se {:.2e})",
            check.relative_error, check.std_error
        ));
    }
    Ok(CriterionResult {
        id: "A1",
        title: "Gaussian second moment matches the series oracle",
        pass,
        detail: parts.join("; "),
    })
}

/// A2: the second-moment series obeys the large-radius Bessel law
/// I(r) ~ e^{2r} / (2 sqrt(pi r)) to within one percent across a decade.
pub fn bessel_asymptotics() -> Result<CriterionResult> {
    let mut pass = true;
    let mut worst: f64 = 1.0;
    for r in [100.0, 150.0, 200.0, 250.0, 300.0] {
        let log_ratio =
            log_second_moment(r)? + 2.0f64.ln() + 0.5 * (std::f64::consts::PI * r).ln() - 2.0 * r;
        let ratio = log_ratio.exp();
        if (ratio - 1.0).abs() > (worst - 1.0).abs() {
            worst = ratio;
        }
        pass &= (ASYMPTOTIC_LO..=ASYMPTOTIC_HI).contains(&ratio);
    }
    Ok(CriterionResult {
        id: "A2",
        title: "second moment follows the large-radius asymptotic law",
        pass,
        detail: format!("worst normalized ratio {worst:.6} over r in [100, 300]"),
    })
}

/// A3: running density of the sup-norm approximation event stays above
/// half the closed-form floor p * Q past the burn-in index, per seed.
pub fn density_floor(profile: &Profile) -> Result<CriterionResult> {
    let dist = DistSpec::ComplexGaussianStd;
    let target = TargetSpec::zero(1.0, 0.5);
    let env = CoefficientEnvelope::for_target(&target)?;
    let p = radial_offset_cdf(0.0, target.eps / 2.0);
    let q = envelope_product(dist, &env, env.head_len + 1, 1e-9)?;
    let floor = DENSITY_FLOOR_FACTOR * p * q;
    let opts = TraceOptions::default();
    let mut pass = true;
    let mut mins = Vec::new();
    for i in 0..profile.density_seeds {
        let stream = CoefficientStream::new(dist, seed_mix(301, i))?;
        let trace = density_trace(stream, &target, EventKind::SupNorm, profile.density_n_max, &opts)?;
        let min = trace.min_density_from(profile.density_burn_in);
        pass &= min >= floor;
        mins.push(format!("{min:.2e}"));
    }
    Ok(CriterionResult {
        id: "A3",
        title: "running event density clears half the closed-form floor",
        pass,
        detail: format!("floor {floor:.3e}; per-seed min densities [{}]", mins.join(", ")),
    })
}

/// A4: Monte Carlo pair frequencies match the factorized closed form
/// p^2 Q_1^2 / Q_d at and beyond the factorization threshold.
pub fn joint_probability_agreement(profile: &Profile) -> Result<CriterionResult> {
    let dist = DistSpec::ComplexGaussianStd;
    let target = frozen_gaussian_target();
    let env = CoefficientEnvelope::for_target(&target)?;
    let m = factorization_threshold(dist, &target, &env)?;
    let p = radial_offset_cdf(0.0, target.eps / 2.0);
    let q1 = envelope_product(dist, &env, env.head_len + 1, 1e-9)?;
    let mut pass = true;
    let mut parts = vec![format!("threshold {m}")];
    for (i, d) in [m, m + 2, m + 5].into_iter().enumerate() {
        let q_d = envelope_product(dist, &env, d, 1e-9)?;
        let closed = match joint_prediction(p, q1, q_d, d, m)? {
            JointPrediction::Closed(v) => v,
            JointPrediction::MonteCarloRequired => unreachable!("d >= threshold"),
        };
        let mc = joint_coefficient_frequency(
            dist,
            &target,
            d,
            profile.joint_samples,
            seed_mix(401, i as u64),
            None,
        )?;
        let ok = (mc.value - closed).abs() < JOINT_SE_FACTOR * mc.std_error;
        pass &= ok;
        parts.push(format!(
            "d={d}: mc {:.5e} vs closed {:.5e} (se {:.1e})",
            mc.value, closed, mc.std_error
        ));
    }
    Ok(CriterionResult {
        id: "A4",
        title: "pair frequencies match the factorized closed form",
        pass,
        detail: parts.join("; "),
    })
}

/// A5: the log-log slope of Var(S_n) against n stays below 2, the
/// signature of decaying shift correlations.
pub fn variance_slope(profile: &Profile) -> Result<CriterionResult> {
    let dist = DistSpec::ComplexGaussianStd;
    let target = frozen_gaussian_target();
    let opts = TraceOptions::default();
    let mut traces = Vec::with_capacity(profile.variance_replicates as usize);
    for i in 0..profile.variance_replicates {
        let stream = CoefficientStream::new(dist, seed_mix(501, i))?;
        traces.push(density_trace(
            stream,
            &target,
            EventKind::Coefficient,
            profile.variance_n_max,
            &opts,
        )?);
    }
    let mut n_grid = Vec::new();
    let mut n = 100u64;
    while n < profile.variance_n_max {
        n_grid.push(n);
        n = ((n as f64) * 2.15).round() as u64;
    }
    n_grid.push(profile.variance_n_max);
    let fit = crate::hypercyclicity::variance_scaling(&traces, &n_grid)?;
    Ok(CriterionResult {
        id: "A5",
        title: "hit-count variance grows subquadratically",
        pass: fit.pass,
        detail: format!(
            "slope {:.4} (se {:.4}), upper confidence bound {:.4}",
            fit.slope, fit.std_error, fit.upper_ci
        ),
    })
}

/// A6: the seed-ensemble sup-norm curve, normalized by the optimal-order
/// rate sqrt(log r) e^r r^{-1/4}, shows no upward drift across decades.
pub fn growth_envelope_drift(profile: &Profile) -> Result<CriterionResult> {
    let radii: Vec<f64> = (0..=20)
        .map(|i| 10.0 * 20.0f64.powf(i as f64 / 20.0))
        .collect();
    let opts = EvalOptions::default();
    let table = BoundTable::default();
    let mut max_curve: Vec<f64> = vec![f64::NEG_INFINITY; radii.len()];
    for i in 0..profile.envelope_seeds {
        let stream = CoefficientStream::new(DistSpec::ComplexGaussianStd, seed_mix(601, i))?;
        let handle = SeriesHandle::new(stream);
        let curve = growth_ratio_curve(
            &handle,
            &radii,
            MeanOrder::Sup,
            ReferenceRate::SupEnvelope,
            &table,
            &opts,
        )?;
        for (acc, v) in max_curve.iter_mut().zip(&curve.log_values) {
            *acc = acc.max(*v);
        }
    }
    let ensemble = GrowthCurve {
        radii,
        log_values: max_curve,
        p: MeanOrder::Sup,
        normalization: Some(ReferenceRate::SupEnvelope),
    };
    let drift = ensemble.drift()?;
    Ok(CriterionResult {
        id: "A6",
        title: "normalized sup-norm envelope shows no upward drift",
        pass: drift <= DRIFT_LIMIT,
        detail: format!("decade drift {drift:+.4} log units (limit {DRIFT_LIMIT})"),
    })
}

/// A7: Monte Carlo circle means reproduce the Gamma-factor moment
/// identity for first, second, and fourth powers.
pub fn moment_identities(profile: &Profile) -> Result<CriterionResult> {
    let mut pass = true;
    let mut worst = 0.0f64;
    for (i, p) in [MeanOrder::P1, MeanOrder::P2, MeanOrder::P4].into_iter().enumerate() {
        for (j, r) in [1.0, 5.0, 10.0].into_iter().enumerate() {
            let check =
                gaussian_moment_check(r, p, profile.moment_replicates, 701 + (3 * i + j) as u64)?;
            let score = check.relative_error.abs() / check.std_error;
            worst = worst.max(score);
            pass &= score < MOMENT_SE_FACTOR;
        }
    }
    Ok(CriterionResult {
        id: "A7",
        title: "power means obey the Gamma-factor moment identity",
        pass,
        detail: format!("worst |rel err|/se {worst:.2} over p in {{1,2,4}}, r in {{1,5,10}}"),
    })
}

/// A8: root-test profiles separate the divergent law (unit crossing)
/// from the entire laws (vanishing trailing maximum).
pub fn radius_dichotomy(profile: &Profile) -> Result<CriterionResult> {
    let window = profile.dichotomy_n_max / 2;
    let mut crossed = 0u64;
    for i in 0..profile.dichotomy_seeds {
        let stream = CoefficientStream::new(DistSpec::DivergentLogTail, seed_mix(801, i))?;
        let prof = root_test_profile(&stream, profile.dichotomy_n_max)?;
        if radius_estimate(&prof, window)?.global_log_max > 0.0 {
            crossed += 1;
        }
    }
    let crossed_frac = crossed as f64 / profile.dichotomy_seeds as f64;
    let mut pass = crossed_frac >= DIVERGENT_FRACTION;
    let mut parts = vec![format!("divergent unit-crossing fraction {crossed_frac:.3}")];
    for dist in [
        DistSpec::BorderlineTail { alpha: 2.0 },
        DistSpec::ComplexGaussianStd,
    ] {
        let mut small = 0u64;
        for i in 0..profile.dichotomy_seeds {
            let stream = CoefficientStream::new(dist, seed_mix(811, i))?;
            let prof = root_test_profile(&stream, profile.dichotomy_n_max)?;
            if radius_estimate(&prof, window)?.trailing_max() < TRAILING_MAX_LIMIT {
                small += 1;
            }
        }
        let frac = small as f64 / profile.dichotomy_seeds as f64;
        pass &= frac >= CONVERGENT_FRACTION;
        parts.push(format!("{} small-trailing fraction {frac:.3}", dist.family()));
    }
    Ok(CriterionResult {
        id: "A8",
        title: "root-test profiles separate divergent from entire laws",
        pass,
        detail: parts.join("; "),
    })
}

/// A9: exact identities: bit-exact shift, event inclusion, power-mean
/// ordering, Parseval on the truncated circle, Poisson mass, and the
/// derivative against a central difference.
pub fn exact_identities(profile: &Profile) -> Result<CriterionResult> {
    let mut parts = Vec::new();
    let mut pass = true;

    let stream = CoefficientStream::new(DistSpec::ComplexGaussianStd, 901)?;
    let mut shift_exact = true;
    for k in [1u64, 5, 17] {
        let shifted = stream.shift(k);
        for n in 0..200 {
            let a = shifted.sample(n);
            let b = stream.sample(n + k);
            shift_exact &=
                a.log_abs.to_bits() == b.log_abs.to_bits() && a.phase.to_bits() == b.phase.to_bits();
        }
    }
    pass &= shift_exact;
    parts.push(format!("shift bit-exact: {shift_exact}"));

    let dist = DistSpec::ComplexGaussianStd;
    let target = frozen_gaussian_target();
    let env = CoefficientEnvelope::for_target(&target)?;
    let depth = crate::hypercyclicity::default_check_depth(dist, &env, 1e-6)?.0;
    let eval = EvalOptions::default();
    let mut violations = 0u64;
    for i in 0..profile.pair_samples {
        let s = CoefficientStream::new(dist, seed_mix(911, i))?;
        let b = coefficient_event(&s, 0, &target, &env, depth)?;
        if b.hit {
            let handle = SeriesHandle::new(s);
            let a = sup_norm_event(&handle, 0, &target, 256, &eval)?;
            if !a.hit {
                violations += 1;
            }
        }
    }
    pass &= violations == 0;
    parts.push(format!("event inclusion violations: {violations}"));

    let mut ordering = true;
    for seed in [921u64, 922, 923] {
        for r in [1.0, 8.0] {
            let handle =
                SeriesHandle::new(CoefficientStream::new(DistSpec::ComplexGaussianStd, seed)?);
            let w = handle.truncation_index(0, r, &eval)?;
            let m = grid_for_degree(w);
            let m1 = crate::growth::circle_mean(&handle, r, MeanOrder::P1, m, &eval)?;
            let m2 = crate::growth::circle_mean(&handle, r, MeanOrder::P2, m, &eval)?;
            let m4 = crate::growth::circle_mean(&handle, r, MeanOrder::P4, m, &eval)?;
            let sup = crate::growth::sup_norm(&handle, r, m, &eval)?;
            ordering &= m1 <= m2 + 1e-12 && m2 <= m4 + 1e-12 && m4 <= sup + 1e-12;
        }
    }
    pass &= ordering;
    parts.push(format!("power-mean ordering: {ordering}"));

    let handle = SeriesHandle::new(CoefficientStream::new(DistSpec::ComplexGaussianStd, 931)?);
    let r = 2.0;
    let w = handle.truncation_index(0, r, &eval)?;
    let m = grid_for_degree(w);
    let samples = handle.circle_samples(0, r, m, &eval)?;
    let grid_power: f64 =
        samples.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.values.len() as f64;
    let weights = poisson_weights(r, w as usize);
    let coeff_power: f64 = (0..=w)
        .map(|n| handle.coefficient(n).abs().powi(2) * weights[n as usize].powi(2))
        .sum();
    let parseval_err = (grid_power - coeff_power).abs() / coeff_power;
    pass &= parseval_err < PARSEVAL_TOL;
    parts.push(format!("Parseval rel err {parseval_err:.1e}"));

    let mut mass_err = 0.0f64;
    for r in [1.0, 5.0, 20.0] {
        let n_max = (3.0 * r) as usize + 60;
        let total: f64 = poisson_weights(r, n_max).iter().sum();
        mass_err = mass_err.max((total - 1.0).abs());
    }
    pass &= mass_err < WEIGHT_MASS_TOL;
    parts.push(format!("weight mass err {mass_err:.1e}"));

    let z = Complex64::new(0.7, 0.2);
    let h = 1e-5;
    let f_plus = handle
        .evaluate_scaled(0, z + Complex64::new(h, 0.0), &eval)?
        .raw_value();
    let f_minus = handle
        .evaluate_scaled(0, z - Complex64::new(h, 0.0), &eval)?
        .raw_value();
    let diff = (f_plus - f_minus) / Complex64::new(2.0 * h, 0.0);
    let deriv = handle.evaluate_scaled(1, z, &eval)?.raw_value();
    let deriv_err = (diff - deriv).norm() / deriv.norm();
    pass &= deriv_err < DERIVATIVE_TOL;
    parts.push(format!("derivative vs central difference rel err {deriv_err:.1e}"));

    Ok(CriterionResult {
        id: "A9",
        title: "exact identity battery",
        pass,
        detail: parts.join("; "),
    })
}

pub fn run_all(profile: &Profile) -> Result<Vec<CriterionResult>> {
    Ok(vec![
        second_moment_agreement(profile)?,
        bessel_asymptotics()?,
        density_floor(profile)?,
        joint_probability_agreement(profile)?,
        variance_slope(profile)?,
        growth_envelope_drift(profile)?,
        moment_identities(profile)?,
        radius_dichotomy(profile)?,
        exact_identities(profile)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_are_ordered() {
        let full = Profile::full();
        let quick = Profile::quick();
        assert!(quick.density_n_max <= full.density_n_max);
        assert!(quick.joint_samples <= full.joint_samples);
        assert!(quick.variance_replicates <= full.variance_replicates);
        assert!(quick.density_burn_in < quick.density_n_max);
    }

    #[test]
    fn quick_bessel_asymptotics_pass() {
        let r = bessel_asymptotics().unwrap();
        assert!(r.pass, "{}", r.detail);
    }
}
