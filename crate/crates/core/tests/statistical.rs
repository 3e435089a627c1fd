//! Ensemble-level Monte Carlo checks: law support coverage, shift
//! stationarity, joint-probability structure beyond the closed-form
//! regime, variance predictions against replicate traces, quadrature
//! cross-checks, block negligibility, rotation invariance, sup-norm
//! tail decay, and crossing-count calibration.

use entirelab::dist::{tail_probability, Coefficient, CoefficientStream, DistSpec};
use entirelab::growth::kahane_exceedance;
use entirelab::hypercyclicity::{
    coefficient_event_frequency, density_trace, envelope_product, factorization_threshold,
    head_probability_mc, joint_coefficient_frequency, radial_offset_cdf, variance_prediction,
    variance_scaling, CoefficientEnvelope, EventKind, TargetSpec, TraceOptions,
};
use entirelab::math::{mean_var, seed_mix};
use entirelab::radius::divergence_crossings;
use entirelab::series::{CoefficientSource, EvalOptions, SeriesHandle};
use num_complex::Complex64;

fn gaussian_config() -> (DistSpec, TargetSpec, CoefficientEnvelope) {
    let dist = DistSpec::ComplexGaussianStd;
    let target = TargetSpec::zero(1.0, 4.0);
    let env = CoefficientEnvelope::for_target(&target).unwrap();
    (dist, target, env)
}

#[test]
fn gaussian_support_covers_a_central_grid() {
    let stream = CoefficientStream::new(DistSpec::ComplexGaussianStd, 77).unwrap();
    let mut cells = [[0u32; 5]; 5];
    for n in 0..200_000u64 {
        let v = stream.sample(n).value();
        let i = ((v.re + 2.5).floor() as i64).clamp(-1, 5);
        let j = ((v.im + 2.5).floor() as i64).clamp(-1, 5);
        if (0..5).contains(&i) && (0..5).contains(&j) {
            cells[i as usize][j as usize] += 1;
        }
    }
    for row in &cells {
        for &c in row {
            assert!(c > 0, "empty cell in the central grid");
        }
    }
}

#[test]
fn heavy_tails_cover_phases_and_magnitude_bands() {
    let cases = [
        (DistSpec::GaussianPlusLogPareto { beta: 1.0 }, [1.2, 2.0, 3.0, 5.0]),
        (DistSpec::BorderlineTail { alpha: 2.0 }, [2.1, 3.0, 6.0, 20.0]),
        (DistSpec::DivergentLogTail, [1.1, 2.0, 10.0, 100.0]),
    ];
    for (dist, band_edges) in cases {
        let stream = CoefficientStream::new(dist, 78).unwrap();
        let mut octants = [0u32; 8];
        let mut bands = [0u32; 3];
        for n in 0..20_000u64 {
            let c = stream.sample(n);
            let sector = ((c.phase.rem_euclid(std::f64::consts::TAU))
                / (std::f64::consts::TAU / 8.0))
                .floor() as usize;
            octants[sector.min(7)] += 1;
            for b in 0..3 {
                if c.log_abs >= band_edges[b] && c.log_abs < band_edges[b + 1] {
                    bands[b] += 1;
                }
            }
        }
        assert!(
            octants.iter().all(|&c| c > 0),
            "{}: empty phase octant",
            dist.family()
        );
        assert!(
            bands.iter().all(|&c| c > 0),
            "{}: empty magnitude band {bands:?}",
            dist.family()
        );
    }
}

#[test]
fn event_frequency_is_shift_stationary() {
    let (dist, target, _) = gaussian_config();
    let f0 = coefficient_event_frequency(dist, &target, 0, 10_000, 210, None).unwrap();
    let f7 = coefficient_event_frequency(dist, &target, 7, 10_000, 211, None).unwrap();
    let se = (f0.std_error.powi(2) + f7.std_error.powi(2)).sqrt();
    assert!(
        (f0.value - f7.value).abs() < 4.0 * se,
        "shift 0 rate {} vs shift 7 rate {} (se {se})",
        f0.value,
        f7.value
    );
}

/// For the zero target the joint event at small shift d nests the two
/// envelope constraints, so the pair probability collapses to a product
/// with the d lowest envelope levels appearing once more. Monte Carlo
/// frequencies must land on that product.
#[test]
fn small_shift_joints_match_nested_products() {
    let (dist, target, env) = gaussian_config();
    let p = radial_offset_cdf(0.0, target.eps / 2.0);
    let q1 = envelope_product(dist, &env, 1, 1e-9).unwrap();
    let mut product = p * q1;
    for d in 1u64..=2 {
        product *= radial_offset_cdf(0.0, env.level(d));
        let mc = joint_coefficient_frequency(dist, &target, d, 100_000, 220 + d, None).unwrap();
        assert!(
            (mc.value - product).abs() < 4.0 * mc.std_error,
            "d={d}: mc {} vs nested product {product}",
            mc.value
        );
    }
}

#[test]
fn heavy_tail_joint_matches_closed_form() {
    // the law is sampled as a Gaussian plus log-Pareto sum, so its stated
    // tail is asymptotic; eps is chosen large enough that every envelope
    // level sits where the tail formula is accurate to ~1e-4
    let dist = DistSpec::GaussianPlusLogPareto { beta: 1.0 };
    let target = TargetSpec::zero(1.0, 600.0);
    let env = CoefficientEnvelope::for_target(&target).unwrap();
    let m = factorization_threshold(dist, &target, &env).unwrap();
    let p = 1.0 - tail_probability(dist, target.eps / 2.0);
    let q1 = envelope_product(dist, &env, 1, 1e-9).unwrap();
    assert!(p > 0.5 && q1 > 0.01, "config degenerated: p={p}, q1={q1}");
    // the envelope tail decays like 1/k for this family, so the derived
    // check depth would be enormous; depth 200 leaves a ~0.5% relative
    // truncation bias, folded into the tolerance below
    let depth = Some(200);
    for (i, d) in [m, m + 2].into_iter().enumerate() {
        let q_d = envelope_product(dist, &env, d, 1e-9).unwrap();
        let closed = p * p * q1 * q1 / q_d;
        let mc =
            joint_coefficient_frequency(dist, &target, d, 30_000, 230 + i as u64, depth).unwrap();
        assert!(
            (mc.value - closed).abs() < 4.0 * mc.std_error + 0.01 * closed,
            "d={d}: mc {} vs closed {closed} (se {})",
            mc.value,
            mc.std_error
        );
    }
}

#[test]
fn variance_prediction_matches_replicate_traces() {
    let (dist, target, env) = gaussian_config();
    let n_max = 10_000u64;
    let replicates = 200u64;
    let opts = TraceOptions::default();
    let mut traces = Vec::new();
    for i in 0..replicates {
        let stream = CoefficientStream::new(dist, seed_mix(941, i)).unwrap();
        traces.push(
            density_trace(stream, &target, EventKind::Coefficient, n_max, &opts).unwrap(),
        );
    }
    let finals: Vec<f64> = traces
        .iter()
        .map(|t| t.density(n_max) * n_max as f64)
        .collect();
    let (_, empirical) = mean_var(&finals);

    let p = radial_offset_cdf(0.0, target.eps / 2.0);
    let threshold = factorization_threshold(dist, &target, &env).unwrap();
    let joints: Vec<f64> = (1..threshold)
        .map(|d| {
            joint_coefficient_frequency(dist, &target, d, 100_000, 950 + d, None)
                .unwrap()
                .value
        })
        .collect();
    let predicted = variance_prediction(
        p,
        |d| envelope_product(dist, &env, d, 1e-9),
        1,
        threshold,
        n_max,
        &joints,
    )
    .unwrap();

    // the sample variance over R replicates carries ~ var*sqrt(2/(R-1))
    // of noise; 0.4 relative is a generous 4-sigma band
    let rel = (predicted - empirical) / empirical;
    assert!(
        rel.abs() < 0.4,
        "predicted {predicted} vs empirical {empirical} (rel {rel:+.3})"
    );

    // the same traces drive the scaling fit, which must stay subquadratic
    let fit = variance_scaling(&traces, &[100, 316, 1000, 3162, 10_000]).unwrap();
    assert!(fit.pass, "slope {} upper ci {}", fit.slope, fit.upper_ci);
}

/// Degree-one head probability has an exact one-dimensional integral
/// form: condition on the magnitude of the first offset coefficient and
/// integrate the second radial CDF over the leftover budget.
#[test]
fn degree_one_head_matches_quadrature() {
    let dist = DistSpec::ComplexGaussianStd;
    let target = TargetSpec {
        a: vec![Complex64::new(0.3, 0.1), Complex64::new(0.0, -0.2)],
        r: 1.0,
        eps: 1.0,
    };
    let mu0 = target.a[0].norm();
    let mu1 = target.a[1].norm();
    let budget = target.eps / 2.0;
    let steps = 800;
    let h = budget / steps as f64;
    let mut quad = 0.0;
    for i in 0..steps {
        let lo = i as f64 * h;
        let hi = lo + h;
        let mass = radial_offset_cdf(mu0, hi) - radial_offset_cdf(mu0, lo);
        let rest = (budget - (lo + 0.5 * h)) / target.r;
        quad += mass * radial_offset_cdf(mu1, rest);
    }
    let mc = head_probability_mc(dist, &target, 20_000, 303).unwrap();
    assert!(
        (mc.value - quad).abs() < 4.0 * mc.std_error,
        "mc {} vs quadrature {quad} (se {})",
        mc.value,
        mc.std_error
    );
}

#[test]
fn far_blocks_are_negligible_at_moderate_radius() {
    let opts = EvalOptions::default();
    let mut ok = 0u32;
    let seeds = 100u64;
    for i in 0..seeds {
        let stream =
            CoefficientStream::new(DistSpec::ComplexGaussianStd, seed_mix(404, i)).unwrap();
        let handle = SeriesHandle::new(stream);
        let blocks = handle.block_decompose(20, 3, &opts).unwrap();
        let far: f64 = blocks[1..].iter().map(|b| b.sup).sum();
        if far < 1e-3 * blocks[0].sup {
            ok += 1;
        }
    }
    assert!(ok >= 95, "far blocks negligible on only {ok}/{seeds} seeds");
}

struct Rotated {
    base: CoefficientStream,
    theta: f64,
}

impl CoefficientSource for Rotated {
    fn coefficient(&self, n: u64) -> Coefficient {
        let c = self.base.coefficient(n);
        Coefficient {
            log_abs: c.log_abs,
            phase: c.phase + n as f64 * self.theta,
        }
    }
}

/// Rotating the coefficient phases by n*theta rotates the function's
/// argument; on a commensurate grid the boundary samples are permuted,
/// so the circle sup cannot move.
#[test]
fn coefficient_rotation_leaves_circle_sup_unchanged() {
    let base = CoefficientStream::new(DistSpec::ComplexGaussianStd, 505).unwrap();
    let opts = EvalOptions::default();
    let m = 256usize;
    let handle = SeriesHandle::new(base);
    let reference = handle.circle_samples(0, 2.0, m, &opts).unwrap().sup();
    for j in 1..=8u32 {
        let theta = std::f64::consts::TAU * j as f64 / m as f64;
        let rotated = Rotated {
            base: CoefficientStream::new(DistSpec::ComplexGaussianStd, 505).unwrap(),
            theta,
        };
        let sup = SeriesHandle::new(rotated)
            .circle_samples(0, 2.0, m, &opts)
            .unwrap()
            .sup();
        assert!(
            (sup - reference).abs() < 1e-12 * reference.max(1.0),
            "rotation {j}/256 moved the sup: {sup} vs {reference}"
        );
    }
}

#[test]
fn sup_norm_exceedance_decays_with_degree() {
    let dist = DistSpec::ComplexGaussianStd;
    let c = 1.2;
    let small =
        kahane_exceedance(dist, 3.0, 64, c, 10_000, 606).unwrap();
    let large =
        kahane_exceedance(dist, 3.0, 1024, c, 10_000, 607).unwrap();
    let se = small.std_error + large.std_error;
    assert!(
        large.value <= small.value + 2.0 * se,
        "exceedance grew with degree: {} -> {}",
        small.value,
        large.value
    );
}

#[test]
fn divergent_crossing_counts_match_expectation() {
    let n_max = 10_000u64;
    let mut counts = Vec::new();
    let mut expected = 0.0;
    for i in 0..200u64 {
        let stream = CoefficientStream::new(DistSpec::DivergentLogTail, seed_mix(707, i)).unwrap();
        let report = divergence_crossings(&stream, 1.0, n_max).unwrap();
        counts.push(report.count as f64);
        expected = report.expected_count.unwrap();
    }
    let (mean, var) = mean_var(&counts);

    // hand form of the expectation, one term per index
    let hand: f64 = (1..=n_max)
        .map(|n| {
            let t = n as f64 * (n as f64).ln();
            if t <= 1.0 {
                1.0
            } else {
                1.0 / t
            }
        })
        .sum();
    assert!(mean > hand / 3.0 && mean < hand * 3.0, "mean {mean} vs hand {hand}");

    let se = (var / counts.len() as f64).sqrt();
    assert!(
        (mean - expected).abs() < 4.0 * se,
        "mean {mean} vs expected {expected} (se {se})"
    );
}
