//! Orbit density machinery for the differentiation operator.
//!
//! The object of study is how often the derivative orbit f, f', f'', ...
//! visits an epsilon-ball around a fixed polynomial target g on a disk.
//! Two event families are implemented: the sup-norm event (the orbit
//! element is uniformly close to g on the disk) and a stricter
//! coefficient event (head coefficients close term by term, all later
//! ones under an exponential envelope). The coefficient event has
//! closed-form probabilities, which everything here cross-validates by
//! Monte Carlo: per-event probability, pair correlations across shifts,
//! and the variance growth of the cumulative hit count.

use num_complex::Complex64;

use crate::dist::{tail_probability_log_r, CoefficientStream, DistSpec};
use crate::error::{Error, Result};
use crate::math::{
    ln_bessel_i0, ln_factorial, log_add, mean_var, ols_fit, poisson_weights, seed_mix,
    student_t_975, TWO_PI,
};
use crate::series::{CoefficientSource, EvalOptions, SeriesHandle};

/// Polynomial target g(z) = sum_{k=0}^N a_k z^k / k! with the disk radius
/// and tolerance of the approximation event. Coefficients are stored in
/// the z^k/k! basis, the same basis the series coefficients live in.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub a: Vec<Complex64>,
    pub r: f64,
    pub eps: f64,
}

impl TargetSpec {
    /// The zero target: approximate the zero function.
    pub fn zero(r: f64, eps: f64) -> Self {
        TargetSpec {
            a: vec![Complex64::new(0.0, 0.0)],
            r,
            eps,
        }
    }

    /// Degree bound N (index of the last stored coefficient).
    pub fn degree(&self) -> u64 {
        (self.a.len() - 1) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() {
            return Err(Error::BadParameter {
                name: "target coefficients",
                requirement: "at least one",
                got: 0.0,
            });
        }
        if !self.a.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::BadParameter {
                name: "target coefficients",
                requirement: "finite",
                got: f64::NAN,
            });
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::BadParameter {
                name: "target radius",
                requirement: "finite and > 0",
                got: self.r,
            });
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::BadParameter {
                name: "target tolerance",
                requirement: "finite and > 0",
                got: self.eps,
            });
        }
        Ok(())
    }

    /// r^n / n! for the head distances, stable for any index.
    fn head_weight(&self, n: u64) -> f64 {
        ((n as f64) * self.r.ln() - ln_factorial(n)).exp()
    }
}

/// Exponential coefficient envelope: level(n) = scale * e^n for indices
/// past the target head. Built so that the whole envelope contributes at
/// most eps/2 to the sup norm on the disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientEnvelope {
    pub scale: f64,
    /// Last head index N; levels apply from N+1 on.
    pub head_len: u64,
}

impl CoefficientEnvelope {
    /// Envelope for a target: scale = (eps/2) / (1.01 * sum_{n>N} (e r)^n/n!),
    /// the 1% slack buying a strict inequality. The defining sum condition
    /// is re-checked by direct summation before returning.
    pub fn for_target(target: &TargetSpec) -> Result<Self> {
        target.validate()?;
        let n1 = target.degree() + 1;
        let log_tail = log_exp_tail(std::f64::consts::E * target.r, n1);
        let log_scale = (target.eps / 2.0).ln() - 1.01f64.ln() - log_tail;
        let scale = log_scale.exp();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::BadParameter {
                name: "envelope scale",
                requirement: "representable and positive",
                got: scale,
            });
        }
        let env = CoefficientEnvelope {
            scale,
            head_len: target.degree(),
        };
        // construction check: the envelope mass stays under eps/2
        let direct = scale.ln() + log_exp_tail(std::f64::consts::E * target.r, n1);
        if !(direct < (target.eps / 2.0).ln()) {
            return Err(Error::BadParameter {
                name: "envelope mass",
                requirement: "< eps/2",
                got: direct.exp(),
            });
        }
        Ok(env)
    }

    /// Envelope with an explicit scale, for experiments that sweep the
    /// constant directly.
    pub fn with_scale(scale: f64, head_len: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::BadParameter {
                name: "envelope scale",
                requirement: "finite and > 0",
                got: scale,
            });
        }
        Ok(CoefficientEnvelope { scale, head_len })
    }

    pub fn level(&self, n: u64) -> f64 {
        self.log_level(n).exp()
    }

    /// ln level(n) = ln scale + n; exact in the log domain for any index.
    pub fn log_level(&self, n: u64) -> f64 {
        self.scale.ln() + n as f64
    }
}

/// ln( sum_{n >= n_start} x^n / n! ) by shifted summation; relative error
/// well under 1e-12.
fn log_exp_tail(x: f64, n_start: u64) -> f64 {
    let log_x = x.ln();
    let mut logs = Vec::new();
    let mut max_log = f64::NEG_INFINITY;
    let mut n = n_start;
    loop {
        let lt = (n as f64) * log_x - ln_factorial(n);
        logs.push(lt);
        if lt > max_log {
            max_log = lt;
        }
        if (n as f64) > x && lt < max_log - 60.0 {
            break;
        }
        n += 1;
    }
    let sum: f64 = logs.iter().map(|l| (l - max_log).exp()).sum();
    max_log + sum.ln()
}

/// Monte Carlo frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub(crate) fn from_hits(hits: u64, samples: u64) -> Self {
        let value = hits as f64 / samples as f64;
        Estimate {
            value,
            std_error: (value * (1.0 - value) / samples as f64).sqrt(),
            samples,
        }
    }
}

/// P( sum_{k<=N} |X_k - a_k| r^k/k! < eps/2 ) estimated over fresh
/// i.i.d. coefficient tuples. Deterministic given the seed.
pub fn head_probability_mc(
    dist: DistSpec,
    target: &TargetSpec,
    mc_samples: u64,
    seed: u64,
) -> Result<Estimate> {
    dist.validate()?;
    target.validate()?;
    if mc_samples < 10_000 {
        return Err(Error::NotEnough {
            what: "Monte Carlo samples",
            needed: 10_000,
            got: mc_samples as usize,
        });
    }
    let weights: Vec<f64> = (0..target.a.len())
        .map(|n| target.head_weight(n as u64))
        .collect();
    let half = target.eps / 2.0;
    let mut hits = 0u64;
    for i in 0..mc_samples {
        let s = CoefficientStream::new(dist, seed_mix(seed, i))?;
        let mut acc = 0.0;
        for (n, w) in weights.iter().enumerate() {
            acc += (s.sample(n as u64).value() - target.a[n]).norm() * w;
            if acc >= half {
                break;
            }
        }
        if acc < half {
            hits += 1;
        }
    }
    Ok(Estimate::from_hits(hits, mc_samples))
}

/// P(|X - a| < t) for the standard rotation-invariant complex Gaussian
/// and an offset of modulus mu, by adaptive Simpson integration of the
/// noncentral radial density 2 s exp(-(s^2 + mu^2)) I_0(2 s mu). Absolute
/// error well under 1e-8.
pub fn radial_offset_cdf(mu: f64, t: f64) -> f64 {
    assert!(mu >= 0.0 && t.is_finite(), "radial_offset_cdf: bad inputs");
    if t <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let log_v = (2.0 * s).ln() - s * s - mu * mu + ln_bessel_i0(2.0 * s * mu);
        log_v.exp()
    };
    let mut panels = 64usize;
    let mut prev = simpson(&f, 0.0, t, panels);
    loop {
        panels *= 2;
        let cur = simpson(&f, 0.0, t, panels);
        if (cur - prev).abs() < 1e-11 || panels >= (1 << 20) {
            return cur.clamp(0.0, 1.0);
        }
        prev = cur;
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let x = a + h * i as f64;
        acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Iteration ceiling for envelope sums and products; families whose tails
/// decay too slowly to finish under it get a SlowTailDecay error instead
/// of an open-ended loop.
const TERM_LIMIT: u64 = 2_000_000;

/// Upper bound on sum_{j >= k} tail(level(j)), or None while k is still
/// in the pre-asymptotic region where the closed bounds do not apply yet.
fn sum_remainder(dist: DistSpec, env: &CoefficientEnvelope, k: u64) -> Result<Option<f64>> {
    let t = env.log_level(k);
    match dist {
        DistSpec::ComplexGaussianStd => {
            if t < 0.0 {
                return Ok(None);
            }
            // consecutive tails shrink by at least exp(-(e^2 - 1)) here
            Ok(Some(2.0 * tail_probability_log_r(dist, t)))
        }
        DistSpec::GaussianPlusLogPareto { beta } => {
            if t < 1.5 {
                return Ok(None);
            }
            let power = (t - 0.5).powf(-beta) / beta;
            let gauss = if 2.0 * t > 700.0 {
                0.0
            } else {
                2.0 * (-(2.0 * t).exp()).exp()
            };
            Ok(Some(power + gauss))
        }
        DistSpec::DivergentLogTail => Err(Error::NonSummableTail {
            family: dist.family(),
        }),
        DistSpec::BorderlineTail { alpha } => {
            if alpha <= 1.0 {
                return Err(Error::NonSummableTail {
                    family: dist.family(),
                });
            }
            if t - 0.5 <= std::f64::consts::E {
                return Ok(None);
            }
            Ok(Some((t - 0.5).ln().powf(1.0 - alpha) / (alpha - 1.0)))
        }
    }
}

/// Upper bound on sum_{j >= from} tail(level(j)), accurate to the smaller
/// of `cut` and one percent. Errors out for families whose envelope tail
/// sum diverges or converges too slowly to certify.
pub fn envelope_tail_sum(
    dist: DistSpec,
    env: &CoefficientEnvelope,
    from: u64,
    cut: f64,
) -> Result<f64> {
    dist.validate()?;
    if from <= env.head_len {
        return Err(Error::BadParameter {
            name: "from",
            requirement: "past the envelope head",
            got: from as f64,
        });
    }
    if !(cut > 0.0) {
        return Err(Error::BadParameter {
            name: "cut",
            requirement: "> 0",
            got: cut,
        });
    }
    let mut acc = 0.0;
    let mut k = from;
    loop {
        if let Some(rem) = sum_remainder(dist, env, k)? {
            if rem < cut || rem < 0.01 * acc {
                return Ok(acc + rem);
            }
        }
        acc += tail_probability_log_r(dist, env.log_level(k));
        k += 1;
        if k - from > TERM_LIMIT {
            return Err(Error::SlowTailDecay {
                family: dist.family(),
                cut,
                limit: TERM_LIMIT,
            });
        }
    }
}

/// Q_d = prod_{k >= d} P(|X| < level(k)), the probability that a fresh
/// coefficient sequence stays under the envelope from index d on.
/// Factors are accumulated as log1p(-tail); once the family's analytic
/// remainder is certified below `tail_cut` the rest of the product is
/// folded in as an integral correction (exactly zero extra factors for
/// the Gaussian, a midpoint-rule integral for the heavy families).
pub fn envelope_product(
    dist: DistSpec,
    env: &CoefficientEnvelope,
    d: u64,
    tail_cut: f64,
) -> Result<f64> {
    dist.validate()?;
    if d <= env.head_len {
        return Err(Error::BadParameter {
            name: "d",
            requirement: "past the envelope head",
            got: d as f64,
        });
    }
    if !(tail_cut > 0.0 && tail_cut < 1.0) {
        return Err(Error::BadParameter {
            name: "tail_cut",
            requirement: "in (0, 1)",
            got: tail_cut,
        });
    }
    match dist {
        DistSpec::DivergentLogTail => {
            return Err(Error::NonSummableTail {
                family: dist.family(),
            })
        }
        DistSpec::BorderlineTail { alpha } if alpha <= 1.0 => {
            return Err(Error::NonSummableTail {
                family: dist.family(),
            })
        }
        _ => {}
    }
    let mut log_q = 0.0;
    let mut k = d;
    loop {
        if let Some((correction, err)) = product_remainder(dist, env, k) {
            if err < tail_cut {
                log_q += correction;
                break;
            }
        }
        let t = tail_probability_log_r(dist, env.log_level(k));
        if t >= 1.0 {
            // a saturated factor kills the product exactly
            return Ok(0.0);
        }
        log_q += (-t).ln_1p();
        k += 1;
        if k - d > TERM_LIMIT {
            return Err(Error::SlowTailDecay {
                family: dist.family(),
                cut: tail_cut,
                limit: TERM_LIMIT,
            });
        }
    }
    Ok(log_q.exp())
}

/// Analytic closure of the log product from index k on: returns
/// (correction to add to log Q, error bound), or None while the closed
/// form does not apply yet. The correction is the midpoint-rule integral
/// of -tail(level(x)); the error bound covers the quadratic log1p terms,
/// the midpoint-rule defect, and any dropped sub-tail.
fn product_remainder(dist: DistSpec, env: &CoefficientEnvelope, k: u64) -> Option<(f64, f64)> {
    let t = env.log_level(k);
    match dist {
        DistSpec::ComplexGaussianStd => {
            if t < 0.0 {
                return None;
            }
            // remainder factors are 1 - exp(-e^(2t)) and die off doubly
            // exponentially: drop them, bound by twice the first tail
            Some((0.0, 2.0 * tail_probability_log_r(dist, t)))
        }
        DistSpec::GaussianPlusLogPareto { beta } => {
            if t < 2.0 {
                return None;
            }
            let tm = t - 0.5;
            let correction = -tm.powf(-beta) / beta;
            let quadratic = tm.powf(-(1.0 + 2.0 * beta)) / (2.0 + 4.0 * beta);
            let midpoint = (1.0 + beta) * tm.powf(-(2.0 + beta)) / 24.0;
            let gauss = if 2.0 * t > 700.0 {
                0.0
            } else {
                2.0 * (-(2.0 * t).exp()).exp()
            };
            Some((correction, quadratic + midpoint + gauss))
        }
        DistSpec::BorderlineTail { alpha } => {
            if t - 0.5 <= std::f64::consts::E {
                return None;
            }
            let tm = t - 0.5;
            let correction = -tm.ln().powf(1.0 - alpha) / (alpha - 1.0);
            let quadratic = tm.ln().powf(-2.0 * alpha) / tm;
            let midpoint = (1.0 + alpha) * tm.powf(-2.0) * tm.ln().powf(-alpha) / 24.0;
            Some((correction, quadratic + midpoint))
        }
        DistSpec::DivergentLogTail => None,
    }
}

/// Smallest check depth n such that the union bound on the unverified
/// envelope conditions past n falls below `failure_target`. Returns the
/// depth and the certified bound.
pub fn default_check_depth(
    dist: DistSpec,
    env: &CoefficientEnvelope,
    failure_target: f64,
) -> Result<(u64, f64)> {
    dist.validate()?;
    if !(failure_target > 0.0 && failure_target < 1.0) {
        return Err(Error::BadParameter {
            name: "failure_target",
            requirement: "in (0, 1)",
            got: failure_target,
        });
    }
    let mut k = env.head_len + 2;
    loop {
        if let Some(rem) = sum_remainder(dist, env, k)? {
            if rem < failure_target {
                return Ok((k - 1, rem));
            }
        }
        k += 1;
        if k - env.head_len > TERM_LIMIT {
            return Err(Error::SlowTailDecay {
                family: dist.family(),
                cut: failure_target,
                limit: TERM_LIMIT,
            });
        }
    }
}

/// The shift-separation condition at offset d: every head index k must
/// satisfy |a_k| + (eps/2) k!/r^k <= level(k + d). Monotone in d.
pub fn separation_condition_holds(
    target: &TargetSpec,
    env: &CoefficientEnvelope,
    d: u64,
) -> bool {
    let half_log = (target.eps / 2.0).ln();
    for (k, a) in target.a.iter().enumerate() {
        let ku = k as u64;
        // log of |a_k| + (eps/2) k!/r^k
        let log_needed = log_add(
            a.norm().ln(),
            half_log + ln_factorial(ku) - (ku as f64) * target.r.ln(),
        );
        if log_needed > env.log_level(ku + d) {
            return false;
        }
    }
    true
}

/// Smallest threshold M past the target head such that the separation
/// condition holds from M on and the envelope tail sum from M is at most
/// one half. Pair probabilities factor in closed form for shifts >= M.
pub fn factorization_threshold(
    dist: DistSpec,
    target: &TargetSpec,
    env: &CoefficientEnvelope,
) -> Result<u64> {
    dist.validate()?;
    target.validate()?;
    let mut m = env.head_len + 1;
    while !separation_condition_holds(target, env, m) {
        m += 1;
    }
    loop {
        let s = envelope_tail_sum(dist, env, m, 1e-6)?;
        if s <= 0.5 {
            return Ok(m);
        }
        m += 1;
    }
}

/// Pair probability of the coefficient event at shifts 0 and d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JointPrediction {
    /// p^2 Q_base^2 / Q_d, valid for shifts at or past the factorization
    /// threshold.
    Closed(f64),
    /// Below the threshold the factorization argument does not apply;
    /// estimate by Monte Carlo instead.
    MonteCarloRequired,
}

pub fn joint_prediction(
    p: f64,
    q_base: f64,
    q_d: f64,
    d: u64,
    threshold: u64,
) -> Result<JointPrediction> {
    if d == 0 {
        return Err(Error::BadParameter {
            name: "d",
            requirement: ">= 1",
            got: 0.0,
        });
    }
    for (name, v) in [("p", p), ("q_base", q_base), ("q_d", q_d)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::BadParameter {
                name,
                requirement: "in [0, 1]",
                got: v,
            });
        }
    }
    if d < threshold {
        return Ok(JointPrediction::MonteCarloRequired);
    }
    if p == 0.0 {
        return Ok(JointPrediction::Closed(0.0));
    }
    if q_d == 0.0 {
        return Err(Error::BadParameter {
            name: "q_d",
            requirement: "> 0 when p > 0",
            got: 0.0,
        });
    }
    Ok(JointPrediction::Closed(p * p * q_base * q_base / q_d))
}

/// Predicted variance of the cumulative hit count S_n for the coefficient
/// event: the Bernoulli diagonal, Monte Carlo pair terms for shifts below
/// the factorization threshold, and closed-form pair terms from there on.
/// `q` maps a shift to Q_d; `small_d_joints[i]` is the joint probability
/// estimate at shift i + 1.
pub fn variance_prediction<F>(
    p: f64,
    q: F,
    tail_start: u64,
    threshold: u64,
    n: u64,
    small_d_joints: &[f64],
) -> Result<f64>
where
    F: Fn(u64) -> Result<f64>,
{
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadParameter {
            name: "p",
            requirement: "in [0, 1]",
            got: p,
        });
    }
    if threshold < tail_start.max(1) {
        return Err(Error::BadParameter {
            name: "threshold",
            requirement: ">= tail start",
            got: threshold as f64,
        });
    }
    if n <= threshold {
        return Err(Error::BadParameter {
            name: "n",
            requirement: "> threshold",
            got: n as f64,
        });
    }
    let expected = (threshold - 1) as usize;
    if small_d_joints.len() != expected {
        return Err(Error::MissingJointEstimates {
            expected,
            got: small_d_joints.len(),
        });
    }
    let q_base = q(tail_start)?;
    let pq = p * q_base;
    let nf = n as f64;
    let var = nf * (pq - pq * pq);
    let mut cross = 0.0;
    for (i, joint) in small_d_joints.iter().enumerate() {
        let d = (i + 1) as f64;
        cross += (nf - d) * (joint - pq * pq);
    }
    for d in threshold..n {
        let q_d = q(d)?;
        if q_d >= 1.0 {
            break; // later factors are all exactly one
        }
        cross += (nf - d as f64) * pq * pq * (1.0 - q_d) / q_d;
    }
    Ok(var + 2.0 * cross)
}

/// Which event family a density trace counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Sup-norm proximity to the target over the disk.
    SupNorm,
    /// Head proximity coefficient by coefficient plus envelope tail bounds.
    Coefficient,
}

/// Outcome of one sup-norm event in raw (unscaled) units.
#[derive(Debug, Clone, Copy)]
pub struct EventReport {
    pub hit: bool,
    /// The grid maximum stayed below eps but the certified tail bound
    /// straddles it; counted as a miss.
    pub ambiguous: bool,
    pub sup_estimate: f64,
    pub tail_bound: f64,
}

/// Sup-norm event at shift k: the k-th derivative stays within eps of the
/// target uniformly on the closed disk (evaluated on the boundary circle,
/// which suffices for the analytic difference). Pessimistic on the
/// ambiguity band: hit only when grid max plus tail bound clears eps.
pub fn sup_norm_event<S: CoefficientSource>(
    handle: &SeriesHandle<S>,
    k: u64,
    target: &TargetSpec,
    m: usize,
    eval: &EvalOptions,
) -> Result<EventReport> {
    target.validate()?;
    let s = handle.circle_samples(k, target.r, m, eval)?;
    let weights = poisson_weights(target.r, target.degree() as usize);
    let mut sup_scaled = 0.0f64;
    for (j, v) in s.values.iter().enumerate() {
        let theta = TWO_PI * j as f64 / m as f64;
        let mut g = Complex64::new(0.0, 0.0);
        for (l, a) in target.a.iter().enumerate() {
            g += a * weights[l] * Complex64::from_polar(1.0, l as f64 * theta);
        }
        sup_scaled = sup_scaled.max((v - g).norm());
    }
    let scale = target.r.exp();
    let sup_estimate = sup_scaled * scale;
    let tail_bound = s.tail_bound * scale;
    let hit = sup_estimate + tail_bound < target.eps;
    Ok(EventReport {
        hit,
        ambiguous: !hit && sup_estimate < target.eps,
        sup_estimate,
        tail_bound,
    })
}

/// Outcome of one coefficient event.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientReport {
    pub hit: bool,
    /// Union bound on the probability that some unchecked index past the
    /// check depth violates its envelope level. Zero for law-less sources
    /// (test fixtures), whose unchecked conditions are taken as certain.
    pub failure_bound: f64,
}

fn coefficient_hit<S: CoefficientSource>(
    source: &S,
    k: u64,
    target: &TargetSpec,
    env: &CoefficientEnvelope,
    check_depth: u64,
) -> bool {
    let half = target.eps / 2.0;
    let mut acc = 0.0;
    for (n, a) in target.a.iter().enumerate() {
        acc += (source.coefficient(k + n as u64).value() - a).norm() * target.head_weight(n as u64);
        if acc >= half {
            return false;
        }
    }
    for n in env.head_len + 1..=check_depth {
        if source.coefficient(k + n).log_abs >= env.log_level(n) {
            return false;
        }
    }
    true
}

/// Coefficient event at shift k: head coefficients within eps/2 of the
/// target in the weighted l1 sense, every later coefficient under its
/// envelope level. The infinite tail is checked up to `check_depth`,
/// with the leftover failure probability reported.
pub fn coefficient_event<S: CoefficientSource>(
    source: &S,
    k: u64,
    target: &TargetSpec,
    env: &CoefficientEnvelope,
    check_depth: u64,
) -> Result<CoefficientReport> {
    target.validate()?;
    if check_depth <= env.head_len {
        return Err(Error::BadParameter {
            name: "check_depth",
            requirement: "past the envelope head",
            got: check_depth as f64,
        });
    }
    let failure_bound = match source.law() {
        Some(dist) => envelope_tail_sum(dist, env, check_depth + 1, 1e-9)?,
        None => 0.0,
    };
    Ok(CoefficientReport {
        hit: coefficient_hit(source, k, target, env, check_depth),
        failure_bound,
    })
}

/// Controls for a density sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub grid: usize,
    pub eval: EvalOptions,
    /// Explicit check depth for coefficient events; None derives it from
    /// `failure_target`.
    pub check_depth: Option<u64>,
    pub failure_target: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            grid: 256,
            eval: EvalOptions::default(),
            check_depth: None,
            failure_target: 1e-6,
        }
    }
}

/// Everything that must agree for traces to be poolable in one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub dist: DistSpec,
    pub target: TargetSpec,
    pub kind: EventKind,
    pub n_max: u64,
    pub grid: usize,
    pub check_depth: u64,
}

/// Cumulative hit counts S_1..S_n of one event sweep along the orbit.
#[derive(Debug, Clone)]
pub struct DensityTrace {
    /// counts[i] = number of hits among shifts 0..=i.
    pub counts: Vec<u64>,
    pub seed: u64,
    /// Sup-norm events resolved pessimistically inside the tail-bound
    /// ambiguity band.
    pub ambiguous: u64,
    /// Per-event failure bound of the truncated envelope check
    /// (coefficient kind only).
    pub event_failure_bound: f64,
    pub config: TraceConfig,
}

impl DensityTrace {
    pub fn n_max(&self) -> u64 {
        self.counts.len() as u64
    }

    /// S_n / n.
    pub fn density(&self, n: u64) -> f64 {
        assert!(n >= 1 && n <= self.n_max(), "density: n out of range");
        self.counts[(n - 1) as usize] as f64 / n as f64
    }

    /// min over n in [n0, n_max] of S_n/n, the finite-run stand-in for a
    /// lower density bound.
    pub fn min_density_from(&self, n0: u64) -> f64 {
        assert!(n0 >= 1 && n0 <= self.n_max(), "min_density_from: bad n0");
        (n0..=self.n_max())
            .map(|n| self.density(n))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sweeps the event at shifts k = 0..n_max-1 over one coefficient stream,
/// reusing a shared coefficient cache across shifts.
pub fn density_trace(
    stream: CoefficientStream,
    target: &TargetSpec,
    kind: EventKind,
    n_max: u64,
    opts: &TraceOptions,
) -> Result<DensityTrace> {
    target.validate()?;
    if n_max < 1 {
        return Err(Error::BadParameter {
            name: "n_max",
            requirement: ">= 1",
            got: n_max as f64,
        });
    }
    let seed = stream.seed();
    let dist = stream.dist();
    let handle = SeriesHandle::new(stream);
    let mut counts = Vec::with_capacity(n_max as usize);
    let mut hits = 0u64;
    let mut ambiguous = 0u64;
    let mut event_failure_bound = 0.0;
    let mut depth_used = 0u64;
    match kind {
        EventKind::SupNorm => {
            for k in 0..n_max {
                let rep = sup_norm_event(&handle, k, target, opts.grid, &opts.eval)
                    .map_err(|e| Error::EventEvaluation {
                        k,
                        source: Box::new(e),
                    })?;
                if rep.hit {
                    hits += 1;
                }
                if rep.ambiguous {
                    ambiguous += 1;
                }
                counts.push(hits);
            }
        }
        EventKind::Coefficient => {
            let env = CoefficientEnvelope::for_target(target)?;
            let (depth, bound) = match opts.check_depth {
                Some(d) => {
                    if d <= env.head_len {
                        return Err(Error::BadParameter {
                            name: "check_depth",
                            requirement: "past the envelope head",
                            got: d as f64,
                        });
                    }
                    (d, envelope_tail_sum(dist, &env, d + 1, 1e-9)?)
                }
                None => default_check_depth(dist, &env, opts.failure_target)?,
            };
            depth_used = depth;
            event_failure_bound = bound;
            for k in 0..n_max {
                if coefficient_hit(&handle, k, target, &env, depth) {
                    hits += 1;
                }
                counts.push(hits);
            }
        }
    }
    Ok(DensityTrace {
        counts,
        seed,
        ambiguous,
        event_failure_bound,
        config: TraceConfig {
            dist,
            target: target.clone(),
            kind,
            n_max,
            grid: opts.grid,
            check_depth: depth_used,
        },
    })
}

/// Frequency of the coefficient event at one shift over independent
/// streams, for stationarity checks and probability validation.
pub fn coefficient_event_frequency(
    dist: DistSpec,
    target: &TargetSpec,
    shift: u64,
    samples: u64,
    seed: u64,
    check_depth: Option<u64>,
) -> Result<Estimate> {
    let (env, depth) = frequency_setup(dist, target, check_depth)?;
    if samples < 100 {
        return Err(Error::NotEnough {
            what: "Monte Carlo samples",
            needed: 100,
            got: samples as usize,
        });
    }
    let mut hits = 0u64;
    for i in 0..samples {
        let s = CoefficientStream::new(dist, seed_mix(seed, i))?;
        if coefficient_hit(&s, shift, target, &env, depth) {
            hits += 1;
        }
    }
    Ok(Estimate::from_hits(hits, samples))
}

/// Frequency of the coefficient event hitting at both shift 0 and shift d
/// on the same stream.
pub fn joint_coefficient_frequency(
    dist: DistSpec,
    target: &TargetSpec,
    d: u64,
    samples: u64,
    seed: u64,
    check_depth: Option<u64>,
) -> Result<Estimate> {
    let (env, depth) = frequency_setup(dist, target, check_depth)?;
    if d == 0 {
        return Err(Error::BadParameter {
            name: "d",
            requirement: ">= 1",
            got: 0.0,
        });
    }
    if samples < 100 {
        return Err(Error::NotEnough {
            what: "Monte Carlo samples",
            needed: 100,
            got: samples as usize,
        });
    }
    let mut hits = 0u64;
    for i in 0..samples {
        let s = CoefficientStream::new(dist, seed_mix(seed, i))?;
        if coefficient_hit(&s, 0, target, &env, depth)
            && coefficient_hit(&s, d, target, &env, depth)
        {
            hits += 1;
        }
    }
    Ok(Estimate::from_hits(hits, samples))
}

fn frequency_setup(
    dist: DistSpec,
    target: &TargetSpec,
    check_depth: Option<u64>,
) -> Result<(CoefficientEnvelope, u64)> {
    dist.validate()?;
    target.validate()?;
    let env = CoefficientEnvelope::for_target(target)?;
    let depth = match check_depth {
        Some(d) if d > env.head_len => d,
        Some(d) => {
            return Err(Error::BadParameter {
                name: "check_depth",
                requirement: "past the envelope head",
                got: d as f64,
            })
        }
        None => default_check_depth(dist, &env, 1e-6)?.0,
    };
    Ok((env, depth))
}

/// Result of the variance growth fit.
#[derive(Debug, Clone)]
pub struct VarianceFit {
    pub slope: f64,
    pub std_error: f64,
    pub upper_ci: f64,
    /// True when the 97.5% upper confidence bound on the slope clears 2
    /// by more than numerical noise: the hallmark of decaying shift
    /// correlations.
    pub pass: bool,
    /// (n, empirical Var(S_n)) pairs entering the fit.
    pub points: Vec<(u64, f64)>,
}

/// Numerical margin for the sub-quadratic call: an upper bound within
/// round-off of 2 exactly never counts as a pass.
const SLOPE_PASS_MARGIN: f64 = 1e-9;

/// Fits log Var(S_n) against log n across replicate traces.
pub fn variance_scaling(traces: &[DensityTrace], n_grid: &[u64]) -> Result<VarianceFit> {
    if traces.len() < 100 {
        return Err(Error::NotEnough {
            what: "replicate traces",
            needed: 100,
            got: traces.len(),
        });
    }
    let cfg = &traces[0].config;
    if traces.iter().any(|t| &t.config != cfg) {
        return Err(Error::MixedTraceConfigs {
            op: "variance_scaling",
        });
    }
    if n_grid.len() < 5 {
        return Err(Error::NotEnough {
            what: "variance grid points",
            needed: 5,
            got: n_grid.len(),
        });
    }
    let mut prev = 0u64;
    for &n in n_grid {
        if n < 1 || n <= prev {
            return Err(Error::BadParameter {
                name: "n_grid",
                requirement: "strictly increasing, >= 1",
                got: n as f64,
            });
        }
        if n > cfg.n_max {
            return Err(Error::BadParameter {
                name: "n_grid",
                requirement: "within the trace length",
                got: n as f64,
            });
        }
        prev = n;
    }
    let span = n_grid[n_grid.len() - 1] as f64 / n_grid[0] as f64;
    if span < 10f64.powf(1.5) * (1.0 - 1e-12) {
        return Err(Error::BadParameter {
            name: "n_grid span",
            requirement: ">= 1.5 decades",
            got: span,
        });
    }
    let mut xs = Vec::with_capacity(n_grid.len());
    let mut ys = Vec::with_capacity(n_grid.len());
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let vals: Vec<f64> = traces
            .iter()
            .map(|t| t.counts[(n - 1) as usize] as f64)
            .collect();
        let (_, var) = mean_var(&vals);
        if var <= 0.0 {
            return Err(Error::DegenerateVariance { n });
        }
        xs.push((n as f64).ln());
        ys.push(var.ln());
        points.push((n, var));
    }
    let (slope, _, std_error) = ols_fit(&xs, &ys);
    let upper_ci = slope + student_t_975(n_grid.len() - 2) * std_error;
    Ok(VarianceFit {
        slope,
        std_error,
        upper_ci,
        pass: upper_ci < 2.0 - SLOPE_PASS_MARGIN,
        points,
    })
}
