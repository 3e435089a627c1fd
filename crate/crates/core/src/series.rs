//! Scaled evaluation of f and its derivatives on disks and circles.
//!
//! The k-th derivative of f(z) = sum X_n z^n/n! is the same series with
//! coefficients shifted by k, so a single evaluation routine parameterised
//! by a shift covers the whole differentiation orbit. All arithmetic is
//! carried in e^(-r)-scaled units: the working terms are X_n * p_n(r) with
//! p_n(r) = e^(-r) r^n/n!, the Poisson(r) mass function, which keeps every
//! intermediate bounded by |X_n| no matter how large r gets.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dist::{Coefficient, CoefficientStream};
use crate::error::{Error, Result};
use crate::math::{ln_poisson_weight, poisson_weights};

/// Anything that can hand out the coefficient at an absolute index.
/// The production implementation is [`CoefficientStream`]; tests plug in
/// deterministic fixtures.
pub trait CoefficientSource {
    fn coefficient(&self, n: u64) -> Coefficient;

    /// The coefficient law behind this source, when there is one.
    /// Deterministic fixtures return None; probabilistic claims about
    /// unchecked coefficients are then taken as certain.
    fn law(&self) -> Option<crate::dist::DistSpec> {
        None
    }
}

impl CoefficientSource for CoefficientStream {
    fn coefficient(&self, n: u64) -> Coefficient {
        self.sample(n)
    }

    fn law(&self) -> Option<crate::dist::DistSpec> {
        Some(self.dist())
    }
}

/// Evaluation controls. `tol` is the per-term stopping tolerance in scaled
/// units, `hard_cap` bounds the truncation scan, `max_radius` is the
/// supported evaluation range (the Poisson weights stay comfortably inside
/// f64 range there).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tol: f64,
    pub hard_cap: u64,
    pub max_radius: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tol: 1e-12,
            hard_cap: 1_000_000,
            max_radius: 300.0,
        }
    }
}

impl EvalOptions {
    fn validate(&self, r: f64) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::BadParameter {
                name: "tol",
                requirement: "in (0, 1)",
                got: self.tol,
            });
        }
        if !(r >= 0.0) {
            return Err(Error::BadParameter {
                name: "radius",
                requirement: ">= 0",
                got: r,
            });
        }
        if r > self.max_radius {
            return Err(Error::RadiusTooLarge {
                radius: r,
                max: self.max_radius,
            });
        }
        Ok(())
    }
}

/// Consecutive sub-tolerance terms required before the truncation scan
/// stops. A single small term proves nothing for heavy-tailed draws; a run
/// of twenty does, because the Poisson weights past 3r shrink by at least
/// a factor 3 per index.
const STOP_RUN: u64 = 20;

/// One scaled evaluation. `scaled_value` is e^(-r) f^(k)(z); the raw value
/// is `scaled_value * exp(log_scale)` whenever that is representable.
#[derive(Debug, Clone, Copy)]
pub struct EvalResult {
    pub scaled_value: Complex64,
    /// Natural log of the removed scale factor, i.e. r.
    pub log_scale: f64,
    pub truncation_index: u64,
    /// Upper bound on the scaled magnitude of the omitted tail, valid as
    /// long as later coefficients do not exceed the largest one seen in
    /// the stop window (the factorial decay of the weights gives the
    /// certificate several orders of magnitude of slack).
    pub tail_bound: f64,
}

impl EvalResult {
    pub fn raw_value(&self) -> Complex64 {
        self.scaled_value * self.log_scale.exp()
    }
}

/// Scaled samples on the circle |z| = r at the m-th roots of unity.
#[derive(Debug, Clone)]
pub struct CircleSamples {
    /// values[j] = e^(-r) f^(k)(r e^(i 2 pi j / m))
    pub values: Vec<Complex64>,
    pub log_scale: f64,
    pub truncation_index: u64,
    /// Uniform over the circle: the omitted terms have the same magnitude
    /// at every angle.
    pub tail_bound: f64,
}

impl CircleSamples {
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Sup-norm estimate for one block of the index split n <= 3R,
/// 3^j R < n <= 3^(j+1) R.
#[derive(Debug, Clone, Copy)]
pub struct BlockEstimate {
    pub j: u32,
    /// First index of the block (inclusive).
    pub n_lo: u64,
    /// Last index of the block (inclusive).
    pub n_hi: u64,
    pub grid_size: usize,
    /// Grid maximum of the scaled block magnitude on |z| = R.
    pub sup: f64,
    /// Scaled block value at theta = 0, so the blocks can be re-summed.
    pub value_at_zero: Complex64,
}

/// A coefficient source with a lazily extended dense cache.
///
/// The cache is confined to one execution context (`RefCell`, so the
/// handle is not `Sync`); parallel drivers create one handle per worker,
/// which costs nothing because sources are pure.
pub struct SeriesHandle<S: CoefficientSource = CoefficientStream> {
    source: S,
    cache: RefCell<Vec<Coefficient>>,
}

impl<S: CoefficientSource> CoefficientSource for SeriesHandle<S> {
    fn coefficient(&self, n: u64) -> Coefficient {
        SeriesHandle::coefficient(self, n)
    }

    fn law(&self) -> Option<crate::dist::DistSpec> {
        self.source.law()
    }
}

impl<S: CoefficientSource> SeriesHandle<S> {
    pub fn new(source: S) -> Self {
        SeriesHandle {
            source,
            cache: RefCell::new(Vec::new()),
        }
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    /// Cached coefficient at absolute index n, extending the cache as
    /// needed. Earlier entries are never touched.
    pub fn coefficient(&self, n: u64) -> Coefficient {
        let idx = n as usize;
        {
            let cache = self.cache.borrow();
            if idx < cache.len() {
                return cache[idx];
            }
        }
        let mut cache = self.cache.borrow_mut();
        while cache.len() <= idx {
            let next = cache.len() as u64;
            cache.push(self.source.coefficient(next));
        }
        cache[idx]
    }

    pub fn ensure_cached(&self, upto: u64) {
        self.coefficient(upto);
    }

    /// Smallest index W (at least max(16, ceil(3r))) such that the twenty
    /// scaled terms after W all fall below `opts.tol`, for the series
    /// shifted by k. Deterministic. Errors out at `opts.hard_cap` instead
    /// of returning a cutoff the coefficients never justified.
    pub fn truncation_index(&self, k: u64, r: f64, opts: &EvalOptions) -> Result<u64> {
        opts.validate(r)?;
        let floor = 16u64.max((3.0 * r).ceil() as u64);
        let log_r = if r == 0.0 { f64::NEG_INFINITY } else { r.ln() };
        let mut run = 0u64;
        let mut n = floor + 1;
        loop {
            // ln of |X_{k+n}| p_n(r); the n = 0 weight never matters here
            // because the scan starts past the floor.
            let c = self.coefficient(k + n);
            let log_term = c.log_abs + (n as f64) * log_r - crate::math::ln_factorial(n) - r;
            if log_term < opts.tol.ln() {
                run += 1;
                if run == STOP_RUN {
                    return Ok(n - STOP_RUN);
                }
            } else {
                run = 0;
            }
            if n - run >= opts.hard_cap {
                return Err(Error::TruncationCap {
                    cap: opts.hard_cap,
                    radius: r,
                });
            }
            n += 1;
        }
    }

    /// e^(-r)-scaled value of the k-th derivative at z.
    pub fn evaluate_scaled(&self, k: u64, z: Complex64, opts: &EvalOptions) -> Result<EvalResult> {
        let r = z.norm();
        let theta = z.arg();
        let w = self.truncation_index(k, r, opts)?;
        let weights = poisson_weights(r, (w + STOP_RUN) as usize);
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..=w {
            acc += self.term(k + n, n, r, &weights) * rotation(n, theta);
        }
        let tail_bound = self.tail_bound(k, w, r, &weights);
        Ok(EvalResult {
            scaled_value: acc,
            log_scale: r,
            truncation_index: w,
            tail_bound,
        })
    }

    /// Scaled values at the m-th roots of unity on |z| = r, via one
    /// coefficient pass and an FFT. Index n lands in bin n mod m, which is
    /// exact on this grid: e^(i n theta_j) = e^(i (n mod m) theta_j).
    pub fn circle_samples(
        &self,
        k: u64,
        r: f64,
        m: usize,
        opts: &EvalOptions,
    ) -> Result<CircleSamples> {
        if m < 16 || !m.is_power_of_two() {
            return Err(Error::BadGrid {
                name: "circle grid",
                min: 16,
                got: m,
            });
        }
        let w = self.truncation_index(k, r, opts)?;
        let weights = poisson_weights(r, (w + STOP_RUN) as usize);
        let mut bins = vec![Complex64::new(0.0, 0.0); m];
        for n in 0..=w {
            bins[(n as usize) % m] += self.term(k + n, n, r, &weights);
        }
        inverse_fft(&mut bins);
        let tail_bound = self.tail_bound(k, w, r, &weights);
        Ok(CircleSamples {
            values: bins,
            log_scale: r,
            truncation_index: w,
            tail_bound,
        })
    }

    /// Splits the series at radius R into the head n <= 3R and geometric
    /// blocks 3^j R < n <= 3^(j+1) R, estimating each block's sup norm on
    /// |z| = R over a grid of at least max(256, 4 * block end) angles.
    pub fn block_decompose(
        &self,
        r_int: u64,
        j_max: u32,
        opts: &EvalOptions,
    ) -> Result<Vec<BlockEstimate>> {
        if r_int < 1 {
            return Err(Error::BadParameter {
                name: "R",
                requirement: ">= 1",
                got: r_int as f64,
            });
        }
        if j_max < 1 || j_max > 12 {
            return Err(Error::BadParameter {
                name: "j_max",
                requirement: "in 1..=12",
                got: j_max as f64,
            });
        }
        let r = r_int as f64;
        opts.validate(r)?;
        let top = 3u64.pow(j_max + 1) * r_int;
        let weights = poisson_weights(r, top as usize);
        let mut out = Vec::with_capacity(j_max as usize + 1);
        for j in 0..=j_max {
            let (n_lo, n_hi) = if j == 0 {
                (0, 3 * r_int)
            } else {
                (3u64.pow(j) * r_int + 1, 3u64.pow(j + 1) * r_int)
            };
            let m = grid_for_degree(n_hi); // >= 4*n_hi and >= 256
            let mut bins = vec![Complex64::new(0.0, 0.0); m];
            for n in n_lo..=n_hi {
                bins[(n as usize) % m] += self.term(n, n, r, &weights);
            }
            let value_at_zero = bins.iter().sum();
            inverse_fft(&mut bins);
            let sup = bins.iter().map(|v| v.norm()).fold(0.0, f64::max);
            out.push(BlockEstimate {
                j,
                n_lo,
                n_hi,
                grid_size: m,
                sup,
                value_at_zero,
            });
        }
        Ok(out)
    }

    /// One scaled term X_idx * p_n(r). The direct product is used whenever
    /// the coefficient value is safely representable; otherwise the
    /// magnitude is assembled in the log domain so that a huge |X| with a
    /// tiny weight still comes out right.
    fn term(&self, idx: u64, n: u64, r: f64, weights: &[f64]) -> Complex64 {
        let c = self.coefficient(idx);
        if c.log_abs <= 600.0 {
            c.value() * weights[n as usize]
        } else {
            let log_mag = c.log_abs + ln_poisson_weight(n, r);
            Complex64::from_polar(log_mag.exp(), c.phase)
        }
    }

    /// Window sum plus a geometric extrapolation. Past W >= 3r the weight
    /// ratio r/(n+1) is at most 1/3, so the sampled stop window dominates
    /// the unseen tail unless a later coefficient dwarfs everything in it.
    fn tail_bound(&self, k: u64, w: u64, r: f64, weights: &[f64]) -> f64 {
        let mut window_sum = 0.0;
        let mut m_win: f64 = 1.0;
        for n in w + 1..=w + STOP_RUN {
            let c = self.coefficient(k + n);
            window_sum += self.term(k + n, n, r, weights).norm();
            m_win = m_win.max(c.log_abs.exp());
        }
        let q = r / (w as f64 + 1.0);
        let p_last = weights[(w + STOP_RUN) as usize];
        window_sum + m_win * p_last * q / (1.0 - q)
    }
}

impl SeriesHandle<CoefficientStream> {
    /// Handle for the k-th derivative as an independent stream shift.
    /// `evaluate_scaled(k, ...)` on the base handle is bit-identical.
    pub fn derivative(&self, k: u64) -> Self {
        SeriesHandle::new(self.source.shift(k))
    }
}

fn rotation(n: u64, theta: f64) -> Complex64 {
    if theta == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, (n as f64) * theta)
    }
}

/// Power-of-two angular grid adapted to an effective degree: at least 256
/// points and at least four per degree, so the grid sup tracks the true
/// sup to second order.
pub fn grid_for_degree(degree: u64) -> usize {
    let want = 256u64.max(4 * degree.max(1));
    want.next_power_of_two() as usize
}

/// Free-function form of the truncation scan for an unshifted stream.
pub fn truncation_index(stream: &CoefficientStream, r: f64, opts: &EvalOptions) -> Result<u64> {
    SeriesHandle::new(*stream).truncation_index(0, r, opts)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalised inverse FFT in place: out[j] = sum_n in[n] e^(+2 pi i n j / m).
fn inverse_fft(bins: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(bins.len());
        fft.process(bins);
    });
}
