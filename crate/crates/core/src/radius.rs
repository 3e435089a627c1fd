//! Radius-of-convergence diagnostics from finite coefficient samples.
//!
//! The series sum X_n z^n/n! converges everywhere or nowhere depending
//! on how often |X_n| outruns n!. The root-test sequence
//! t_n = (|X_n|/n!)^(1/n) makes that quantitative: its limsup is the
//! reciprocal radius. Everything here works on log|X_n| directly, so
//! magnitudes like exp(10^6) never materialize as floats.

use crate::dist::tail_probability_log_r;
use crate::error::{Error, Result};
use crate::math::ln_factorial;
use crate::series::CoefficientSource;

/// Cap for reporting t_n as a linear-scale number; everything above is
/// pinned here. Comparisons always happen on the log scale.
const LINEAR_CAP: f64 = 700.0;

/// Root-test sequence of a coefficient sample: log|X_n| and
/// log t_n = (log|X_n| - log n!)/n for n = 1..n_max.
#[derive(Debug, Clone)]
pub struct RootTestProfile {
    pub n_grid: Vec<u64>,
    pub log_abs: Vec<f64>,
    pub log_t: Vec<f64>,
}

impl RootTestProfile {
    pub fn len(&self) -> usize {
        self.n_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_grid.is_empty()
    }

    /// t_n on the linear scale, capped at exp(700) so heavy samples
    /// stay finite in reports.
    pub fn t_values(&self) -> Vec<f64> {
        self.log_t.iter().map(|l| l.min(LINEAR_CAP).exp()).collect()
    }
}

pub fn root_test_profile<S: CoefficientSource>(
    source: &S,
    n_max: u64,
) -> Result<RootTestProfile> {
    if n_max < 100 {
        return Err(Error::NotEnough {
            what: "profile indices",
            needed: 100,
            got: n_max as usize,
        });
    }
    let mut n_grid = Vec::with_capacity(n_max as usize);
    let mut log_abs = Vec::with_capacity(n_max as usize);
    let mut log_t = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let la = source.coefficient(n).log_abs;
        n_grid.push(n);
        log_abs.push(la);
        log_t.push((la - ln_factorial(n)) / n as f64);
    }
    Ok(RootTestProfile {
        n_grid,
        log_abs,
        log_t,
    })
}

/// Finite-sample stand-in for the reciprocal radius: the trailing-window
/// max of t_n is the limsup proxy, with the global max alongside.
#[derive(Debug, Clone, Copy)]
pub struct RadiusEstimate {
    pub trailing_log_max: f64,
    pub global_log_max: f64,
    pub window: u64,
}

impl RadiusEstimate {
    pub fn trailing_max(&self) -> f64 {
        self.trailing_log_max.min(LINEAR_CAP).exp()
    }

    pub fn global_max(&self) -> f64 {
        self.global_log_max.min(LINEAR_CAP).exp()
    }
}

pub fn radius_estimate(profile: &RootTestProfile, window: u64) -> Result<RadiusEstimate> {
    let n = profile.len() as u64;
    if window == 0 || window > n / 2 {
        return Err(Error::BadParameter {
            name: "window",
            requirement: "in [1, n_max/2]",
            got: window as f64,
        });
    }
    let global_log_max = profile
        .log_t
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let trailing_log_max = profile.log_t[(n - window) as usize..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RadiusEstimate {
        trailing_log_max,
        global_log_max,
        window,
    })
}

/// Indices whose coefficient outgrew the divergence threshold (M n)^n,
/// plus (for sources with a known law) the exact expected count of such
/// crossings over the same range. Crossings happening infinitely often
/// is precisely the radius-zero mechanism.
#[derive(Debug, Clone)]
pub struct CrossingReport {
    pub count: u64,
    pub crossings: Vec<u64>,
    pub expected_count: Option<f64>,
}

pub fn divergence_crossings<S: CoefficientSource>(
    source: &S,
    m_factor: f64,
    n_max: u64,
) -> Result<CrossingReport> {
    if !(m_factor > 0.0 && m_factor.is_finite()) {
        return Err(Error::BadParameter {
            name: "m_factor",
            requirement: "finite and > 0",
            got: m_factor,
        });
    }
    let law = source.law();
    let mut crossings = Vec::new();
    let mut expected = law.map(|_| 0.0);
    for n in 1..=n_max {
        // log of (M n)^n, the whole comparison stays in log space
        let threshold = n as f64 * (m_factor * n as f64).ln();
        if source.coefficient(n).log_abs > threshold {
            crossings.push(n);
        }
        if let (Some(acc), Some(dist)) = (expected.as_mut(), law) {
            *acc += tail_probability_log_r(dist, threshold);
        }
    }
    Ok(CrossingReport {
        count: crossings.len() as u64,
        crossings,
        expected_count: expected,
    })
}
