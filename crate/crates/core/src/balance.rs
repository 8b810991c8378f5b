//! Residual map `F_i(λ) = I_i(λ) − 1 + β δ_{0i}`, its `s`-damped variant
//! `F^s_i = s^i F_i`, the energies built from them, and the two comparison
//! bounds between `I(λ)` and `I(λ')`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::quadrature::{compute_i, QuadError, QuadSettings};
use crate::seqspace::{distance, CoefficientSequence, Norm, SeqError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("beta must lie in [0, 1), got {0}")]
    Beta(f64),
    #[error("window {window} exceeds N-2 = {limit}")]
    Window { window: usize, limit: isize },
    #[error("quadrature failed at index {index}: {source}")]
    Quadrature { index: usize, source: QuadError },
    #[error(transparent)]
    Shape(#[from] SeqError),
}

/// Residuals over the active window `0..=M`.
///
/// `raw` always holds the undamped `F_i`; `s` records the damping applied by
/// [`perturbed_residual`], and [`ResidualVector::entries`] returns `s^i F_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    pub beta: f64,
    pub s: f64,
    pub raw: Vec<f64>,
    pub integrals: Vec<f64>,
    pub abs_errors: Vec<f64>,
}

impl ResidualVector {
    pub fn window(&self) -> usize {
        self.raw.len() - 1
    }

    pub fn entries(&self) -> Vec<f64> {
        self.damped(self.s).collect()
    }

    pub(crate) fn damped(&self, s: f64) -> impl Iterator<Item = f64> + '_ {
        self.raw.iter().scan(1.0, move |w, &v| {
            let out = *w * v;
            *w *= s;
            Some(out)
        })
    }

    /// `‖F‖_∞` of the undamped residual.
    pub fn linf(&self) -> f64 {
        self.raw.iter().fold(0.0, |m, f| f64::max(m, f.abs()))
    }

    /// `‖F‖_2` of the undamped residual.
    pub fn l2(&self) -> f64 {
        self.raw.iter().map(|f| f * f).sum::<f64>().sqrt()
    }

    /// Largest quadrature error among the window's integrals.
    pub fn max_abs_error(&self) -> f64 {
        self.abs_errors.iter().fold(0.0, |m, &e| f64::max(m, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `Σ F_i²` over the window.
    pub e: f64,
    /// `Σ s^i F_i²`.
    pub e_s: f64,
    /// `sup s^i I_i`.
    pub g_s: f64,
    /// `sup s^i |F_i|`.
    pub h_s: f64,
}

pub fn check_beta(beta: f64) -> Result<(), BalanceError> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(BalanceError::Beta(beta))
    }
}

/// Default trusted window `⌊N/2⌋`.
pub fn default_window(order: usize) -> usize {
    order / 2
}

pub fn residual(
    lambda: &CoefficientSequence,
    beta: f64,
    window: usize,
    q: &QuadSettings,
) -> Result<ResidualVector, BalanceError> {
    residual_with(lambda, beta, window, q, Execution::default())
}

pub fn residual_with(
    lambda: &CoefficientSequence,
    beta: f64,
    window: usize,
    q: &QuadSettings,
    exec: Execution,
) -> Result<ResidualVector, BalanceError> {
    check_beta(beta)?;
    let limit = lambda.trunc_order() as isize - 2;
    if window as isize > limit {
        return Err(BalanceError::Window { window, limit });
    }
    let estimates = exec.map(window + 1, |i| {
        compute_i(lambda, i, q).map_err(|source| BalanceError::Quadrature { index: i, source })
    });
    let mut raw = Vec::with_capacity(window + 1);
    let mut integrals = Vec::with_capacity(window + 1);
    let mut abs_errors = Vec::with_capacity(window + 1);
    for (i, est) in estimates.into_iter().enumerate() {
        let est = est?;
        let delta = if i == 0 { beta } else { 0.0 };
        raw.push(est.value - 1.0 + delta);
        integrals.push(est.value);
        abs_errors.push(est.abs_error);
    }
    Ok(ResidualVector {
        beta,
        s: 1.0,
        raw,
        integrals,
        abs_errors,
    })
}

/// `F^s_i = s^i F_i`; `s = 1` leaves the residual unchanged.
pub fn perturbed_residual(f: &ResidualVector, s: f64) -> ResidualVector {
    ResidualVector {
        s: f.s * s,
        ..f.clone()
    }
}

pub fn energy(f: &ResidualVector, s: f64) -> EnergyReport {
    let e = f.raw.iter().map(|v| v * v).sum();
    let mut report = EnergyReport {
        e,
        ..EnergyReport::default()
    };
    let mut w = 1.0;
    for (&fi, &ii) in f.raw.iter().zip(&f.integrals) {
        report.e_s += w * fi * fi;
        report.h_s = report.h_s.max(w * fi.abs());
        report.g_s = report.g_s.max(w * ii);
        w *= s;
    }
    report
}

/// Both sides of the comparison inequalities at one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBounds {
    /// `‖λ − λ'‖_∞`.
    pub distance: f64,
    /// `I_i(λ)/I_i(λ')`.
    pub ratio: f64,
    /// `(e^{2d} − 1)·I_i(λ)`.
    pub fdiff_bound: f64,
    /// `|F_i(λ) − F_i(λ')|`.
    pub fdiff_actual: f64,
    /// Combined quadrature error of the two integrals.
    pub quad_error: f64,
}

impl ComparisonBounds {
    /// Signed slack of `e^{−2d} ≤ ratio ≤ e^{2d}` (the smaller of the two sides).
    pub fn ratio_margin(&self) -> f64 {
        let bound = (2.0 * self.distance).exp();
        (self.ratio - 1.0 / bound).min(bound - self.ratio)
    }

    pub fn fdiff_margin(&self) -> f64 {
        self.fdiff_bound - self.fdiff_actual
    }
}

pub fn comparison_bounds(
    lambda: &CoefficientSequence,
    other: &CoefficientSequence,
    i: usize,
    q: &QuadSettings,
) -> Result<ComparisonBounds, BalanceError> {
    let d = distance(lambda.values(), other.values(), Norm::Linf)?;
    let quad = |seq| compute_i(seq, i, q).map_err(|source| BalanceError::Quadrature { index: i, source });
    let a = quad(lambda)?;
    let b = quad(other)?;
    Ok(ComparisonBounds {
        distance: d,
        ratio: a.value / b.value,
        fdiff_bound: (2.0 * d).exp_m1() * a.value,
        fdiff_actual: (a.value - b.value).abs(),
        quad_error: a.abs_error + b.abs_error,
    })
}
