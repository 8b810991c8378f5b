//! Numerical checks of the balance identity `∫f(sx)/f(x)dx = 1/(1−s) − β`
//! and of the a priori inequalities satisfied by finite-energy sequences.
//!
//! None of the envelope constants are fixed in advance. Growth checks report
//! fitted rates; the inequality checks report signed margins so that a pass
//! can be judged against quadrature tolerance.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{comparison_bounds, BalanceError};
use crate::exec::Execution;
use crate::flow::FlowTrajectory;
use crate::quadrature::{
    compute_i, integral_exp_neg_u, integral_ratio, xf_prime_over_f, QuadError, QuadSettings,
};
use crate::seqspace::{
    distance, ln_factorial, make_reference, normalize, CoefficientSequence, Norm, SeqError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error("invalid diagnostic input: {0}")]
    Input(String),
}

/// One grid point of the balance identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePoint {
    pub s: f64,
    /// `∫ f(sx)/f(x) dx`, absent when quadrature failed.
    pub lhs: Option<f64>,
    /// `1/(1−s) − β`.
    pub rhs: f64,
    /// `|lhs − rhs|·(1−s)`.
    pub rel_err: f64,
    /// Truncation allowance `s^{N−1}·sup_i I_i`, on the same relative scale.
    pub tail_allowance: f64,
    pub failure: Option<String>,
}

impl BalancePoint {
    /// Relative error left after subtracting the tail allowance.
    pub fn excess(&self) -> f64 {
        (self.rel_err - self.tail_allowance).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub beta: f64,
    pub points: Vec<BalancePoint>,
    /// Largest [`BalancePoint::excess`] over successful points.
    pub max_rel_err: f64,
    /// `sup_{i ≤ N−2} I_i` used for the tail allowance.
    pub sup_integral: f64,
    pub window_note: String,
}

impl BalanceReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.points.iter().all(|p| p.failure.is_none()) && self.max_rel_err <= threshold
    }
}

/// The grid `{0.1, 0.3, 0.5, 0.7, 0.9}`.
pub fn default_s_grid() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9]
}

pub fn verify_balance(
    lambda: &CoefficientSequence,
    beta: f64,
    s_grid: &[f64],
    q: &QuadSettings,
) -> Result<BalanceReport, DiagError> {
    if let Some(bad) = s_grid.iter().find(|s| !(0.0..1.0).contains(*s)) {
        return Err(DiagError::Input(format!("s grid values must lie in [0, 1), got {bad}")));
    }
    let order = lambda.trunc_order();
    if order < 2 {
        return Err(DiagError::Input("balance check needs N >= 2".into()));
    }
    let exec = Execution::default();
    let sup_integral = exec
        .map(order - 1, |i| compute_i(lambda, i, q))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .fold(0.0f64, |m, e| m.max(e.value));
    let points: Vec<BalancePoint> = exec.map_slice(s_grid, |&s| {
        let rhs = 1.0 / (1.0 - s) - beta;
        let tail_allowance = s.powi(order as i32 - 1) * sup_integral;
        match integral_ratio(lambda, s, q) {
            Ok(est) => BalancePoint {
                s,
                lhs: Some(est.value),
                rhs,
                rel_err: (est.value - rhs).abs() * (1.0 - s),
                tail_allowance,
                failure: None,
            },
            Err(e) => BalancePoint {
                s,
                lhs: None,
                rhs,
                rel_err: f64::INFINITY,
                tail_allowance,
                failure: Some(e.to_string()),
            },
        }
    });
    let max_rel_err = points
        .iter()
        .filter(|p| p.failure.is_none())
        .fold(0.0f64, |m, p| m.max(p.excess()));
    Ok(BalanceReport {
        beta,
        points,
        max_rel_err,
        sup_integral,
        window_note: format!(
            "relative errors are net of s^(N-1)*sup I_i with N = {order}, sup I_i = {sup_integral:.6}"
        ),
    })
}

/// `(1−t)∫f((1−t)x)/f ≤ ∫e^{−t u(x)} ≤ ∫f(x/(1+t))/f` at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichPoint {
    pub t: f64,
    pub left: f64,
    pub middle: f64,
    pub right: f64,
    /// `middle − left`.
    pub lower_margin: f64,
    /// `right − middle`.
    pub upper_margin: f64,
    /// Combined quadrature error of the three integrals.
    pub quad_error: f64,
}

impl SandwichPoint {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower_margin >= -slack && self.upper_margin >= -slack
    }
}

pub fn sandwich_at(
    lambda: &CoefficientSequence,
    t: f64,
    q: &QuadSettings,
) -> Result<SandwichPoint, DiagError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(DiagError::Input(format!("sandwich requires 0 < t < 1, got {t}")));
    }
    let low = integral_ratio(lambda, 1.0 - t, q)?;
    let mid = integral_exp_neg_u(lambda, t, q)?;
    let high = integral_ratio(lambda, 1.0 / (1.0 + t), q)?;
    let left = (1.0 - t) * low.value;
    Ok(SandwichPoint {
        t,
        left,
        middle: mid.value,
        right: high.value,
        lower_margin: mid.value - left,
        upper_margin: high.value - mid.value,
        quad_error: (1.0 - t) * low.abs_error + mid.abs_error + high.abs_error,
    })
}

pub fn check_sandwich(
    lambda: &CoefficientSequence,
    t_grid: &[f64],
    q: &QuadSettings,
) -> Vec<Result<SandwichPoint, DiagError>> {
    Execution::default().map_slice(t_grid, |&t| sandwich_at(lambda, t, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lambda2Check {
    /// `margin = π/(2(1−β+F_0)) − e^{λ_2/2}` for the normalized sequence.
    Applicable { bound: f64, value: f64, margin: f64 },
    Inapplicable { denominator: f64 },
}

impl Lambda2Check {
    pub fn margin(&self) -> Option<f64> {
        match self {
            Lambda2Check::Applicable { margin, .. } => Some(*margin),
            Lambda2Check::Inapplicable { .. } => None,
        }
    }
}

/// The `e^{λ_2/2} ≤ π/(2(1−β+F_0))` bound. `λ` is normalized first.
pub fn check_lambda2(
    lambda: &CoefficientSequence,
    beta: f64,
    q: &QuadSettings,
) -> Result<Lambda2Check, DiagError> {
    if lambda.len() < 3 {
        return Err(DiagError::Input("need at least three coefficients".into()));
    }
    let lambda = normalize(lambda);
    let f0 = compute_i(&lambda, 0, q)?.value - 1.0 + beta;
    lambda2_from_f0(&lambda, beta, f0)
}

pub(crate) fn lambda2_from_f0(
    lambda: &CoefficientSequence,
    beta: f64,
    f0: f64,
) -> Result<Lambda2Check, DiagError> {
    let denominator = 1.0 - beta + f0;
    if !(denominator > 0.0) {
        return Ok(Lambda2Check::Inapplicable { denominator });
    }
    let bound = FRAC_PI_2 / denominator;
    let value = (0.5 * (lambda[2] - lambda[0])).exp();
    Ok(Lambda2Check::Applicable {
        bound,
        value,
        margin: bound - value,
    })
}

/// Fitted envelope rates `r_i = (λ_i + log Γ(i+1))/(i+1)` over `0..=window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub min_rate: f64,
    pub argmin: usize,
    pub max_rate: f64,
    pub argmax: usize,
    /// `max_{1≤i≤window} λ_i/i`, the log of the smallest base `C` with `e^{λ_i} ≤ C^i`.
    pub upper_log_base: f64,
}

/// Envelope fit for the normalized sequence; informational, no threshold.
pub fn check_growth(lambda: &CoefficientSequence, window: usize) -> GrowthFit {
    let lambda = normalize(lambda);
    let window = window.min(lambda.trunc_order());
    let mut fit = GrowthFit {
        min_rate: f64::INFINITY,
        argmin: 0,
        max_rate: f64::NEG_INFINITY,
        argmax: 0,
        upper_log_base: f64::NEG_INFINITY,
    };
    for i in 0..=window {
        let rate = (lambda[i] + ln_factorial(i)) / (i as f64 + 1.0);
        if rate < fit.min_rate {
            fit.min_rate = rate;
            fit.argmin = i;
        }
        if rate > fit.max_rate {
            fit.max_rate = rate;
            fit.argmax = i;
        }
        if i >= 1 {
            fit.upper_log_base = fit.upper_log_base.max(lambda[i] / i as f64);
        }
    }
    fit
}

/// Indices of trajectory records violating `‖F‖₂ ≤ β` or `‖λ(t) − λ(0)‖₂ ≤ βt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub failing_samples: Vec<usize>,
    pub failing_steps: Vec<usize>,
    /// `min (β − ‖F‖₂)` over samples and steps.
    pub worst_residual_margin: f64,
    /// `min (βt − ‖λ(t) − λ(0)‖₂)` over samples and steps.
    pub worst_drift_margin: f64,
}

impl DriftCheck {
    pub fn ok(&self) -> bool {
        self.failing_samples.is_empty() && self.failing_steps.is_empty()
    }
}

pub fn check_drift(traj: &FlowTrajectory, beta: f64, slack: f64) -> DriftCheck {
    let mut check = DriftCheck {
        failing_samples: Vec::new(),
        failing_steps: Vec::new(),
        worst_residual_margin: f64::INFINITY,
        worst_drift_margin: f64::INFINITY,
    };
    let Some(first) = traj.samples.first() else {
        return check;
    };
    let origin = first.lambda.values();
    let mut judge = |t: f64, f_l2: f64, drift: f64| {
        let rm = beta - f_l2;
        let dm = beta * t - drift;
        check.worst_residual_margin = check.worst_residual_margin.min(rm);
        check.worst_drift_margin = check.worst_drift_margin.min(dm);
        rm < -slack || dm < -slack
    };
    let mut bad_samples = Vec::new();
    for (k, sample) in traj.samples.iter().enumerate() {
        let drift = distance(sample.lambda.values(), origin, Norm::L2).unwrap_or(f64::INFINITY);
        if judge(sample.t, sample.residual.l2(), drift) {
            bad_samples.push(k);
        }
    }
    let mut bad_steps = Vec::new();
    for (k, step) in traj.steps.iter().enumerate() {
        if judge(step.t, step.e.sqrt(), step.drift_l2) {
            bad_steps.push(k);
        }
    }
    check.failing_samples = bad_samples;
    check.failing_steps = bad_steps;
    check
}

/// Worst signed margin over a batch of probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub probes: usize,
    pub failures: usize,
    /// Worst margin divided by the tolerance it was judged against.
    pub worst_scaled_margin: f64,
    pub worst_margin: f64,
}

impl ProbeSummary {
    fn new() -> Self {
        Self {
            probes: 0,
            failures: 0,
            worst_scaled_margin: f64::INFINITY,
            worst_margin: f64::INFINITY,
        }
    }

    fn add(&mut self, margin: f64, tolerance: f64) {
        self.probes += 1;
        if margin < -tolerance {
            self.failures += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
        self.worst_scaled_margin = self.worst_scaled_margin.min(margin / tolerance);
    }

    fn add_error(&mut self) {
        self.probes += 1;
        self.failures += 1;
    }

    pub fn ok(&self) -> bool {
        self.failures == 0 && self.probes > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub count: usize,
    pub seed: u64,
    pub order: usize,
    /// Random sequences are `λ̄ + U(−p, p)` entrywise.
    pub max_perturbation: f64,
    /// Comparison pairs differ by at most this in ℓ∞.
    pub max_pair_distance: f64,
    /// Comparison indices are drawn from `0..=max_index`.
    pub max_index: usize,
    /// Margins must be ≥ `−slack_factor × tolerance`.
    pub slack_factor: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0x5eed,
            order: 40,
            max_perturbation: 0.5,
            max_pair_distance: 0.5,
            max_index: 10,
            slack_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub monotone_u: ProbeSummary,
    pub ratio_bound: ProbeSummary,
    pub fdiff_bound: ProbeSummary,
    pub sandwich: ProbeSummary,
}

impl ProbeReport {
    pub fn ok(&self) -> bool {
        self.monotone_u.ok() && self.ratio_bound.ok() && self.fdiff_bound.ok() && self.sandwich.ok()
    }
}

struct ProbeInput {
    lambda: CoefficientSequence,
    other: CoefficientSequence,
    index: usize,
    x1: f64,
    x2: f64,
    t: f64,
}

enum ProbeOutcome {
    Margins {
        monotone: (f64, f64),
        ratio: (f64, f64),
        fdiff: (f64, f64),
        sandwich: (f64, f64),
    },
    Failed,
}

/// Randomized probes of monotone `u`, both comparison bounds, and the sandwich.
pub fn run_probes(
    settings: &ProbeSettings,
    q: &QuadSettings,
    exec: Execution,
) -> Result<ProbeReport, DiagError> {
    let reference = make_reference(settings.order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let p = settings.max_perturbation;
    let inputs: Vec<ProbeInput> = (0..settings.count)
        .map(|_| {
            let values: Vec<f64> = reference
                .values()
                .iter()
                .map(|v| v + rng.random_range(-p..=p))
                .collect();
            let d = rng.random_range(0.0..=settings.max_pair_distance);
            let other_values: Vec<f64> = values.iter().map(|v| v + rng.random_range(-d..=d)).collect();
            let a = 10f64.powf(rng.random_range(-3.0..2.0));
            let b = 10f64.powf(rng.random_range(-3.0..2.0));
            ProbeInput {
                lambda: CoefficientSequence::new(values).expect("finite"),
                other: CoefficientSequence::new(other_values).expect("finite"),
                index: rng.random_range(0..=settings.max_index.min(settings.order - 2)),
                x1: a.min(b),
                x2: a.max(b),
                t: rng.random_range(0.05..0.95),
            }
        })
        .collect();
    let slack = settings.slack_factor;
    let outcomes = exec.map_slice(&inputs, |inp| {
        let eval = || -> Result<ProbeOutcome, DiagError> {
            let u1 = xf_prime_over_f(&inp.lambda, inp.x1)?;
            let u2 = xf_prime_over_f(&inp.lambda, inp.x2)?;
            let cmp = comparison_bounds(&inp.lambda, &inp.other, inp.index, q)?;
            let sw = sandwich_at(&inp.lambda, inp.t, q)?;
            let scale = |v: f64| slack * q.tolerance_for(v);
            let ratio_bound = (2.0 * cmp.distance).exp();
            Ok(ProbeOutcome::Margins {
                // x1 == x2 can occur; equality is then exact.
                monotone: (u2 - u1, scale(u2)),
                ratio: (cmp.ratio_margin(), scale(ratio_bound)),
                fdiff: (cmp.fdiff_margin(), scale(cmp.fdiff_bound)),
                sandwich: (sw.lower_margin.min(sw.upper_margin), scale(sw.right)),
            })
        };
        eval().unwrap_or(ProbeOutcome::Failed)
    });
    let mut report = ProbeReport {
        monotone_u: ProbeSummary::new(),
        ratio_bound: ProbeSummary::new(),
        fdiff_bound: ProbeSummary::new(),
        sandwich: ProbeSummary::new(),
    };
    for outcome in outcomes {
        match outcome {
            ProbeOutcome::Margins {
                monotone,
                ratio,
                fdiff,
                sandwich,
            } => {
                report.monotone_u.add(monotone.0, monotone.1);
                report.ratio_bound.add(ratio.0, ratio.1);
                report.fdiff_bound.add(fdiff.0, fdiff.1);
                report.sandwich.add(sandwich.0, sandwich.1);
            }
            ProbeOutcome::Failed => {
                report.monotone_u.add_error();
                report.ratio_bound.add_error();
                report.fdiff_bound.add_error();
                report.sandwich.add_error();
            }
        }
    }
    Ok(report)
}

/// λ₂ bound at every sample of a trajectory; `None` entries were inapplicable.
pub fn lambda2_along(traj: &FlowTrajectory) -> Vec<Option<f64>> {
    traj.samples
        .iter()
        .map(|sample| {
            let lambda = normalize(&sample.lambda);
            lambda2_from_f0(&lambda, traj.beta, sample.residual.raw[0])
                .ok()
                .and_then(|c| c.margin())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub u_monotone_ok: bool,
    pub u_monotone_worst: f64,
    pub sandwich_ok: bool,
    pub sandwich_worst_margin: f64,
    pub lambda2_ok: bool,
    pub lambda2_margin: Option<f64>,
    pub growth: GrowthFit,
    /// Present when a trajectory was supplied.
    pub drift_ok: Option<bool>,
}

/// Deterministic monotonicity check of `u` on a log-spaced grid.
pub fn check_u_monotone(lambda: &CoefficientSequence, points: usize) -> Result<f64, DiagError> {
    let xs: Vec<f64> = (0..points)
        .map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / (points.max(2) - 1) as f64))
        .collect();
    let us = xs
        .iter()
        .map(|&x| xf_prime_over_f(lambda, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(us
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min))
}

/// Gathers the inequality checks for one sequence.
pub fn bounds_report(
    lambda: &CoefficientSequence,
    beta: f64,
    window: usize,
    t_grid: &[f64],
    trajectory: Option<&FlowTrajectory>,
    q: &QuadSettings,
) -> Result<BoundsReport, DiagError> {
    let u_monotone_worst = check_u_monotone(lambda, 400)?;
    let sandwich = check_sandwich(lambda, t_grid, q)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let sandwich_ok = sandwich
        .iter()
        .all(|p| p.holds(10.0 * q.tolerance_for(p.right)));
    let sandwich_worst_margin = sandwich
        .iter()
        .map(|p| p.lower_margin.min(p.upper_margin))
        .fold(f64::INFINITY, f64::min);
    let l2 = check_lambda2(lambda, beta, q)?;
    Ok(BoundsReport {
        u_monotone_ok: u_monotone_worst > 0.0,
        u_monotone_worst,
        sandwich_ok,
        sandwich_worst_margin,
        lambda2_ok: l2.margin().is_none_or(|m| m >= 0.0),
        lambda2_margin: l2.margin(),
        growth: check_growth(lambda, window),
        drift_ok: trajectory.map(|t| check_drift(t, beta, 1e-6).ok()),
    })
}
