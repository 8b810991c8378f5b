//! Time integration of the damped gradient flow `dλ/dt = −F^s(λ)`.
//!
//! Only the active window `0..=M` moves; higher indices keep their initial
//! values. Steps come from a Dormand–Prince 5(4) pair with an embedded error
//! estimate, and a step is also rejected when it raises `E_s` by more than
//! `ode_rel_tol·(1 + E_s)`, since the exact flow never does.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{
    check_beta, default_window, energy, residual_with, BalanceError, EnergyReport, ResidualVector,
};
use crate::exec::Execution;
use crate::quadrature::QuadSettings;
use crate::seqspace::{distance, normalize, CoefficientSequence, Norm, MIN_TRUNCATION};

/// Smallest step size before the integrator gives up.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("step failure at t = {t}: {reason}")]
    StepFailure {
        t: f64,
        reason: String,
        trajectory: Box<FlowTrajectory>,
    },
    #[error("trajectory did not converge (status {0:?})")]
    NotConverged(FlowStatus),
    #[error("false convergence: tightened residual {linf:.3e} exceeds {threshold:.3e}")]
    FalseConvergence { linf: f64, threshold: f64 },
}

/// When full samples (λ, residual, energy) are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSchedule {
    /// `0, first, first·ratio, first·ratio², …` plus the final time.
    Geometric { first: f64, ratio: f64 },
    /// Explicit increasing times; `0` and the final time are always added.
    Grid(Vec<f64>),
}

impl Default for SampleSchedule {
    fn default() -> Self {
        SampleSchedule::Geometric {
            first: 0.01,
            ratio: 2f64.powf(0.25),
        }
    }
}

impl SampleSchedule {
    fn times(&self, t_max: f64) -> Vec<f64> {
        let mut out = match self {
            SampleSchedule::Geometric { first, ratio } => {
                let mut v = Vec::new();
                let mut t = *first;
                while t < t_max {
                    v.push(t);
                    t *= ratio;
                }
                v
            }
            SampleSchedule::Grid(g) => g.iter().copied().filter(|&t| t > 0.0 && t < t_max).collect(),
        };
        out.push(t_max);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub beta: f64,
    pub s: f64,
    pub window: usize,
    pub t_max: f64,
    /// ℓ∞ residual threshold on the window.
    pub f_tol: f64,
    pub ode_rel_tol: f64,
    pub quad: QuadSettings,
    pub initial: CoefficientSequence,
    pub samples: SampleSchedule,
    /// Stop as soon as the window residual drops below `f_tol`.
    pub stop_on_converged: bool,
    /// First trial step; `None` uses [`initial_step`].
    pub first_step: Option<f64>,
    pub execution: Execution,
}

impl FlowConfig {
    /// Defaults: `s = 0.95`, `M = ⌊N/2⌋`, `f_tol = 1e-6`, `ode_rel_tol = 1e-8`,
    /// `t_max = 1000`.
    pub fn new(beta: f64, initial: CoefficientSequence) -> Self {
        Self {
            beta,
            s: 0.95,
            window: default_window(initial.trunc_order()),
            t_max: 1000.0,
            f_tol: 1e-6,
            ode_rel_tol: 1e-8,
            quad: QuadSettings::default(),
            initial,
            samples: SampleSchedule::default(),
            stop_on_converged: true,
            first_step: None,
            execution: Execution::default(),
        }
    }

    pub fn order(&self) -> usize {
        self.initial.trunc_order()
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Config(m));
        check_beta(self.beta)?;
        if !(self.s > 0.0 && self.s <= 1.0) {
            return bad(format!("s must lie in (0, 1], got {}", self.s));
        }
        let n = self.order();
        if n < MIN_TRUNCATION {
            return bad(format!("truncation order {n} is below {MIN_TRUNCATION}"));
        }
        if self.window + 2 > n {
            return bad(format!("window {} exceeds N-2 = {}", self.window, n - 2));
        }
        if !(self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.f_tol > 0.0) || !(self.ode_rel_tol > 0.0) {
            return bad("f_tol and ode_rel_tol must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    TimeOut,
    StepFailure,
}

/// Full state at a recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub lambda: CoefficientSequence,
    pub residual: ResidualVector,
    pub energy: EnergyReport,
}

/// Scalars logged at every accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub e: f64,
    pub e_s: f64,
    pub linf: f64,
    /// `‖λ(t) − λ(0)‖₂`.
    pub drift_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub beta: f64,
    pub s: f64,
    pub window: usize,
    pub f_tol: f64,
    pub samples: Vec<FlowSample>,
    pub steps: Vec<StepRecord>,
    pub rejected: usize,
    pub status: FlowStatus,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory holds the initial sample")
    }

    pub fn initial(&self) -> &FlowSample {
        &self.samples[0]
    }

    /// Finite-difference `dE/dt` over the last two accepted steps.
    pub fn final_energy_rate(&self) -> Option<f64> {
        let n = self.steps.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (self.steps[n - 2], self.steps[n - 1]);
        Some((b.e - a.e) / (b.t - a.t))
    }
}

/// `b = (3 H_s + 100 G_s)^{-1}` at `λ0`.
pub fn initial_step(
    lambda0: &CoefficientSequence,
    beta: f64,
    s: f64,
    window: usize,
    q: &QuadSettings,
) -> Result<f64, FlowError> {
    let r = residual_with(lambda0, beta, window, q, Execution::default())?;
    Ok(step_from_energy(&energy(&r, s)))
}

fn step_from_energy(e: &EnergyReport) -> f64 {
    1.0 / (3.0 * e.h_s + 100.0 * e.g_s)
}

// Dormand–Prince 5(4).
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Evaluated field at one state: velocity on the window plus the residual.
#[derive(Debug, Clone)]
struct FieldPoint {
    y: Vec<f64>,
    velocity: Vec<f64>,
    residual: ResidualVector,
    energy: EnergyReport,
}

struct Field<'a> {
    cfg: &'a FlowConfig,
}

impl Field<'_> {
    fn eval(&self, y: &[f64]) -> Result<FieldPoint, BalanceError> {
        let lambda = self.cfg.initial.with_head(y);
        let residual = residual_with(
            &lambda,
            self.cfg.beta,
            self.cfg.window,
            &self.cfg.quad,
            self.cfg.execution,
        )?;
        let velocity = residual.damped(self.cfg.s).map(|f| -f).collect();
        let energy = energy(&residual, self.cfg.s);
        Ok(FieldPoint {
            y: y.to_vec(),
            velocity,
            residual,
            energy,
        })
    }
}

/// Result of one accepted adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub lambda_next: CoefficientSequence,
    pub h_used: f64,
    pub h_next: f64,
    /// Scaled embedded error estimate of the accepted step (≤ 1).
    pub err_est: f64,
    pub residual_next: ResidualVector,
    pub energy_next: EnergyReport,
    pub rejected: usize,
}

enum Attempt {
    Accepted { next: FieldPoint, err: f64 },
    Rejected { err: f64 },
}

fn attempt(field: &Field<'_>, at: &FieldPoint, h: f64) -> Result<Attempt, BalanceError> {
    let dim = at.y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(at.velocity.clone());
    let mut last = None;
    for stage in 1..7 {
        let mut y = at.y.clone();
        for (j, &a) in A[stage].iter().enumerate() {
            if a != 0.0 {
                for (yi, kj) in y.iter_mut().zip(&k[j]) {
                    *yi += h * a * kj;
                }
            }
        }
        let point = field.eval(&y)?;
        k.push(point.velocity.clone());
        if stage == 6 {
            last = Some(point);
        }
    }
    let next = last.expect("seven stages");
    let tol = field.cfg.ode_rel_tol;
    let mut err: f64 = 0.0;
    for i in 0..dim {
        let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
        let scale = tol * (1.0 + at.y[i].abs().max(next.y[i].abs()));
        err = err.max(e.abs() / scale);
    }
    if err > 1.0 {
        return Ok(Attempt::Rejected { err });
    }
    let slack = tol * (1.0 + at.energy.e_s);
    if next.energy.e_s > at.energy.e_s + slack {
        // Force a smaller step even though the error test passed.
        return Ok(Attempt::Rejected { err: f64::INFINITY });
    }
    Ok(Attempt::Accepted { next, err })
}

fn grow_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Repeats step attempts from `at` until one is accepted, shrinking `h`.
fn advance(
    field: &Field<'_>,
    at: &FieldPoint,
    mut h: f64,
) -> Result<(FieldPoint, f64, f64, f64, usize), String> {
    let mut rejected = 0;
    loop {
        if h < MIN_STEP {
            return Err(format!("step size {h:.3e} fell below {MIN_STEP:.0e}"));
        }
        match attempt(field, at, h).map_err(|e| e.to_string())? {
            Attempt::Accepted { next, err } => {
                return Ok((next, h, h * grow_factor(err), err, rejected));
            }
            Attempt::Rejected { err } => {
                rejected += 1;
                h *= if err.is_finite() { grow_factor(err).min(0.9) } else { 0.5 };
            }
        }
    }
}

/// One accepted adaptive step of size at most `h` from `lambda`.
pub fn step(lambda: &CoefficientSequence, h: f64, cfg: &FlowConfig) -> Result<StepOutcome, FlowError> {
    if !(h > 0.0) {
        return Err(FlowError::Config(format!("step size must be positive, got {h}")));
    }
    let cfg = FlowConfig {
        initial: lambda.clone(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let field = Field { cfg: &cfg };
    let start = field.eval(&lambda.values()[..=cfg.window])?;
    let (next, h_used, h_next, err_est, rejected) =
        advance(&field, &start, h).map_err(|reason| FlowError::StepFailure {
            t: 0.0,
            reason,
            trajectory: Box::new(empty_trajectory(&cfg, FlowStatus::StepFailure)),
        })?;
    Ok(StepOutcome {
        lambda_next: cfg.initial.with_head(&next.y),
        h_used,
        h_next,
        err_est,
        residual_next: next.residual,
        energy_next: next.energy,
        rejected,
    })
}

fn empty_trajectory(cfg: &FlowConfig, status: FlowStatus) -> FlowTrajectory {
    FlowTrajectory {
        beta: cfg.beta,
        s: cfg.s,
        window: cfg.window,
        f_tol: cfg.f_tol,
        samples: Vec::new(),
        steps: Vec::new(),
        rejected: 0,
        status,
    }
}

/// Integrates from `cfg.initial` until the window residual is below `f_tol`
/// or `t_max` is reached.
pub fn integrate(cfg: &FlowConfig) -> Result<FlowTrajectory, FlowError> {
    cfg.validate()?;
    let field = Field { cfg };
    let y0 = cfg.initial.values()[..=cfg.window].to_vec();
    let mut at = field.eval(&y0)?;
    let mut traj = empty_trajectory(cfg, FlowStatus::TimeOut);

    let record_sample = |traj: &mut FlowTrajectory, t: f64, p: &FieldPoint| {
        traj.samples.push(FlowSample {
            t,
            lambda: cfg.initial.with_head(&p.y),
            residual: p.residual.clone(),
            energy: p.energy,
        });
    };
    let record_step = |traj: &mut FlowTrajectory, t: f64, h: f64, p: &FieldPoint| {
        traj.steps.push(StepRecord {
            t,
            h,
            e: p.energy.e,
            e_s: p.energy.e_s,
            linf: p.residual.linf(),
            drift_l2: distance(&p.y, &y0, Norm::L2).expect("same window"),
        });
    };

    let mut t = 0.0;
    record_sample(&mut traj, t, &at);
    record_step(&mut traj, t, 0.0, &at);
    if cfg.stop_on_converged && at.residual.linf() < cfg.f_tol {
        traj.status = FlowStatus::Converged;
        return Ok(traj);
    }

    let sample_times = cfg.samples.times(cfg.t_max);
    let mut next_sample = 0;
    let mut h = cfg.first_step.unwrap_or_else(|| step_from_energy(&at.energy));
    loop {
        let target = sample_times[next_sample];
        // Stretch by a hair rather than leave a sliver before the sample.
        let clamped = h >= (target - t) * (1.0 - 1e-9);
        let h_try = if clamped { target - t } else { h };
        let (next, h_used, h_next, _err, rejected) = match advance(&field, &at, h_try) {
            Ok(v) => v,
            Err(reason) => {
                traj.status = FlowStatus::StepFailure;
                return Err(FlowError::StepFailure {
                    t,
                    reason,
                    trajectory: Box::new(traj),
                });
            }
        };
        traj.rejected += rejected;
        let hit = (clamped && h_used == h_try) || target - (t + h_used) <= 1e-12 * target.max(1.0);
        t = if hit { target } else { t + h_used };
        at = next;
        h = if hit { h.max(h_next) } else { h_next };
        record_step(&mut traj, t, h_used, &at);

        let converged = cfg.stop_on_converged && at.residual.linf() < cfg.f_tol;
        if hit {
            record_sample(&mut traj, t, &at);
            next_sample += 1;
        } else if converged {
            record_sample(&mut traj, t, &at);
        }
        if converged {
            traj.status = FlowStatus::Converged;
            return Ok(traj);
        }
        if next_sample == sample_times.len() {
            traj.status = if !cfg.stop_on_converged && at.residual.linf() < cfg.f_tol {
                FlowStatus::Converged
            } else {
                FlowStatus::TimeOut
            };
            return Ok(traj);
        }
    }
}

/// The normalized end state of a converged run, rechecked at `rel_tol/100`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergedSequence {
    pub lambda: CoefficientSequence,
    pub residual: ResidualVector,
}

pub fn converged_sequence(
    traj: &FlowTrajectory,
    q: &QuadSettings,
) -> Result<ConvergedSequence, FlowError> {
    if traj.status != FlowStatus::Converged {
        return Err(FlowError::NotConverged(traj.status));
    }
    let lambda = normalize(&traj.last().lambda);
    let residual = residual_with(&lambda, traj.beta, traj.window, &q.tightened(100.0), Execution::default())?;
    let threshold = 10.0 * traj.f_tol;
    if residual.linf() > threshold {
        return Err(FlowError::FalseConvergence {
            linf: residual.linf(),
            threshold,
        });
    }
    Ok(ConvergedSequence { lambda, residual })
}

/// Settings for comparing trajectories at several `s` on a shared grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Integrate on `[0, horizon]`.
    pub horizon: f64,
    pub grid_intervals: usize,
    /// Compare indices `0..=compare_window`.
    pub compare_window: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            grid_intervals: 50,
            compare_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub s: f64,
    pub trajectory: Option<FlowTrajectory>,
    pub failure: Option<String>,
}

/// `max_t |λ_i^{s_a}(t) − λ_i^{s_b}(t)|` per index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyDistance {
    pub s_a: f64,
    pub s_b: f64,
    pub per_index: Vec<f64>,
}

impl CauchyDistance {
    pub fn max(&self) -> f64 {
        self.per_index.iter().fold(0.0, |m, &d| f64::max(m, d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub members: Vec<SweepMember>,
    pub distances: Vec<CauchyDistance>,
}

impl SweepReport {
    pub fn complete(&self) -> bool {
        self.members.iter().all(|m| m.failure.is_none())
    }
}

pub fn s_sweep(
    template: &FlowConfig,
    s_list: &[f64],
    settings: &SweepSettings,
) -> Result<SweepReport, FlowError> {
    if s_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FlowError::Config("s_list must be strictly increasing".into()));
    }
    if let Some(bad) = s_list.iter().find(|&&s| !(s > 0.0 && s < 1.0)) {
        return Err(FlowError::Config(format!("sweep values must lie in (0, 1), got {bad}")));
    }
    if !(settings.horizon > 0.0) || settings.grid_intervals == 0 {
        return Err(FlowError::Config("sweep needs a positive horizon and grid".into()));
    }
    let grid: Vec<f64> = (1..settings.grid_intervals)
        .map(|k| settings.horizon * k as f64 / settings.grid_intervals as f64)
        .collect();
    let members = template.execution.map_slice(s_list, |&s| {
        let cfg = FlowConfig {
            s,
            t_max: settings.horizon,
            samples: SampleSchedule::Grid(grid.clone()),
            stop_on_converged: false,
            ..template.clone()
        };
        match integrate(&cfg) {
            Ok(traj) => SweepMember {
                s,
                trajectory: Some(traj),
                failure: None,
            },
            Err(e) => SweepMember {
                s,
                trajectory: None,
                failure: Some(e.to_string()),
            },
        }
    });
    let m0 = settings.compare_window.min(template.window);
    let distances = members
        .windows(2)
        .filter_map(|pair| {
            let (a, b) = (pair[0].trajectory.as_ref()?, pair[1].trajectory.as_ref()?);
            let mut per_index = vec![0.0f64; m0 + 1];
            for (sa, sb) in a.samples.iter().zip(&b.samples) {
                debug_assert_eq!(sa.t, sb.t);
                for (i, d) in per_index.iter_mut().enumerate() {
                    *d = d.max((sa.lambda[i] - sb.lambda[i]).abs());
                }
            }
            Some(CauchyDistance {
                s_a: pair[0].s,
                s_b: pair[1].s,
                per_index,
            })
        })
        .collect();
    Ok(SweepReport { members, distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspace::make_reference;

    fn reference(n: usize) -> CoefficientSequence {
        make_reference(n).unwrap().into_sequence()
    }

    #[test]
    fn initial_step_formula() {
        let q = QuadSettings::default();
        let lam = reference(20);
        let b = initial_step(&lam, 0.25, 0.9, 10, &q).unwrap();
        assert!((b - 1.0 / 100.75).abs() < 1e-10, "{b}");
        let b0 = initial_step(&lam, 0.0, 0.9, 10, &q).unwrap();
        assert!((b0 - 0.01).abs() < 1e-10);
        let doubled = EnergyReport {
            g_s: 2.0,
            h_s: 0.25,
            ..Default::default()
        };
        assert!(step_from_energy(&doubled) < b);
    }

    #[test]
    fn stationary_at_reference() {
        let lam = reference(20);
        let cfg = FlowConfig::new(0.0, lam.clone());
        let out = step(&lam, 0.5, &cfg).unwrap();
        let d = distance(out.lambda_next.values(), lam.values(), Norm::Linf).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn euler_direction_at_reference() {
        let lam = reference(20);
        let mut cfg = FlowConfig::new(0.25, lam.clone());
        cfg.s = 0.9;
        let h = 1e-3;
        let out = step(&lam, h, &cfg).unwrap();
        assert_eq!(out.h_used, h);
        let euler = lam[0] - h * 0.25;
        assert!((out.lambda_next[0] - euler).abs() < 1e-5, "{}", out.lambda_next[0]);
        assert!(out.lambda_next[0] < lam[0]);
        assert!(out.energy_next.e_s <= 0.0625 + 1e-8);
    }

    #[test]
    fn zero_beta_converges_immediately() {
        let cfg = FlowConfig::new(0.0, reference(20));
        let traj = integrate(&cfg).unwrap();
        assert_eq!(traj.status, FlowStatus::Converged);
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.samples[0].t, 0.0);
        let conv = converged_sequence(&traj, &cfg.quad).unwrap();
        assert_eq!(conv.lambda, normalize(&reference(20)));
        assert!(conv.residual.linf() < 1e-10);
    }

    #[test]
    fn time_out_is_not_converged() {
        let mut cfg = FlowConfig::new(0.3, reference(12));
        cfg.t_max = 0.05;
        let traj = integrate(&cfg).unwrap();
        assert_eq!(traj.status, FlowStatus::TimeOut);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.last().t, 0.05);
        assert_eq!(
            converged_sequence(&traj, &cfg.quad),
            Err(FlowError::NotConverged(FlowStatus::TimeOut))
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = FlowConfig::new(0.3, reference(12));
        cfg.window = 11;
        assert!(matches!(cfg.validate(), Err(FlowError::Config(_))));
        cfg.window = 6;
        cfg.s = 0.0;
        assert!(cfg.validate().is_err());
        cfg.s = 1.0;
        assert!(cfg.validate().is_ok());
        cfg.beta = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_edge_cases() {
        let cfg = FlowConfig::new(0.0, reference(12));
        let settings = SweepSettings {
            horizon: 1.0,
            grid_intervals: 4,
            compare_window: 4,
        };
        let single = s_sweep(&cfg, &[0.9], &settings).unwrap();
        assert!(single.distances.is_empty());
        let flat = s_sweep(&cfg, &[0.5, 0.9], &settings).unwrap();
        assert_eq!(flat.distances.len(), 1);
        assert!(flat.distances[0].max() < 1e-9);
        assert!(s_sweep(&cfg, &[0.9, 0.5], &settings).is_err());
        assert!(s_sweep(&cfg, &[0.5, 1.0], &settings).is_err());
    }
}
