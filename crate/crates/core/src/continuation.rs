//! Reaching large `β` by continuation: each stage solves at `β_n` starting
//! from the normalized solution at `β_{n−1}`, with
//! `β_{n+1} = min((1 + β_n − δ)/2, β_target)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{default_s_grid, verify_balance, BalanceReport, DiagError};
use crate::flow::{converged_sequence, integrate, ConvergedSequence, FlowConfig, FlowError, FlowStatus};
use crate::quadrature::QuadSettings;
use crate::seqspace::{make_reference, normalize, CoefficientSequence, SeqError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error("target beta {target} is not below 1 - delta = {limit}")]
    UnreachableTarget { target: f64, limit: f64 },
    #[error("invalid continuation plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error("stage {stage} (beta = {beta}) failed: {source}")]
    Stage {
        stage: usize,
        beta: f64,
        source: FlowError,
        partial: Box<ContinuationResult>,
    },
    #[error("final balance check failed (max relative error {max_rel_err:.3e})")]
    Imbalance {
        max_rel_err: f64,
        result: Box<ContinuationResult>,
    },
    #[error(transparent)]
    Diagnostics(#[from] DiagError),
}

/// Continuation schedule from `start` to `target`.
pub fn beta_schedule(delta: f64, target: f64, start: f64) -> Result<Vec<f64>, ContinuationError> {
    if !(delta > 0.0) {
        return Err(ContinuationError::Plan(format!("delta must be positive, got {delta}")));
    }
    if !(0.0..=target).contains(&start) {
        return Err(ContinuationError::Plan(format!(
            "start beta {start} must lie in [0, target = {target}]"
        )));
    }
    let limit = 1.0 - delta;
    if target >= limit {
        return Err(ContinuationError::UnreachableTarget { target, limit });
    }
    let mut schedule = vec![start];
    let mut beta = start;
    while beta < target {
        beta = ((1.0 + beta - delta) / 2.0).min(target);
        schedule.push(beta);
    }
    Ok(schedule)
}

/// Settings that differ between stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOverride {
    pub t_max: Option<f64>,
    pub s: Option<f64>,
    pub f_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationPlan {
    pub delta: f64,
    pub beta_target: f64,
    pub schedule: Vec<f64>,
    /// Stage template; `beta` and `initial` are replaced per stage. The
    /// template's `initial` is used for stage 0.
    pub base: FlowConfig,
    /// Indexed by stage; missing entries use `base` unchanged.
    pub overrides: Vec<StageOverride>,
    /// Threshold for the final balance check.
    pub balance_threshold: f64,
    pub s_grid: Vec<f64>,
}

impl ContinuationPlan {
    /// Plan with `δ = 0.05`, `β_start = min(β_target, 0.4)` and the reference
    /// sequence of order `order` as stage-0 input.
    pub fn new(beta_target: f64, order: usize) -> Result<Self, ContinuationError> {
        let delta = 0.05;
        let schedule = beta_schedule(delta, beta_target, beta_target.min(0.4))?;
        let initial = make_reference(order)?.into_sequence();
        Ok(Self {
            delta,
            beta_target,
            base: FlowConfig::new(schedule[0], initial),
            schedule,
            overrides: Vec::new(),
            balance_threshold: 1e-4,
            s_grid: default_s_grid(),
        })
    }

    /// Rebuilds the schedule for new `delta`/`start`.
    pub fn reschedule(&mut self, delta: f64, start: f64) -> Result<(), ContinuationError> {
        self.schedule = beta_schedule(delta, self.beta_target, start)?;
        self.delta = delta;
        Ok(())
    }

    fn validate(&self) -> Result<(), ContinuationError> {
        let Some(&first) = self.schedule.first() else {
            return Err(ContinuationError::Plan("empty schedule".into()));
        };
        if first > 0.5 - self.delta {
            return Err(ContinuationError::Plan(format!(
                "first stage beta {first} exceeds 1/2 - delta = {}",
                0.5 - self.delta
            )));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ContinuationError::Plan("schedule must be strictly increasing".into()));
        }
        if self.schedule.last() != Some(&self.beta_target) {
            return Err(ContinuationError::Plan("schedule must end at the target".into()));
        }
        Ok(())
    }

    fn stage_config(&self, stage: usize, beta: f64, initial: CoefficientSequence) -> FlowConfig {
        let o = self.overrides.get(stage).copied().unwrap_or_default();
        FlowConfig {
            beta,
            initial,
            t_max: o.t_max.unwrap_or(self.base.t_max),
            s: o.s.unwrap_or(self.base.s),
            f_tol: o.f_tol.unwrap_or(self.base.f_tol),
            stop_on_converged: true,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub beta: f64,
    /// Window energy `E` of the initial sequence at this stage's `β`.
    pub start_energy: f64,
    /// `‖F‖_∞` of the initial sequence.
    pub start_linf: f64,
    pub end_time: f64,
    pub steps: usize,
    pub rejected: usize,
    pub status: FlowStatus,
    pub final_linf: f64,
    /// Normalized solution, present once the stage has converged.
    pub solution: Option<ConvergedSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationResult {
    /// Normalized solution at the last converged stage (the start sequence
    /// if none converged).
    pub lambda: CoefficientSequence,
    /// `β` of `lambda`, `None` if no stage converged.
    pub beta: Option<f64>,
    pub stages: Vec<StageReport>,
    pub balance: Option<BalanceReport>,
}

pub fn continue_solve(plan: &ContinuationPlan) -> Result<ContinuationResult, ContinuationError> {
    plan.validate()?;
    let mut result = ContinuationResult {
        lambda: normalize(&plan.base.initial),
        beta: None,
        stages: Vec::new(),
        balance: None,
    };
    for (stage, &beta) in plan.schedule.iter().enumerate() {
        let cfg = plan.stage_config(stage, beta, result.lambda.clone());
        let fail = |source: FlowError, result: ContinuationResult| ContinuationError::Stage {
            stage,
            beta,
            source,
            partial: Box::new(result),
        };
        let traj = match integrate(&cfg) {
            Ok(t) => t,
            Err(e) => return Err(fail(e, result)),
        };
        let first = traj.initial();
        let last = traj.last();
        result.stages.push(StageReport {
            stage,
            beta,
            start_energy: first.energy.e,
            start_linf: first.residual.linf(),
            end_time: last.t,
            steps: traj.steps.len() - 1,
            rejected: traj.rejected,
            status: traj.status,
            final_linf: last.residual.linf(),
            solution: None,
        });
        match converged_sequence(&traj, &cfg.quad) {
            Ok(c) => {
                result.lambda = c.lambda.clone();
                result.beta = Some(beta);
                result.stages.last_mut().expect("pushed above").solution = Some(c);
            }
            Err(e) => return Err(fail(e, result)),
        }
    }
    let report = verify_balance(&result.lambda, plan.beta_target, &plan.s_grid, &plan.base.quad)?;
    let passes = report.passes(plan.balance_threshold);
    let max_rel_err = report.max_rel_err;
    result.balance = Some(report);
    if !passes {
        return Err(ContinuationError::Imbalance {
            max_rel_err,
            result: Box::new(result),
        });
    }
    Ok(result)
}

/// Balance check shared by callers that already hold a solution.
pub fn final_balance(
    lambda: &CoefficientSequence,
    beta: f64,
    q: &QuadSettings,
) -> Result<BalanceReport, ContinuationError> {
    Ok(verify_balance(lambda, beta, &default_s_grid(), q)?)
}
