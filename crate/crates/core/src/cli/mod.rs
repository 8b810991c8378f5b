//! Command-line driver: `solve`, `verify`, `sweep-s`, `continue-beta` and
//! `diagnose`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical failure
//! or failed check, 4 false convergence.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::balance::{energy, BalanceError};
use crate::continuation::{continue_solve, ContinuationError, ContinuationPlan, ContinuationResult};
use crate::diagnostics::{
    bounds_report, check_drift, lambda2_along, run_probes, verify_balance, BalanceReport, BoundsReport,
    DiagError, DriftCheck, ProbeReport, ProbeSettings,
};
use crate::flow::{
    converged_sequence, integrate, s_sweep, ConvergedSequence, FlowConfig, FlowError, FlowStatus,
    FlowTrajectory,
};
use crate::seqspace::{make_reference, CoefficientSequence};

pub use config::{parse_config, parse_with_overrides, ConfigError, RunConfig};
use output::{
    read_snapshot, standard_series, status_name, trajectory_table, unix_ms, ErrorRecord, OutputDir,
    RunManifest, Snapshot, ERROR_SCHEMA, MANIFEST_SCHEMA, SNAPSHOT_SCHEMA,
};

#[derive(Debug, Parser)]
#[command(name = "balflow", version, about = "Gradient-flow solver for (beta,1)-balanced sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the flow to convergence and save the final state.
    Solve(CommonArgs),
    /// Check the balance identity for a saved snapshot.
    Verify(CommonArgs),
    /// Compare trajectories for several damping values `s`.
    #[command(name = "sweep-s")]
    SweepS(CommonArgs),
    /// Reach a large beta through a continuation schedule.
    #[command(name = "continue-beta")]
    ContinueBeta(CommonArgs),
    /// Run the inequality checks and randomized probes.
    Diagnose(CommonArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Output directory.
    #[arg(long, env = "BALFLOW_OUT", default_value = "balflow-out")]
    out: PathBuf,
    /// File of `key=value` lines; command-line pairs override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` settings (also accepted as `--key value`).
    #[arg(allow_hyphen_values = true)]
    settings: Vec<String>,
}

impl CommonArgs {
    /// Options given after the first setting land in `settings`; move them
    /// back so flag order does not matter.
    fn hoist_options(mut self) -> Self {
        let mut rest = Vec::with_capacity(self.settings.len());
        let mut items = std::mem::take(&mut self.settings).into_iter();
        while let Some(item) = items.next() {
            let (flag, inline) = match item.split_once('=') {
                Some((f, v)) if f.starts_with("--") => (f.to_string(), Some(v.to_string())),
                _ => (item.clone(), None),
            };
            if flag != "--out" && flag != "--config" {
                rest.push(item);
                continue;
            }
            let Some(value) = inline.or_else(|| items.next()) else {
                rest.push(item);
                continue;
            };
            if flag == "--out" {
                self.out = PathBuf::from(value);
            } else {
                self.config = Some(PathBuf::from(value));
            }
        }
        self.settings = rest;
        self
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Verify(_) => "verify",
            Command::SweepS(_) => "sweep-s",
            Command::ContinueBeta(_) => "continue-beta",
            Command::Diagnose(_) => "diagnose",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Verify(a)
            | Command::SweepS(a)
            | Command::ContinueBeta(a)
            | Command::Diagnose(a) => a,
        }
    }
}

/// Why a command did not succeed.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    FalseConvergence(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::FalseConvergence(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation",
            Failure::Numerical(_) => "numerical",
            Failure::FalseConvergence(_) => "false_convergence",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::FalseConvergence(m) | Failure::Io(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<FlowError> for Failure {
    fn from(e: FlowError) -> Self {
        let msg = e.to_string();
        match e {
            FlowError::Config(_) => Failure::Validation(msg),
            FlowError::Balance(b) => b.into(),
            FlowError::FalseConvergence { .. } => Failure::FalseConvergence(msg),
            FlowError::StepFailure { .. } | FlowError::NotConverged(_) => Failure::Numerical(msg),
        }
    }
}

impl From<BalanceError> for Failure {
    fn from(e: BalanceError) -> Self {
        match e {
            BalanceError::Quadrature { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<DiagError> for Failure {
    fn from(e: DiagError) -> Self {
        match e {
            DiagError::Input(_) | DiagError::Sequence(_) => Failure::Validation(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<ContinuationError> for Failure {
    fn from(e: ContinuationError) -> Self {
        let msg = e.to_string();
        match e {
            ContinuationError::UnreachableTarget { .. }
            | ContinuationError::Plan(_)
            | ContinuationError::Sequence(_) => Failure::Validation(msg),
            ContinuationError::Stage { source, .. } => match Failure::from(source) {
                Failure::FalseConvergence(_) => Failure::FalseConvergence(msg),
                Failure::Validation(_) => Failure::Validation(msg),
                _ => Failure::Numerical(msg),
            },
            ContinuationError::Imbalance { .. } => Failure::Numerical(msg),
            ContinuationError::Diagnostics(d) => d.into(),
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let started = unix_ms();
    let command = cli.command.name();
    let args = &cli.command.args().clone().hoist_options();

    let mut out = match OutputDir::create(&args.out) {
        Ok(o) => o,
        Err(e) => return report_failure(None, &Failure::Io(format!("{}: {e}", args.out.display()))),
    };
    let loaded = load_config(args);
    let result = loaded.as_ref().map_err(Clone::clone).and_then(|cfg| match &cli.command {
        Command::Solve(_) => cmd_solve(cfg, &mut out),
        Command::Verify(_) => cmd_verify(cfg, &mut out),
        Command::SweepS(_) => cmd_sweep(cfg, &mut out),
        Command::ContinueBeta(_) => cmd_continue(cfg, &mut out),
        Command::Diagnose(_) => cmd_diagnose(cfg, &mut out),
    });
    let code = match &result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(f) => report_failure(Some(&mut out), f),
    };
    let (config_digest, config) = match &loaded {
        Ok(cfg) => (
            cfg.digest(),
            cfg.canonical().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        ),
        Err(_) => (String::new(), Default::default()),
    };
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        command: command.into(),
        config_digest,
        config,
        outputs: out.written.iter().map(|p| p.display().to_string()).collect(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        exit_code: code,
    };
    if let Err(e) = output::write_json(&out.root.join("manifest.json"), &manifest) {
        eprintln!("cannot write manifest: {e}");
        return 1;
    }
    code
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, Failure> {
    let text = match &args.config {
        Some(path) => Some(
            fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?,
        ),
        None => None,
    };
    Ok(parse_with_overrides(text.as_deref(), &args.settings)?)
}

fn report_failure(out: Option<&mut OutputDir>, failure: &Failure) -> i32 {
    let record = ErrorRecord {
        schema: ERROR_SCHEMA.into(),
        kind: failure.kind().into(),
        exit_code: failure.exit_code(),
        message: failure.message().into(),
    };
    eprintln!("{}", serde_json::to_string(&record).expect("serializable"));
    if let Some(out) = out {
        let _ = out.write_json("error.json", &record);
    }
    failure.exit_code()
}

/// Applies `resume=` and returns the effective config and initial sequence.
fn initial_state(cfg: &RunConfig) -> Result<(RunConfig, CoefficientSequence), Failure> {
    let Some(path) = &cfg.resume else {
        let lambda = make_reference(cfg.order)
            .map_err(|e| Failure::Validation(e.to_string()))?
            .into_sequence()
            .with_tail(cfg.tail);
        return Ok((cfg.clone(), lambda));
    };
    let snap = read_snapshot(path).map_err(Failure::Validation)?;
    let mut cfg = cfg.clone();
    if !cfg.is_explicit("N") {
        cfg.order = snap.order;
        if !cfg.is_explicit("M") {
            cfg.window = cfg.order / 2;
        }
    }
    let lambda = snap
        .sequence_for_order(cfg.order, cfg.tail)
        .map_err(|e| Failure::Validation(format!("incompatible snapshot {}: {e}", path.display())))?;
    Ok((cfg, lambda))
}

fn flow_config(cfg: &RunConfig, beta: f64, initial: CoefficientSequence) -> FlowConfig {
    FlowConfig {
        s: cfg.s,
        window: cfg.window,
        t_max: cfg.t_max,
        f_tol: cfg.f_tol,
        ode_rel_tol: cfg.ode_rel_tol,
        quad: cfg.quad,
        execution: cfg.execution,
        ..FlowConfig::new(beta, initial)
    }
}

/// Snapshot for the end of `traj`; converged runs store the normalized,
/// rechecked sequence.
fn snapshot_of(
    cfg: &RunConfig,
    traj: &FlowTrajectory,
    converged: Option<&ConvergedSequence>,
    status: &str,
) -> Snapshot {
    let last = traj.last();
    let (lambda, residual, normalized) = match converged {
        Some(c) => (c.lambda.values().to_vec(), c.residual.clone(), true),
        None => (last.lambda.values().to_vec(), last.residual.clone(), false),
    };
    Snapshot {
        schema: SNAPSHOT_SCHEMA.into(),
        config_digest: cfg.digest(),
        beta: traj.beta,
        s: traj.s,
        order: lambda.len() - 1,
        window: traj.window,
        tail: last.lambda.tail(),
        status: status.into(),
        t_final: last.t,
        normalized,
        energy: energy(&residual, traj.s),
        residual: residual.raw,
        lambda,
    }
}

fn write_run(cfg: &RunConfig, out: &mut OutputDir, traj: &FlowTrajectory, snap: &Snapshot) -> Result<(), Failure> {
    out.write_json("snapshot.json", snap)?;
    out.write("trajectory.tsv", &trajectory_table(traj))?;
    if cfg.plots {
        out.write_series(&standard_series(traj, &snap.lambda), cfg.svg)?;
    }
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, out: &mut OutputDir) -> Result<String, Failure> {
    let beta = cfg.require_beta()?;
    let (cfg, initial) = initial_state(cfg)?;
    let fc = flow_config(&cfg, beta, initial);
    let traj = match integrate(&fc) {
        Ok(t) => t,
        Err(FlowError::StepFailure { t, reason, trajectory }) => {
            if !trajectory.samples.is_empty() {
                let snap = snapshot_of(&cfg, &trajectory, None, "step_failure");
                write_run(&cfg, out, &trajectory, &snap)?;
            }
            return Err(Failure::Numerical(format!("step failure at t = {t}: {reason}")));
        }
        Err(e) => return Err(e.into()),
    };
    if traj.status != FlowStatus::Converged {
        let snap = snapshot_of(&cfg, &traj, None, status_name(traj.status));
        write_run(&cfg, out, &traj, &snap)?;
        return Err(Failure::Numerical(format!(
            "no convergence by t_max = {}: residual {:.3e} above f_tol = {:.1e}",
            cfg.t_max,
            traj.last().residual.linf(),
            cfg.f_tol
        )));
    }
    match converged_sequence(&traj, &cfg.quad) {
        Ok(c) => {
            let snap = snapshot_of(&cfg, &traj, Some(&c), "converged");
            write_run(&cfg, out, &traj, &snap)?;
            Ok(format!(
                "converged at t = {} (residual {:.3e}); wrote {}",
                traj.last().t,
                c.residual.linf(),
                out.root.display()
            ))
        }
        Err(e) => {
            let snap = snapshot_of(&cfg, &traj, None, "false_convergence");
            write_run(&cfg, out, &traj, &snap)?;
            Err(e.into())
        }
    }
}

fn input_snapshot(cfg: &RunConfig, out: &OutputDir) -> Result<(PathBuf, Snapshot), Failure> {
    let path = cfg.snapshot.clone().unwrap_or_else(|| out.root.join("snapshot.json"));
    let snap = read_snapshot(&path).map_err(Failure::Validation)?;
    Ok((path, snap))
}

#[derive(Serialize)]
struct VerifyRecord<'a> {
    snapshot: String,
    threshold: f64,
    passes: bool,
    report: &'a BalanceReport,
}

fn cmd_verify(cfg: &RunConfig, out: &mut OutputDir) -> Result<String, Failure> {
    let (path, snap) = input_snapshot(cfg, out)?;
    let lambda = snap.sequence().map_err(Failure::Validation)?;
    let beta = cfg.beta.unwrap_or(snap.beta);
    let report = verify_balance(&lambda, beta, &cfg.s_grid, &cfg.quad)?;
    let passes = report.passes(cfg.threshold);
    out.write_json(
        "balance.json",
        &VerifyRecord {
            snapshot: path.display().to_string(),
            threshold: cfg.threshold,
            passes,
            report: &report,
        },
    )?;
    let mut table = String::from("s\tlhs\trhs\trel_err\ttail_allowance\n");
    for p in &report.points {
        let lhs = p.lhs.map_or("nan".to_string(), |v| v.to_string());
        writeln!(table, "{}\t{lhs}\t{}\t{}\t{}", p.s, p.rhs, p.rel_err, p.tail_allowance).unwrap();
    }
    out.write("balance.tsv", &table)?;
    if passes {
        Ok(format!("balance verified: max relative error {:.3e}", report.max_rel_err))
    } else {
        Err(Failure::Numerical(format!(
            "balance check failed: max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_err, cfg.threshold
        )))
    }
}

#[derive(Serialize)]
struct SweepMemberRecord {
    s: f64,
    status: Option<String>,
    failure: Option<String>,
    trajectory_file: Option<String>,
}

fn cmd_sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<String, Failure> {
    let beta = cfg.require_beta()?;
    let (cfg, initial) = initial_state(cfg)?;
    let template = flow_config(&cfg, beta, initial);
    let report = s_sweep(&template, &cfg.s_list, &cfg.sweep)?;
    let mut members = Vec::new();
    for (k, m) in report.members.iter().enumerate() {
        let file = match &m.trajectory {
            Some(traj) => {
                let name = format!("trajectory_s{k}.tsv");
                out.write(&name, &trajectory_table(traj))?;
                Some(name)
            }
            None => None,
        };
        members.push(SweepMemberRecord {
            s: m.s,
            status: m.trajectory.as_ref().map(|t| status_name(t.status).to_string()),
            failure: m.failure.clone(),
            trajectory_file: file,
        });
    }
    let width = cfg.sweep.compare_window.min(cfg.window);
    let mut table = String::from("s_a\ts_b\tmax");
    for i in 0..=width {
        write!(table, "\td_{i}").unwrap();
    }
    table.push('\n');
    for d in &report.distances {
        write!(table, "{}\t{}\t{}", d.s_a, d.s_b, d.max()).unwrap();
        for v in &d.per_index {
            write!(table, "\t{v}").unwrap();
        }
        table.push('\n');
    }
    out.write("cauchy.tsv", &table)?;
    out.write_json(
        "sweep.json",
        &serde_json::json!({
            "beta": beta,
            "horizon": cfg.sweep.horizon,
            "members": members,
            "distances": report.distances,
        }),
    )?;
    if report.complete() {
        Ok(format!("swept {} values of s; wrote cauchy.tsv", cfg.s_list.len()))
    } else {
        Err(Failure::Numerical("some sweep members failed; see sweep.json".into()))
    }
}

#[derive(Serialize)]
struct ContinuationRecord<'a> {
    delta: f64,
    beta_target: f64,
    schedule: &'a [f64],
    reached_beta: Option<f64>,
    stages: Vec<StageSummary>,
    balance: Option<&'a BalanceReport>,
}

#[derive(Serialize)]
struct StageSummary {
    stage: usize,
    beta: f64,
    start_energy: f64,
    start_linf: f64,
    end_time: f64,
    steps: usize,
    rejected: usize,
    status: String,
    final_linf: f64,
    snapshot: Option<String>,
}

fn write_continuation(
    cfg: &RunConfig,
    plan: &ContinuationPlan,
    result: &ContinuationResult,
    out: &mut OutputDir,
) -> Result<(), Failure> {
    let mut stages = Vec::new();
    for st in &result.stages {
        let snapshot = match &st.solution {
            Some(sol) => {
                let snap = Snapshot {
                    schema: SNAPSHOT_SCHEMA.into(),
                    config_digest: cfg.digest(),
                    beta: st.beta,
                    s: plan.base.s,
                    order: sol.lambda.trunc_order(),
                    window: plan.base.window,
                    tail: sol.lambda.tail(),
                    status: "converged".into(),
                    t_final: st.end_time,
                    normalized: true,
                    lambda: sol.lambda.values().to_vec(),
                    residual: sol.residual.raw.clone(),
                    energy: energy(&sol.residual, plan.base.s),
                };
                let name = format!("stage_{:02}.json", st.stage);
                out.write_json(&name, &snap)?;
                if st.stage + 1 == plan.schedule.len() {
                    out.write_json("snapshot.json", &snap)?;
                }
                Some(name)
            }
            None => None,
        };
        stages.push(StageSummary {
            stage: st.stage,
            beta: st.beta,
            start_energy: st.start_energy,
            start_linf: st.start_linf,
            end_time: st.end_time,
            steps: st.steps,
            rejected: st.rejected,
            status: status_name(st.status).into(),
            final_linf: st.final_linf,
            snapshot,
        });
    }
    out.write_json(
        "continuation.json",
        &ContinuationRecord {
            delta: plan.delta,
            beta_target: plan.beta_target,
            schedule: &plan.schedule,
            reached_beta: result.beta,
            stages,
            balance: result.balance.as_ref(),
        },
    )?;
    Ok(())
}

fn cmd_continue(cfg: &RunConfig, out: &mut OutputDir) -> Result<String, Failure> {
    let target = cfg.require_beta()?;
    let (cfg, initial) = initial_state(cfg)?;
    let mut plan = ContinuationPlan::new(target, cfg.order)?;
    plan.reschedule(cfg.delta, cfg.beta_start.unwrap_or(target.min(0.4)))?;
    plan.base = flow_config(&cfg, plan.schedule[0], initial);
    plan.balance_threshold = cfg.threshold;
    plan.s_grid = cfg.s_grid.clone();
    match continue_solve(&plan) {
        Ok(result) => {
            write_continuation(&cfg, &plan, &result, out)?;
            Ok(format!(
                "reached beta = {target} in {} stages; max balance error {:.3e}",
                result.stages.len(),
                result.balance.as_ref().map_or(f64::NAN, |b| b.max_rel_err)
            ))
        }
        Err(e) => {
            match &e {
                ContinuationError::Stage { partial, .. } => write_continuation(&cfg, &plan, partial, out)?,
                ContinuationError::Imbalance { result, .. } => write_continuation(&cfg, &plan, result, out)?,
                _ => {}
            }
            Err(e.into())
        }
    }
}

#[derive(Serialize)]
struct DiagnosisRecord {
    beta: f64,
    source: String,
    bounds: BoundsReport,
    probes: Option<ProbeReport>,
    drift: Option<DriftCheck>,
    /// λ₂ margin at each trajectory sample (`null` where inapplicable).
    lambda2_along: Option<Vec<Option<f64>>>,
}

fn cmd_diagnose(cfg: &RunConfig, out: &mut OutputDir) -> Result<String, Failure> {
    let (beta, lambda, traj, source) = match &cfg.snapshot {
        Some(path) => {
            let snap = read_snapshot(path).map_err(Failure::Validation)?;
            let lambda = snap.sequence().map_err(Failure::Validation)?;
            (cfg.beta.unwrap_or(snap.beta), lambda, None, path.display().to_string())
        }
        None => {
            let beta = cfg.require_beta()?;
            let (run_cfg, initial) = initial_state(cfg)?;
            let traj = integrate(&flow_config(&run_cfg, beta, initial))?;
            out.write("trajectory.tsv", &trajectory_table(&traj))?;
            let lambda = traj.last().lambda.clone();
            (beta, lambda, Some(traj), "flow run".to_string())
        }
    };
    let bounds = bounds_report(&lambda, beta, cfg.window.min(lambda.trunc_order()), &cfg.t_grid, traj.as_ref(), &cfg.quad)?;
    let probes = if cfg.probes > 0 {
        let settings = ProbeSettings {
            count: cfg.probes,
            seed: cfg.seed,
            order: lambda.trunc_order(),
            max_index: 10.min(lambda.trunc_order() - 2),
            ..ProbeSettings::default()
        };
        Some(run_probes(&settings, &cfg.quad, cfg.execution)?)
    } else {
        None
    };
    let drift = traj.as_ref().map(|t| check_drift(t, beta, 1e-6));
    let l2_along = traj.as_ref().map(lambda2_along);
    let ok = bounds.u_monotone_ok
        && bounds.sandwich_ok
        && bounds.lambda2_ok
        && drift.as_ref().is_none_or(DriftCheck::ok)
        && probes.as_ref().is_none_or(ProbeReport::ok)
        && l2_along
            .as_ref()
            .is_none_or(|v| v.iter().all(|m| m.is_none_or(|m| m >= 0.0)));
    out.write_json(
        "diagnostics.json",
        &DiagnosisRecord {
            beta,
            source,
            bounds,
            probes,
            drift,
            lambda2_along: l2_along,
        },
    )?;
    if ok {
        Ok("all inequality checks passed".into())
    } else {
        Err(Failure::Numerical("some inequality checks failed; see diagnostics.json".into()))
    }
}

/// Reads a snapshot file (for tests and tooling).
pub fn load_snapshot(path: &Path) -> Result<Snapshot, String> {
    read_snapshot(path)
}
