//! Snapshots, trajectory tables, plot data and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::balance::EnergyReport;
use crate::flow::{FlowStatus, FlowTrajectory};
use crate::seqspace::{distance, make_reference, CoefficientSequence, Norm, TailMode};

pub const SNAPSHOT_SCHEMA: &str = "balflow.snapshot/1";
pub const MANIFEST_SCHEMA: &str = "balflow.manifest/1";
pub const ERROR_SCHEMA: &str = "balflow.error/1";

/// Final state of one run. Deliberately free of timestamps so identical
/// configs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema: String,
    pub config_digest: String,
    pub beta: f64,
    pub s: f64,
    #[serde(rename = "N")]
    pub order: usize,
    #[serde(rename = "M")]
    pub window: usize,
    pub tail: TailMode,
    /// `converged`, `time_out`, `step_failure` or `false_convergence`.
    pub status: String,
    pub t_final: f64,
    /// `true` when `lambda` has been shifted so that `λ_0 = 0`.
    pub normalized: bool,
    pub lambda: Vec<f64>,
    /// Undamped `F_i` over the window.
    pub residual: Vec<f64>,
    pub energy: EnergyReport,
}

impl Snapshot {
    pub fn sequence(&self) -> Result<CoefficientSequence, String> {
        if self.lambda.len() != self.order + 1 {
            return Err(format!(
                "snapshot has {} entries but N = {}",
                self.lambda.len(),
                self.order
            ));
        }
        CoefficientSequence::new(self.lambda.clone())
            .map(|s| s.with_tail(self.tail))
            .map_err(|e| e.to_string())
    }

    /// Sequence widened to `order`, with indices past the snapshot's `N`
    /// taken from the reference sequence.
    pub fn sequence_for_order(&self, order: usize, tail: TailMode) -> Result<CoefficientSequence, String> {
        let base = self.sequence()?;
        if self.order > order {
            return Err(format!(
                "snapshot N = {} exceeds configured N = {order}; refusing to drop entries",
                self.order
            ));
        }
        let mut values = base.into_values();
        let reference = make_reference(order.max(4)).map_err(|e| e.to_string())?;
        values.extend_from_slice(&reference.values()[values.len()..=order]);
        CoefficientSequence::new(values)
            .map(|s| s.with_tail(tail))
            .map_err(|e| e.to_string())
    }
}

pub fn status_name(status: FlowStatus) -> &'static str {
    match status {
        FlowStatus::Converged => "converged",
        FlowStatus::TimeOut => "time_out",
        FlowStatus::StepFailure => "step_failure",
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    fs::write(path, to_json(value))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let snap: Snapshot =
        serde_json::from_str(&text).map_err(|e| format!("malformed snapshot {}: {e}", path.display()))?;
    if snap.schema != SNAPSHOT_SCHEMA {
        return Err(format!("unsupported snapshot schema `{}`", snap.schema));
    }
    Ok(snap)
}

/// Tab-separated `t, E, E_s, linf_F, l2_drift, λ_0..λ_k` with `k = min(M, 10)`.
pub fn trajectory_table(traj: &FlowTrajectory) -> String {
    let k = traj.window.min(10);
    let mut out = String::from("t\tE\tE_s\tlinf_F\tl2_drift");
    for i in 0..=k {
        write!(out, "\tlambda_{i}").unwrap();
    }
    out.push('\n');
    let origin = &traj.initial().lambda.values()[..=traj.window];
    for sample in &traj.samples {
        let y = &sample.lambda.values()[..=traj.window];
        let drift = distance(y, origin, Norm::L2).expect("same window");
        write!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            sample.t,
            sample.energy.e,
            sample.energy.e_s,
            sample.residual.linf(),
            drift
        )
        .unwrap();
        for v in &y[..=k] {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// A named two-column series.
pub struct Series {
    pub name: &'static str,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub log_y: bool,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn to_dat(&self) -> String {
        let mut out = format!("# {}\t{}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            writeln!(out, "{x}\t{y}").unwrap();
        }
        out
    }

    /// Minimal SVG line chart.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 60.0;
        let ys = |y: f64| if self.log_y { y.max(1e-300).log10() } else { y };
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
            .map(|&(x, y)| (x, ys(y)))
            .collect();
        let range = |vals: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = range(&mut pts.iter().map(|p| p.0));
        let (y0, y1) = range(&mut pts.iter().map(|p| p.1));
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let path = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let y_label = if self.log_y {
            format!("log10 {}", self.y_label)
        } else {
            self.y_label.to_string()
        };
        format!(
            concat!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
                "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
                "<text x=\"{cx}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">{title}</text>\n",
                "<line x1=\"{p}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
                "<line x1=\"{p}\" y1=\"{p}\" x2=\"{p}\" y2=\"{b}\" stroke=\"black\"/>\n",
                "<text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{xlab} [{x0:.3e}, {x1:.3e}]</text>\n",
                "<text x=\"14\" y=\"{cy}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {cy})\" text-anchor=\"middle\">{ylab} [{y0:.3e}, {y1:.3e}]</text>\n",
                "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{path}\"/>\n",
                "</svg>\n"
            ),
            w = W,
            h = H,
            cx = W / 2.0,
            cy = H / 2.0,
            p = PAD,
            b = H - PAD,
            r = W - PAD,
            xl = H - PAD / 3.0,
            title = self.name,
            xlab = self.x_label,
            ylab = y_label,
            x0 = x0,
            x1 = x1,
            y0 = y0,
            y1 = y1,
            path = path,
        )
    }
}

/// `E(t)`, `‖F‖_∞(t)` and final `λ_i` against `i`.
pub fn standard_series(traj: &FlowTrajectory, final_lambda: &[f64]) -> Vec<Series> {
    vec![
        Series {
            name: "energy",
            x_label: "t",
            y_label: "E",
            log_y: true,
            points: traj.samples.iter().map(|s| (s.t, s.energy.e)).collect(),
        },
        Series {
            name: "residual_linf",
            x_label: "t",
            y_label: "linf_F",
            log_y: true,
            points: traj.samples.iter().map(|s| (s.t, s.residual.linf())).collect(),
        },
        Series {
            name: "lambda_final",
            x_label: "i",
            y_label: "lambda_i",
            log_y: false,
            points: final_lambda.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect(),
        },
    ]
}

/// Tracks written files for the manifest.
#[derive(Debug, Default)]
pub struct OutputDir {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<PathBuf> {
        self.write(name, &to_json(value))
    }

    pub fn write_series(&mut self, series: &[Series], svg: bool) -> std::io::Result<()> {
        for s in series {
            self.write(&format!("{}.dat", s.name), &s.to_dat())?;
            if svg {
                self.write(&format!("{}.svg", s.name), &s.to_svg())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub config_digest: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub schema: String,
    /// `validation`, `numerical`, `false_convergence` or `io`.
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

pub fn unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}
