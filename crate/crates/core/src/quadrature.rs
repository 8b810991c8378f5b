//! Log-domain evaluation of `f(x) = Σ e^{λ_i} x^i` and adaptive
//! Gauss–Legendre quadrature for the semi-infinite integrals
//!
//! ```text
//! I_i(λ) = ∫₀^∞ e^{λ_i} x^i / f(x) dx,      ∫₀^∞ f(sx)/f(x) dx.
//! ```
//!
//! Integrands are only ever formed as `exp(log-integrand)`. Each integral is
//! laid out around the peak of its log-integrand (found by bisection on the
//! increasing function `u(x) = x f'(x)/f(x)`), cut off where the integrand
//! has dropped `cutoff_nats` below the peak, and refined by global adaptive
//! bisection. Every panel is integrated with a 20-point rule; the 15-point
//! rule on the same panel supplies the error estimate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqspace::{ln_factorial, CoefficientSequence, TailMode};

const HIGH_ORDER: usize = 20;
const LOW_ORDER: usize = 15;

/// Upper limit on how far the cutoff search may push `X_max`, relative to
/// the integrand's natural width.
const MAX_CUTOFF_STRETCH: f64 = 1e13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub panel_budget: usize,
    /// How far below its peak (in nats) the log-integrand must fall at `X_max`.
    pub cutoff_nats: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            panel_budget: 4096,
            cutoff_nats: 46.0,
        }
    }
}

impl QuadSettings {
    /// Same settings with `rel_tol` divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            ..*self
        }
    }

    /// Tolerance implied for a value of magnitude `value`.
    pub fn tolerance_for(&self, value: f64) -> f64 {
        self.rel_tol * value.abs() + self.abs_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
    /// Upper integration limit actually used.
    pub cutoff: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("integral diverges: index {index} exceeds N-2 for truncation order {order}")]
    DivergentIndex { index: usize, order: usize },
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("tolerance not reached within panel budget (best {:.3e} ± {:.3e})", best.value, best.abs_error)]
    Accuracy { best: QuadratureEstimate },
}

struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for k in 0..n.div_ceil(2) {
        let mut x = (PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    GaussRule { nodes, weights }
}

static HIGH_RULE: LazyLock<GaussRule> = LazyLock::new(|| gauss_legendre(HIGH_ORDER));
static LOW_RULE: LazyLock<GaussRule> = LazyLock::new(|| gauss_legendre(LOW_ORDER));

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_{j>n} x^j/j!` for `x > 0`, given `ln x` and `ln n!`.
fn log_exp_remainder(n: usize, x: f64, ln_x: f64, ln_fact_n: f64) -> f64 {
    let nf = n as f64;
    if x < nf + 1.0 {
        // x^{n+1}/(n+1)! · Σ_k x^k (n+1)!/(n+1+k)!
        let lead = (nf + 1.0) * ln_x - ln_fact_n - (nf + 1.0).ln();
        let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
        loop {
            term *= x / (nf + 1.0 + k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        lead + sum.ln()
    } else {
        // e^x (1 − Q) with Q = e^{−x} Σ_{j≤n} x^j/j!, summed downward from j = n.
        let last = nf * ln_x - x - ln_fact_n;
        let (mut term, mut sum) = (1.0, 1.0);
        for m in 0..n {
            term *= (nf - m as f64) / x;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        let q = (last + sum.ln()).exp();
        x + (-q).ln_1p()
    }
}

/// Frozen exponential tail `A·Σ_{j>N} x^j/j!` with `ln A = λ_N + ln N!`.
#[derive(Debug, Clone, Copy)]
struct ExpTail {
    order: usize,
    log_scale: f64,
    ln_fact_n: f64,
    ln_fact_n_minus_1: f64,
}

/// Borrowed evaluator for `log f`, `log(x f')` and `u = x f'/f`.
pub(crate) struct Series<'a> {
    lambda: &'a [f64],
    ln_index: Vec<f64>,
    tail: Option<ExpTail>,
}

impl<'a> Series<'a> {
    pub(crate) fn new(seq: &'a CoefficientSequence) -> Self {
        let lambda = seq.values();
        let order = seq.trunc_order();
        let tail = match seq.tail() {
            TailMode::Truncated => None,
            TailMode::FrozenExp => {
                let ln_fact_n = ln_factorial(order);
                Some(ExpTail {
                    order,
                    log_scale: lambda[order] + ln_fact_n,
                    ln_fact_n,
                    ln_fact_n_minus_1: ln_factorial(order.saturating_sub(1)),
                })
            }
        };
        Self {
            lambda,
            ln_index: (0..lambda.len()).map(|i| (i as f64).ln()).collect(),
            tail,
        }
    }

    fn head(&self, ln_x: f64) -> f64 {
        let terms = self
            .lambda
            .iter()
            .enumerate()
            .map(move |(i, &l)| l + i as f64 * ln_x);
        log_sum_exp(terms)
    }

    fn head_derivative(&self, ln_x: f64) -> f64 {
        let terms = self
            .lambda
            .iter()
            .enumerate()
            .skip(1)
            .map(move |(i, &l)| self.ln_index[i] + l + i as f64 * ln_x);
        log_sum_exp(terms)
    }

    /// Adds `log_tail` to `base` unless it is negligible.
    fn with_tail(base: f64, log_tail: impl FnOnce() -> f64) -> f64 {
        let t = log_tail();
        if t == f64::NEG_INFINITY || t < base - 60.0 {
            return base;
        }
        let m = base.max(t);
        m + ((base - m).exp() + (t - m).exp()).ln()
    }

    pub(crate) fn log_f(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.lambda[0];
        }
        self.log_f_ln(x, x.ln())
    }

    fn log_f_ln(&self, x: f64, ln_x: f64) -> f64 {
        let head = self.head(ln_x);
        match self.tail {
            None => head,
            Some(t) => Self::with_tail(head, || {
                t.log_scale + log_exp_remainder(t.order, x, ln_x, t.ln_fact_n)
            }),
        }
    }

    /// `log(x f'(x))`; the tail contributes `A·x·Σ_{j>N-1} x^j/j!`.
    fn log_xfprime_ln(&self, x: f64, ln_x: f64) -> f64 {
        let head = self.head_derivative(ln_x);
        match self.tail {
            None => head,
            Some(t) if t.order == 0 => Self::with_tail(head, || t.log_scale + ln_x + x),
            Some(t) => Self::with_tail(head, || {
                t.log_scale + ln_x + log_exp_remainder(t.order - 1, x, ln_x, t.ln_fact_n_minus_1)
            }),
        }
    }

    pub(crate) fn u(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let ln_x = x.ln();
        (self.log_xfprime_ln(x, ln_x) - self.log_f_ln(x, ln_x)).exp()
    }

    /// Smallest `x` with `u(x) ≥ level`, by doubling then bisection.
    fn invert_u(&self, level: f64) -> Result<f64, QuadError> {
        if level <= 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.u(hi) < level {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(QuadError::Divergent(format!(
                    "u(x) = x f'/f never reaches {level}"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.u(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Where a unimodal log-integrand peaks, its natural width, and `X_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandLayout {
    pub peak: f64,
    pub width: f64,
    pub cutoff: f64,
}

impl IntegrandLayout {
    fn locate(
        g: &impl Fn(f64) -> f64,
        peak: f64,
        width: f64,
        q: &QuadSettings,
    ) -> Result<Self, QuadError> {
        let g_peak = g(peak);
        let mut reach = width;
        while g(peak + reach) > g_peak - q.cutoff_nats {
            reach *= 2.0;
            if reach > MAX_CUTOFF_STRETCH * (peak + width) {
                return Err(QuadError::Divergent(
                    "integrand does not decay below the cutoff".into(),
                ));
            }
        }
        Ok(Self {
            peak,
            width,
            cutoff: peak + reach,
        })
    }

    /// Initial panel edges: a few around the peak, then geometric outward.
    fn breakpoints(&self) -> Vec<f64> {
        let Self { peak, width, cutoff } = *self;
        let mut pts = vec![0.0];
        for off in [-3.0, -1.0, 0.0, 1.0] {
            pts.push(peak + off * width);
        }
        let mut reach = 3.0 * width;
        while peak + reach < cutoff {
            pts.push(peak + reach);
            reach *= 2.0;
        }
        pts.push(cutoff);
        let min_gap = 1e-9 * cutoff;
        let mut out: Vec<f64> = Vec::with_capacity(pts.len());
        for p in pts {
            if p < 0.0 || p > cutoff {
                continue;
            }
            if out.last().is_none_or(|&last| p - last > min_gap) {
                out.push(p);
            }
        }
        if out.len() < 2 || *out.last().unwrap() < cutoff {
            out.push(cutoff);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn eval_panel(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let rule_sum = |rule: &GaussRule| -> f64 {
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * g(mid + half * t).exp())
            .sum()
    };
    let hi = half * rule_sum(&HIGH_RULE);
    let lo = half * rule_sum(&LOW_RULE);
    Panel {
        a,
        b,
        value: hi,
        error: (hi - lo).abs(),
    }
}

fn totals(panels: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut sorted: Vec<&Panel> = panels.iter().collect();
    sorted.sort_by(|p, q| p.a.total_cmp(&q.a));
    sorted
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

/// Global adaptive bisection of `∫ exp(g(x)) dx` over the given panel edges.
fn adaptive(
    g: &impl Fn(f64) -> f64,
    layout: &IntegrandLayout,
    q: &QuadSettings,
) -> Result<QuadratureEstimate, QuadError> {
    let edges = layout.breakpoints();
    let mut heap: BinaryHeap<Panel> = edges
        .windows(2)
        .map(|w| eval_panel(g, w[0], w[1]))
        .collect();
    let (mut value, mut error) = totals(&heap);
    loop {
        if error <= q.tolerance_for(value) {
            // Running sums drift; confirm against a fresh ordered sum.
            let (v, e) = totals(&heap);
            value = v;
            error = e;
            if error <= q.tolerance_for(value) {
                break;
            }
        }
        let estimate = |value, error, panels| QuadratureEstimate {
            value,
            abs_error: error,
            panels,
            cutoff: layout.cutoff,
        };
        if heap.len() >= q.panel_budget.max(edges.len()) {
            let (v, e) = totals(&heap);
            return Err(QuadError::Accuracy {
                best: estimate(v, e, heap.len()),
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            let (v, e) = totals(&heap);
            return Err(QuadError::Accuracy {
                best: estimate(v, e, heap.len()),
            });
        }
        let left = eval_panel(g, worst.a, mid);
        let right = eval_panel(g, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    Ok(QuadratureEstimate {
        value,
        abs_error: error,
        panels: heap.len(),
        cutoff: layout.cutoff,
    })
}

/// `log f(x)` by max-shifted log-sum-exp; `log f(0) = λ_0`.
pub fn log_f(lambda: &CoefficientSequence, x: f64) -> Result<f64, QuadError> {
    if !(x >= 0.0) {
        return Err(QuadError::Domain(format!("log_f requires x >= 0, got {x}")));
    }
    Ok(Series::new(lambda).log_f(x))
}

/// `u(x) = x f'(x)/f(x)`, strictly increasing in `x` for positive coefficients.
pub fn xf_prime_over_f(lambda: &CoefficientSequence, x: f64) -> Result<f64, QuadError> {
    if !(x > 0.0) {
        return Err(QuadError::Domain(format!("u(x) requires x > 0, got {x}")));
    }
    Ok(Series::new(lambda).u(x))
}

fn check_index(lambda: &CoefficientSequence, i: usize) -> Result<(), QuadError> {
    let order = lambda.trunc_order();
    if i + 2 > order {
        return Err(QuadError::DivergentIndex { index: i, order });
    }
    Ok(())
}

fn index_layout(
    series: &Series<'_>,
    g: &impl Fn(f64) -> f64,
    i: usize,
    q: &QuadSettings,
) -> Result<IntegrandLayout, QuadError> {
    let (peak, width) = if i == 0 {
        (0.0, series.invert_u(1.0)?)
    } else {
        let peak = series.invert_u(i as f64)?;
        (peak, peak / (i as f64).sqrt())
    };
    IntegrandLayout::locate(g, peak, width, q)
}

fn index_integrand<'s>(series: &'s Series<'_>, i: usize) -> impl Fn(f64) -> f64 + 's {
    let li = series.lambda[i];
    let fi = i as f64;
    move |x: f64| {
        if x == 0.0 {
            return if i == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let ln_x = x.ln();
        li + fi * ln_x - series.log_f_ln(x, ln_x)
    }
}

/// Peak, width and `X_max` for the integrand of `I_i`.
pub fn integrand_layout(
    lambda: &CoefficientSequence,
    i: usize,
    q: &QuadSettings,
) -> Result<IntegrandLayout, QuadError> {
    check_index(lambda, i)?;
    let series = Series::new(lambda);
    let g = index_integrand(&series, i);
    index_layout(&series, &g, i, q)
}

/// `X_max` at which the log-integrand of `I_i` has fallen `cutoff_nats`
/// below its maximum.
pub fn choose_cutoff(
    lambda: &CoefficientSequence,
    i: usize,
    q: &QuadSettings,
) -> Result<f64, QuadError> {
    integrand_layout(lambda, i, q).map(|l| l.cutoff)
}

/// `I_i(λ) = ∫₀^∞ e^{λ_i} x^i / f(x) dx` for `i ≤ N − 2`.
pub fn compute_i(
    lambda: &CoefficientSequence,
    i: usize,
    q: &QuadSettings,
) -> Result<QuadratureEstimate, QuadError> {
    check_index(lambda, i)?;
    let series = Series::new(lambda);
    let g = index_integrand(&series, i);
    let layout = index_layout(&series, &g, i, q)?;
    adaptive(&g, &layout, q)
}

/// `∫₀^∞ f(sx)/f(x) dx` for `0 ≤ s < 1`.
pub fn integral_ratio(
    lambda: &CoefficientSequence,
    s: f64,
    q: &QuadSettings,
) -> Result<QuadratureEstimate, QuadError> {
    if !(0.0..1.0).contains(&s) {
        return Err(QuadError::Domain(format!("integral_ratio requires 0 <= s < 1, got {s}")));
    }
    if s == 0.0 {
        return compute_i(lambda, 0, q);
    }
    if lambda.tail() == TailMode::Truncated {
        return Err(QuadError::Divergent(
            "f(sx)/f(x) tends to s^N for a truncated series".into(),
        ));
    }
    let series = Series::new(lambda);
    let ln_s = s.ln();
    let g = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let ln_x = x.ln();
        series.log_f_ln(s * x, ln_s + ln_x) - series.log_f_ln(x, ln_x)
    };
    let width = series.invert_u(1.0)? / (1.0 - s);
    let layout = IntegrandLayout::locate(&g, 0.0, width, q)?;
    adaptive(&g, &layout, q)
}

/// `∫₀^∞ exp(−t·u(x)) dx`, the middle term of the Hall–Williamson sandwich.
pub fn integral_exp_neg_u(
    lambda: &CoefficientSequence,
    t: f64,
    q: &QuadSettings,
) -> Result<QuadratureEstimate, QuadError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(QuadError::Domain(format!("requires t > 0, got {t}")));
    }
    let series = Series::new(lambda);
    let g = |x: f64| -t * series.u(x);
    let width = series.invert_u(1.0 / t)?;
    let layout = IntegrandLayout::locate(&g, 0.0, width, q)?;
    adaptive(&g, &layout, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspace::make_reference;

    fn reference(n: usize) -> CoefficientSequence {
        make_reference(n).unwrap().into_sequence()
    }

    fn square_of_one_plus_x() -> CoefficientSequence {
        CoefficientSequence::new(vec![0.0, 2f64.ln(), 0.0])
            .unwrap()
            .with_tail(TailMode::Truncated)
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for rule in [&*HIGH_RULE, &*LOW_RULE] {
            let n = rule.nodes.len();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-14);
            // x^{2n-2} is integrated exactly: 2/(2n-1).
            let p = 2 * n - 2;
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(p as i32))
                .sum();
            assert!((got - 2.0 / (p as f64 + 1.0)).abs() < 1e-13, "{n}: {got}");
        }
    }

    #[test]
    fn log_f_small_polynomial() {
        let lam = square_of_one_plus_x();
        assert!((log_f(&lam, 3.0).unwrap() - 16f64.ln()).abs() < 1e-14);
        assert_eq!(log_f(&lam, 0.0).unwrap(), 0.0);
        let lam = CoefficientSequence::new(vec![1.7, -3.0, 2.0]).unwrap();
        assert_eq!(log_f(&lam, 0.0).unwrap(), 1.7);
        assert!(matches!(log_f(&lam, -1.0), Err(QuadError::Domain(_))));
    }

    #[test]
    fn frozen_tail_reproduces_exponential() {
        let lam = reference(40);
        for x in [0.01, 0.5, 3.0, 20.0, 40.9, 41.0, 41.1, 120.0, 2000.0] {
            let got = log_f(&lam, x).unwrap();
            assert!((got - x).abs() < 1e-13 * (1.0 + x), "x={x}: {got}");
            let u = xf_prime_over_f(&lam, x).unwrap();
            assert!((u - x).abs() < 1e-12 * (1.0 + x), "x={x}: u={u}");
        }
    }

    #[test]
    fn remainder_branches_agree() {
        // Both formulas are valid everywhere; compare them across the switch.
        for n in [3usize, 10, 40, 80] {
            let lf = ln_factorial(n);
            for x in [0.3 * n as f64 + 0.5, n as f64, n as f64 + 1.0, 1.5 * n as f64 + 2.0] {
                let via_branch = log_exp_remainder(n, x, x.ln(), lf);
                let direct: f64 = (n + 1..n + 400)
                    .map(|j| (j as f64 * x.ln() - ln_factorial(j)).exp())
                    .sum::<f64>()
                    .ln();
                assert!((via_branch - direct).abs() < 1e-12 * direct.abs().max(1.0), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn u_of_square() {
        let lam = square_of_one_plus_x();
        assert!((xf_prime_over_f(&lam, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let tiny = xf_prime_over_f(&lam, 1e-300).unwrap();
        assert!(tiny < 1e-299);
        assert!(xf_prime_over_f(&lam, 0.0).is_err());
    }

    #[test]
    fn i0_of_square() {
        let lam = square_of_one_plus_x();
        // The cutoff at 46 nats truncates ∫(1+x)^{-2} at X ≈ e^{23}.
        let q = QuadSettings::default();
        let est = compute_i(&lam, 0, &q).unwrap();
        assert!((est.value - 1.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn divergent_index_rejected() {
        let lam = CoefficientSequence::new(vec![0.0, 0.0])
            .unwrap()
            .with_tail(TailMode::Truncated);
        assert_eq!(
            compute_i(&lam, 0, &QuadSettings::default()),
            Err(QuadError::DivergentIndex { index: 0, order: 1 })
        );
        let lam = reference(10);
        assert!(compute_i(&lam, 9, &QuadSettings::default()).is_err());
        assert!(compute_i(&lam, 8, &QuadSettings::default()).is_ok());
    }

    #[test]
    fn reference_integrals_are_one() {
        let lam = reference(60);
        let q = QuadSettings::default();
        for i in 0..=20 {
            let est = compute_i(&lam, i, &q).unwrap();
            assert!((est.value - 1.0).abs() < 1e-8, "i={i}: {est:?}");
            assert!(est.abs_error <= q.tolerance_for(est.value));
        }
    }

    #[test]
    fn ratio_at_reference() {
        let lam = reference(80);
        let q = QuadSettings::default();
        let half = integral_ratio(&lam, 0.5, &q).unwrap();
        assert!((half.value - 2.0).abs() < 1e-7, "{half:?}");
        let nine = integral_ratio(&lam, 0.9, &q).unwrap();
        assert!((nine.value - 10.0).abs() < 1e-6, "{nine:?}");
        assert_eq!(
            integral_ratio(&lam, 0.0, &q).unwrap(),
            compute_i(&lam, 0, &q).unwrap()
        );
        assert!(matches!(integral_ratio(&lam, 1.0, &q), Err(QuadError::Domain(_))));
    }

    #[test]
    fn ratio_truncated_diverges() {
        let lam = reference(20).with_tail(TailMode::Truncated);
        assert!(matches!(
            integral_ratio(&lam, 0.5, &QuadSettings::default()),
            Err(QuadError::Divergent(_))
        ));
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let lam = reference(30);
        let q = QuadSettings {
            rel_tol: 1e-30,
            abs_tol: 0.0,
            panel_budget: 16,
            ..QuadSettings::default()
        };
        match compute_i(&lam, 3, &q) {
            Err(QuadError::Accuracy { best }) => {
                assert!((best.value - 1.0).abs() < 1e-6);
                assert!(best.panels <= 16);
            }
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn cutoff_layouts() {
        let q = QuadSettings::default();
        let lam = reference(60);
        let l5 = integrand_layout(&lam, 5, &q).unwrap();
        assert!((l5.peak - 5.0).abs() < 1e-9, "{l5:?}");
        assert!(l5.cutoff > 5.0 && l5.cutoff.is_finite());
        // Scan oracle: the log-integrand x^5 e^{-x}/5! at X_max is ≥ 46 nats below its peak.
        let g = |x: f64| 5.0 * x.ln() - x - ln_factorial(5);
        let peak = (0..10_000).map(|k| g(0.001 * (k as f64 + 1.0))).fold(f64::MIN, f64::max);
        assert!(g(l5.cutoff) <= peak - 46.0);

        let l0 = integrand_layout(&lam, 0, &q).unwrap();
        assert_eq!(l0.peak, 0.0);
        assert!(l0.cutoff > 46.0);

        let top = choose_cutoff(&lam, 58, &q).unwrap();
        assert!(top.is_finite() && top > 58.0);

        let trunc = reference(12).with_tail(TailMode::Truncated);
        assert!(choose_cutoff(&trunc, 10, &q).unwrap().is_finite());
    }

    #[test]
    fn exp_neg_u_reference() {
        let lam = reference(40);
        let est = integral_exp_neg_u(&lam, 0.5, &QuadSettings::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{est:?}");
    }
}
