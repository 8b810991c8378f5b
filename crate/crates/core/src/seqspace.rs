//! Truncated coefficient sequences `λ = (λ_0, …, λ_N)` and the reference
//! sequence `λ̄_i = −log Γ(i+1)`.
//!
//! Entries are logs of squared embedding coefficients, so the associated
//! series is `f(x) = Σ e^{λ_i} x^i`. Everything downstream works with the
//! logs; the coefficients themselves underflow long before `i = 200`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Smallest truncation order accepted for solver runs.
pub const MIN_TRUNCATION: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("truncation order {0} is below the minimum of {MIN_TRUNCATION}")]
    InvalidTruncation(usize),
    #[error("coefficient sequence must not be empty")]
    Empty,
    #[error("entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("length mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },
}

/// How the series continues past index `N`.
///
/// `Truncated` uses the finite polynomial `Σ_{i≤N} e^{λ_i} x^i`. `FrozenExp`
/// continues it with the reference ratios, `e^{λ_j} = e^{λ_N} N!/j!` for
/// `j > N`, so the represented `f` stays entire and `f = e^x` exactly when
/// `λ = λ̄`. The tail is anchored at `λ_N`, which keeps the whole series
/// equivariant under adding a constant to every entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    Truncated,
    #[default]
    FrozenExp,
}

impl std::str::FromStr for TailMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truncated" => Ok(TailMode::Truncated),
            "frozen_exp" => Ok(TailMode::FrozenExp),
            other => Err(format!("unknown tail mode `{other}`")),
        }
    }
}

impl std::fmt::Display for TailMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailMode::Truncated => "truncated",
            TailMode::FrozenExp => "frozen_exp",
        })
    }
}

/// The solver state: `λ_0..=λ_N` plus the tail model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSequence {
    values: Vec<f64>,
    tail: TailMode,
}

impl CoefficientSequence {
    /// Builds a sequence with the default (`FrozenExp`) tail.
    pub fn new(values: Vec<f64>) -> Result<Self, SeqError> {
        if values.is_empty() {
            return Err(SeqError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SeqError::NonFinite { index, value });
        }
        Ok(Self {
            values,
            tail: TailMode::default(),
        })
    }

    pub fn with_tail(mut self, tail: TailMode) -> Self {
        self.tail = tail;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail(&self) -> TailMode {
        self.tail
    }

    /// Truncation order `N` (the last stored index).
    pub fn trunc_order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Returns a copy with `c` added to every entry.
    pub fn shifted(&self, c: f64) -> Result<Self, SeqError> {
        Self::new(self.values.iter().map(|v| v + c).collect()).map(|s| s.with_tail(self.tail))
    }

    /// Replaces the leading entries with `head`.
    pub(crate) fn with_head(&self, head: &[f64]) -> Self {
        let mut values = self.values.clone();
        values[..head.len()].copy_from_slice(head);
        Self {
            values,
            tail: self.tail,
        }
    }
}

impl std::ops::Index<usize> for CoefficientSequence {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// `λ̄_i = −log Γ(i+1)`, the explicit balanced solution at `β = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSequence(CoefficientSequence);

impl ReferenceSequence {
    pub fn as_sequence(&self) -> &CoefficientSequence {
        &self.0
    }

    pub fn into_sequence(self) -> CoefficientSequence {
        self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn trunc_order(&self) -> usize {
        self.0.trunc_order()
    }
}

/// `log(i!)`, exact zero for `i ≤ 1`.
pub fn ln_factorial(i: usize) -> f64 {
    if i <= 1 {
        0.0
    } else {
        ln_gamma(i as f64 + 1.0)
    }
}

pub fn make_reference(n: usize) -> Result<ReferenceSequence, SeqError> {
    if n < MIN_TRUNCATION {
        return Err(SeqError::InvalidTruncation(n));
    }
    let values = (0..=n).map(|i| -ln_factorial(i)).collect();
    Ok(ReferenceSequence(CoefficientSequence::new(values)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    Linf,
}

/// `‖λ − λ̄‖_p` over indices `0..=N`.
pub fn shifted_norm(
    lambda: &CoefficientSequence,
    reference: &ReferenceSequence,
    p: Norm,
) -> Result<f64, SeqError> {
    distance(lambda.values(), reference.values(), p)
}

pub(crate) fn distance(a: &[f64], b: &[f64], p: Norm) -> Result<f64, SeqError> {
    if a.len() != b.len() {
        return Err(SeqError::Shape {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    Ok(match p {
        Norm::Linf => diffs.fold(0.0, f64::max),
        Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
    })
}

/// `λ'_i = λ_i − λ_0`.
pub fn normalize(lambda: &CoefficientSequence) -> CoefficientSequence {
    let base = lambda.values[0];
    let mut values: Vec<f64> = lambda.values.iter().map(|v| v - base).collect();
    values[0] = 0.0;
    CoefficientSequence {
        values,
        tail: lambda.tail,
    }
}
