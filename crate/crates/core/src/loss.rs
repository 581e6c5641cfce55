//! Margin losses for PU learning.
//!
//! Every loss here is unary: `ℓ(t, y) = ℓ(z)` with margin `z = t·y`, so the
//! loss of a score `t` against the negative class is simply `value(-t)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{PuError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    ZeroOne,
    Ramp,
    Squared,
    Logistic,
    Hinge,
    DoubleHinge,
    Sigmoid,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::ZeroOne,
        LossKind::Ramp,
        LossKind::Squared,
        LossKind::Logistic,
        LossKind::Hinge,
        LossKind::DoubleHinge,
        LossKind::Sigmoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::Ramp => "ramp",
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
            LossKind::DoubleHinge => "double_hinge",
            LossKind::Sigmoid => "sigmoid",
        }
    }

    /// Margins where the loss is not differentiable.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            LossKind::ZeroOne => &[0.0],
            LossKind::Ramp | LossKind::DoubleHinge => &[-1.0, 1.0],
            LossKind::Hinge => &[1.0],
            LossKind::Squared | LossKind::Logistic | LossKind::Sigmoid => &[],
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = PuError;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PuError::UnknownLoss(s.to_string()))
    }
}

/// A loss together with its algebraic properties.
///
/// `sup_value` is infinite for unbounded losses; `lipschitz_constant` is
/// `None` when the loss is not Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub sup_value: f64,
    pub lipschitz_constant: Option<f64>,
    /// `ℓ(z) + ℓ(-z) = 1` for every margin.
    pub is_symmetric: bool,
    /// `ℓ(z) - ℓ(-z) = -z` for every margin.
    pub is_linear_odd: bool,
    pub is_differentiable_everywhere: bool,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        use LossKind::*;
        let (sup_value, lipschitz_constant, is_symmetric, is_linear_odd, smooth) = match kind {
            ZeroOne => (1.0, None, true, false, false),
            Ramp => (1.0, Some(0.5), true, false, false),
            Squared => (f64::INFINITY, None, false, true, true),
            Logistic => (f64::INFINITY, Some(1.0), false, true, true),
            Hinge => (f64::INFINITY, Some(1.0), false, false, false),
            DoubleHinge => (f64::INFINITY, Some(1.0), false, true, false),
            Sigmoid => (1.0, Some(0.25), true, false, true),
        };
        Self {
            kind,
            sup_value,
            lipschitz_constant,
            is_symmetric,
            is_linear_odd,
            is_differentiable_everywhere: smooth,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_value.is_finite()
    }

    /// `ℓ(z)` at margin `z`.
    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::ZeroOne => (1.0 - sign(z)) / 2.0,
            LossKind::Ramp => ((1.0 - z) / 2.0).clamp(0.0, 1.0),
            LossKind::Squared => (z - 1.0) * (z - 1.0) / 4.0,
            LossKind::Logistic => softplus(-z),
            LossKind::Hinge => (1.0 - z).max(0.0),
            LossKind::DoubleHinge => ((1.0 - z) / 2.0).max(-z).max(0.0),
            LossKind::Sigmoid => sigmoid_loss(z),
        }
    }

    /// `dℓ/dz` at margin `z`; kinks take the right-hand derivative.
    pub fn derivative(&self, z: f64) -> Result<f64> {
        let d = match self.kind {
            LossKind::ZeroOne => return Err(PuError::UnsupportedDerivative("zero_one")),
            LossKind::Ramp => {
                if (-1.0..1.0).contains(&z) {
                    -0.5
                } else {
                    0.0
                }
            }
            LossKind::Squared => (z - 1.0) / 2.0,
            LossKind::Logistic => -sigmoid_loss(z),
            LossKind::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::DoubleHinge => {
                if z < -1.0 {
                    -1.0
                } else if z < 1.0 {
                    -0.5
                } else {
                    0.0
                }
            }
            LossKind::Sigmoid => -sigmoid_loss(z) * sigmoid_loss(-z),
        };
        Ok(d)
    }
}

impl From<LossKind> for LossSpec {
    fn from(kind: LossKind) -> Self {
        LossSpec::new(kind)
    }
}

impl FromStr for LossSpec {
    type Err = PuError;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<LossKind>().map(LossSpec::new)
    }
}

fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `1 / (1 + e^z)` without overflow for large `|z|`.
fn sigmoid_loss(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
