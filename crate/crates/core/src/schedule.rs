//! Closed-form step schedules and their asymptotic rates.
//!
//! A schedule `s(k)` is one of `c`, `c (k+1)^-a` or `c r^k`. Every schedule is
//! asymptotically `coeff * (k+1)^-power * ratio^k`; that shape is closed under
//! products and quotients, which is enough to decide whether the flow series
//! of every built-in model converges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `c`
    Constant { c: f64 },
    /// `c * (k+1)^-a`
    Power { c: f64, a: f64 },
    /// `c * r^k`
    Geometric { c: f64, r: f64 },
}

impl Schedule {
    pub fn value(&self, k: u64) -> f64 {
        match *self {
            Schedule::Constant { c } => c,
            Schedule::Power { c, a } => c * ((k + 1) as f64).powf(-a),
            Schedule::Geometric { c, r } => {
                if c == 0.0 {
                    0.0
                } else {
                    c * r.powf(k as f64)
                }
            }
        }
    }

    pub fn rate(&self) -> Rate {
        match *self {
            Schedule::Constant { c } => Rate::new(c, 0.0, 1.0),
            Schedule::Power { c, a } => Rate::new(c, a, 1.0),
            Schedule::Geometric { c, r } => Rate::new(c, 0.0, r),
        }
    }

    /// Asymptotic rate of `1 - s(k)`.
    pub fn complement_rate(&self) -> Rate {
        match *self {
            Schedule::Constant { c } => Rate::new(1.0 - c, 0.0, 1.0),
            Schedule::Power { c, a } if a == 0.0 => Rate::new(1.0 - c, 0.0, 1.0),
            Schedule::Geometric { c, r } if r == 1.0 => Rate::new(1.0 - c, 0.0, 1.0),
            // Decaying schedules leave 1 - s(k) -> 1.
            _ => Rate::new(1.0, 0.0, 1.0),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match *self {
            Schedule::Constant { .. } => true,
            Schedule::Power { c, a } => c == 0.0 || a >= 0.0,
            Schedule::Geometric { c, r } => c == 0.0 || r <= 1.0,
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            Schedule::Constant { c } => c.is_finite(),
            Schedule::Power { c, a } => c.is_finite() && a.is_finite(),
            Schedule::Geometric { c, r } => c.is_finite() && r.is_finite(),
        }
    }

    /// Checks `s(k) >= 0` for every `k`.
    pub fn validate_nonnegative(&self, what: &str) -> Result<()> {
        let ok = self.params_finite()
            && match *self {
                Schedule::Constant { c } | Schedule::Power { c, .. } => c >= 0.0,
                Schedule::Geometric { c, r } => c >= 0.0 && (c == 0.0 || r > 0.0),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what}: schedule {self:?} takes negative values")))
        }
    }

    /// Checks `s(k) in [0, 1]` for every `k`.
    pub fn validate_probability(&self, what: &str) -> Result<()> {
        self.validate_nonnegative(what)?;
        let max = self.value(0);
        if self.is_nonincreasing() && max <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what}: schedule {self:?} leaves [0, 1]")))
        }
    }

    /// Checks `s(k) in (0, 1]` for every `k`.
    pub fn validate_mixing(&self, what: &str) -> Result<()> {
        self.validate_probability(what)?;
        let positive = match *self {
            Schedule::Constant { c } | Schedule::Power { c, .. } | Schedule::Geometric { c, .. } => c > 0.0,
        };
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what}: schedule {self:?} must stay positive")))
        }
    }
}

/// Whether a nonnegative series is known to diverge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClass {
    Divergent,
    Summable,
    Unknown,
}

/// Asymptotic shape `coeff * (k+1)^-power * ratio^k` of a nonnegative sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub coeff: f64,
    pub power: f64,
    pub ratio: f64,
}

impl Rate {
    pub const ZERO: Rate = Rate {
        coeff: 0.0,
        power: 0.0,
        ratio: 1.0,
    };

    pub fn new(coeff: f64, power: f64, ratio: f64) -> Self {
        if coeff == 0.0 || ratio == 0.0 {
            Self::ZERO
        } else {
            Self { coeff, power, ratio }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0.0
    }

    pub fn mul(self, other: Rate) -> Rate {
        Rate::new(
            self.coeff * other.coeff,
            self.power + other.power,
            self.ratio * other.ratio,
        )
    }

    /// Quotient; `other` must be nonzero.
    pub fn div(self, other: Rate) -> Rate {
        debug_assert!(!other.is_zero());
        Rate::new(
            self.coeff / other.coeff,
            self.power - other.power,
            self.ratio / other.ratio,
        )
    }

    pub fn scale(self, factor: f64) -> Rate {
        Rate::new(self.coeff * factor, self.power, self.ratio)
    }

    /// Asymptotic shape of the sum: the dominant term, coefficients added on ties.
    pub fn plus(self, other: Rate) -> Rate {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        if self.ratio != other.ratio {
            return if self.ratio > other.ratio { self } else { other };
        }
        if self.power != other.power {
            return if self.power < other.power { self } else { other };
        }
        Rate::new(self.coeff + other.coeff, self.power, self.ratio)
    }

    /// Divergence of `sum_k rate(k)` by comparison with p-series and geometric series.
    pub fn series_class(&self) -> SeriesClass {
        if self.is_zero() || self.ratio < 1.0 {
            SeriesClass::Summable
        } else if self.ratio > 1.0 || self.power <= 1.0 {
            SeriesClass::Divergent
        } else {
            SeriesClass::Summable
        }
    }
}
