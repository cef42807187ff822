//! Extended-range real numbers stored as a sign and a natural-log magnitude.
//!
//! Green's functions of order `n` grow like `n!`, which exceeds the range of
//! `f64` near `n = 170`. Every magnitude in the crate is therefore carried as
//! `sign * exp(logmag)`.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A real number `sign * exp(logmag)` with `sign` in `{-1, 0, +1}`.
///
/// Zero is represented by `sign == 0` together with `logmag == -inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtScalar {
    sign: i8,
    logmag: f64,
}

impl ExtScalar {
    /// The additive identity.
    pub const ZERO: ExtScalar = ExtScalar {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };
    /// The multiplicative identity.
    pub const ONE: ExtScalar = ExtScalar {
        sign: 1,
        logmag: 0.0,
    };

    /// Builds a value from its sign and natural-log magnitude.
    ///
    /// A zero sign or a magnitude of `-inf` yields [`ExtScalar::ZERO`].
    pub fn from_parts(sign: i8, logmag: f64) -> Self {
        if sign == 0 || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            ExtScalar {
                sign: sign.signum(),
                logmag,
            }
        }
    }

    /// Converts an ordinary float.
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            ExtScalar {
                sign: if x > 0.0 { 1 } else { -1 },
                logmag: x.abs().ln(),
            }
        }
    }

    /// `exp(logmag)` with positive sign.
    pub fn from_ln(logmag: f64) -> Self {
        Self::from_parts(1, logmag)
    }

    /// Sign in `{-1, 0, +1}`.
    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural logarithm of the magnitude (`-inf` for zero).
    pub fn logmag(self) -> f64 {
        self.logmag
    }

    /// Base-10 logarithm of the magnitude.
    pub fn log10mag(self) -> f64 {
        self.logmag / std::f64::consts::LN_10
    }

    /// True when the value is exactly zero.
    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Absolute value.
    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            ExtScalar {
                sign: 1,
                logmag: self.logmag,
            }
        }
    }

    /// Linear value, which overflows to `±inf` or underflows to zero outside the `f64` range.
    pub fn to_f64(self) -> f64 {
        f64::from(self.sign) * self.logmag.exp()
    }

    /// Linear value when it is finite and not flushed to zero.
    pub fn to_f64_checked(self) -> Option<f64> {
        let v = self.to_f64();
        if v.is_finite() && (v != 0.0 || self.sign == 0) {
            Some(v)
        } else {
            None
        }
    }

    /// Multiplies by `exp(k)`.
    pub fn scale_ln(self, k: f64) -> Self {
        Self::from_parts(self.sign, self.logmag + k)
    }

    /// Integer power.
    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        let sign = if k % 2 == 0 { self.sign.abs() } else { self.sign };
        Self::from_parts(sign, self.logmag * f64::from(k))
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(self) -> Option<Self> {
        if self.sign == 0 {
            None
        } else {
            Some(ExtScalar {
                sign: self.sign,
                logmag: -self.logmag,
            })
        }
    }

    /// Ratio `|self| / |other|` as an `f64`, which may overflow to `inf`.
    pub fn abs_ratio(self, other: Self) -> f64 {
        (self.logmag - other.logmag).exp()
    }

    /// Compares magnitudes.
    pub fn cmp_abs(self, other: Self) -> Ordering {
        self.logmag
            .partial_cmp(&other.logmag)
            .unwrap_or(Ordering::Equal)
    }
}

impl Default for ExtScalar {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for ExtScalar {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Neg for ExtScalar {
    type Output = ExtScalar;
    fn neg(self) -> ExtScalar {
        ExtScalar {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }
}

impl Mul for ExtScalar {
    type Output = ExtScalar;
    fn mul(self, rhs: ExtScalar) -> ExtScalar {
        if self.sign == 0 || rhs.sign == 0 {
            ExtScalar::ZERO
        } else {
            ExtScalar {
                sign: self.sign * rhs.sign,
                logmag: self.logmag + rhs.logmag,
            }
        }
    }
}

impl Div for ExtScalar {
    type Output = ExtScalar;
    /// Division by zero yields a signed infinite magnitude.
    fn div(self, rhs: ExtScalar) -> ExtScalar {
        if self.sign == 0 {
            return ExtScalar::ZERO;
        }
        if rhs.sign == 0 {
            return ExtScalar {
                sign: self.sign,
                logmag: f64::INFINITY,
            };
        }
        ExtScalar {
            sign: self.sign * rhs.sign,
            logmag: self.logmag - rhs.logmag,
        }
    }
}

impl Add for ExtScalar {
    type Output = ExtScalar;
    fn add(self, rhs: ExtScalar) -> ExtScalar {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.logmag >= rhs.logmag {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = small.logmag - big.logmag;
        if big.sign == small.sign {
            ExtScalar {
                sign: big.sign,
                logmag: big.logmag + d.exp().ln_1p(),
            }
        } else if d == 0.0 {
            ExtScalar::ZERO
        } else {
            ExtScalar::from_parts(big.sign, big.logmag + (-d.exp()).ln_1p())
        }
    }
}

impl Sub for ExtScalar {
    type Output = ExtScalar;
    fn sub(self, rhs: ExtScalar) -> ExtScalar {
        self + (-rhs)
    }
}

impl std::iter::Sum for ExtScalar {
    fn sum<I: Iterator<Item = ExtScalar>>(iter: I) -> ExtScalar {
        SignedAccumulator::from_iter(iter).total()
    }
}

impl fmt::Display for ExtScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_f64_checked() {
            Some(v) => write!(f, "{v:e}"),
            None => {
                let l10 = self.log10mag();
                let e = l10.floor();
                let m = f64::from(self.sign) * 10f64.powf(l10 - e);
                write!(f, "{m}e{e}")
            }
        }
    }
}

/// Sums positive and negative contributions in separate log-sum-exp
/// accumulators and combines them once.
#[derive(Clone, Copy, Debug, Default)]
pub struct SignedAccumulator {
    pos: ExtScalar,
    neg: ExtScalar,
}

impl SignedAccumulator {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one term.
    pub fn push(&mut self, x: ExtScalar) {
        match x.sign {
            1 => self.pos = self.pos + x,
            -1 => self.neg = self.neg + x.abs(),
            _ => {}
        }
    }

    /// Sum of all positive terms.
    pub fn positive(&self) -> ExtScalar {
        self.pos
    }

    /// Magnitude of the sum of all negative terms.
    pub fn negative(&self) -> ExtScalar {
        self.neg
    }

    /// Signed total.
    pub fn total(&self) -> ExtScalar {
        self.pos - self.neg
    }
}

impl FromIterator<ExtScalar> for SignedAccumulator {
    fn from_iter<I: IntoIterator<Item = ExtScalar>>(iter: I) -> Self {
        let mut acc = SignedAccumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// `ln(n!)` through the log-gamma function.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}
