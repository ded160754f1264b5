//! Sign plus natural-log-magnitude numbers.
//!
//! Polynomial values such as `(-1)^n Q_n(-1)` grow super-geometrically and
//! weights such as `pi_n` may under- or overflow; both are carried here.
//! [`BinaryScaled`] holds long positive running sums.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledValue {
    sign: i8,
    log_mag: f64,
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };
    pub const ONE: ScaledValue = ScaledValue {
        sign: 1,
        log_mag: 0.0,
    };

    /// Builds a value from a sign and a log-magnitude. A zero sign or a
    /// log-magnitude of `-inf` both give [`ScaledValue::ZERO`].
    pub fn from_parts(sign: i8, log_mag: f64) -> Self {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            ScaledValue {
                sign: sign.signum(),
                log_mag,
            }
        }
    }

    /// Positive value with the given natural log.
    pub fn from_ln(log_mag: f64) -> Self {
        Self::from_parts(1, log_mag)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            ScaledValue {
                sign: if x > 0.0 { 1 } else { -1 },
                log_mag: x.abs().ln(),
            }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_mag(&self) -> f64 {
        self.log_mag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Converts back to a double; may overflow to `±inf` or underflow to 0.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_mag.exp(),
        }
    }

    pub fn abs(&self) -> Self {
        ScaledValue {
            sign: self.sign.abs(),
            log_mag: self.log_mag,
        }
    }

    pub fn recip(&self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        ScaledValue {
            sign: self.sign,
            log_mag: -self.log_mag,
        }
    }

    pub fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = if self.sign < 0 && n % 2 != 0 { -1 } else { 1 };
        ScaledValue {
            sign,
            log_mag: self.log_mag * f64::from(n),
        }
    }

    /// Relative difference `|a - b| / max(|a|, |b|)`, computed without
    /// leaving log space when the signs agree.
    pub fn rel_diff(&self, other: &ScaledValue) -> f64 {
        match (self.sign, other.sign) {
            (0, 0) => 0.0,
            (a, b) if a != b => {
                if a == 0 || b == 0 {
                    1.0
                } else {
                    2.0
                }
            }
            _ => {
                let d = self.log_mag - other.log_mag;
                // |e^d - 1| relative to the larger of the two
                (-d.abs()).exp_m1().abs()
            }
        }
    }

    /// Sums signed values with a shared exponent and compensated summation.
    pub fn sum<'a, I>(values: I) -> ScaledValue
    where
        I: IntoIterator<Item = &'a ScaledValue> + Clone,
    {
        let max = values
            .clone()
            .into_iter()
            .filter(|v| v.sign != 0)
            .map(|v| v.log_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        for v in values {
            if v.sign == 0 {
                continue;
            }
            let term = f64::from(v.sign) * (v.log_mag - max).exp();
            let t = acc + term;
            if acc.abs() >= term.abs() {
                comp += (acc - t) + term;
            } else {
                comp += (term - t) + acc;
            }
            acc = t;
        }
        let total = acc + comp;
        if total == 0.0 {
            Self::ZERO
        } else {
            let s = Self::from_f64(total);
            ScaledValue {
                sign: s.sign,
                log_mag: s.log_mag + max,
            }
        }
    }

    /// Compares magnitudes and signs as real numbers.
    pub fn cmp_value(&self, other: &ScaledValue) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.log_mag.total_cmp(&other.log_mag),
                _ => other.log_mag.total_cmp(&self.log_mag),
            },
            o => o,
        }
    }
}

impl Default for ScaledValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: ScaledValue) -> ScaledValue {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        ScaledValue {
            sign: self.sign * rhs.sign,
            log_mag: self.log_mag + rhs.log_mag,
        }
    }
}

impl Div for ScaledValue {
    type Output = ScaledValue;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: ScaledValue) -> ScaledValue {
        self * rhs.recip()
    }
}

impl Neg for ScaledValue {
    type Output = ScaledValue;
    fn neg(self) -> ScaledValue {
        ScaledValue {
            sign: -self.sign,
            log_mag: self.log_mag,
        }
    }
}

impl Add for ScaledValue {
    type Output = ScaledValue;
    fn add(self, rhs: ScaledValue) -> ScaledValue {
        ScaledValue::sum([self, rhs].iter())
    }
}

impl Sub for ScaledValue {
    type Output = ScaledValue;
    fn sub(self, rhs: ScaledValue) -> ScaledValue {
        self + (-rhs)
    }
}

/// `ln(e^a + e^b)` for log-magnitudes of nonnegative quantities.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when equal.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a <= b {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// Nonnegative number stored as `mantissa * 2^exponent`.
///
/// Used for running sums of positive series whose partial sums may leave
/// the double range; unlike [`ScaledValue`] the relative precision does not
/// degrade with magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryScaled {
    mantissa: f64,
    exponent: i64,
}

const MANTISSA_HI: f64 = 1e100;
const MANTISSA_LO: f64 = 1e-100;

impl BinaryScaled {
    pub const ZERO: BinaryScaled = BinaryScaled { mantissa: 0.0, exponent: 0 };

    pub fn from_f64(x: f64) -> Self {
        debug_assert!(x >= 0.0 && x.is_finite());
        BinaryScaled { mantissa: x, exponent: 0 }.normalized()
    }

    fn normalized(mut self) -> Self {
        let m = self.mantissa;
        if m == 0.0 {
            return Self::ZERO;
        }
        if !(MANTISSA_LO..=MANTISSA_HI).contains(&m) {
            let e = m.log2().floor() as i32;
            self.mantissa = m * 2f64.powi(-e);
            self.exponent += e as i64;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn scale(self, factor: f64) -> Self {
        BinaryScaled {
            mantissa: self.mantissa * factor,
            exponent: self.exponent,
        }
        .normalized()
    }

    /// `self / other` as a plain double, for comparing sums of similar size.
    pub fn ratio(self, other: BinaryScaled) -> f64 {
        let shift = self.exponent - other.exponent;
        self.mantissa / other.mantissa * 2f64.powi(shift.clamp(-4000, 4000) as i32)
    }

    pub fn ln(&self) -> f64 {
        self.mantissa.ln() + self.exponent as f64 * std::f64::consts::LN_2
    }

    /// Nearest double; `inf` past the double range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let e = self.exponent.clamp(-4000, 4000) as i32;
        // split the power so neither factor overflows prematurely
        let half = e / 2;
        self.mantissa * 2f64.powi(half) * 2f64.powi(e - half)
    }

    pub fn to_scaled(&self) -> ScaledValue {
        ScaledValue::from_parts(if self.is_zero() { 0 } else { 1 }, self.ln())
    }
}

impl Mul for BinaryScaled {
    type Output = BinaryScaled;
    fn mul(self, other: BinaryScaled) -> Self {
        BinaryScaled {
            mantissa: self.mantissa * other.mantissa,
            exponent: self.exponent + other.exponent,
        }
        .normalized()
    }
}

impl Add for BinaryScaled {
    type Output = BinaryScaled;
    fn add(self, other: BinaryScaled) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exponent >= other.exponent { (self, other) } else { (other, self) };
        let shift = lo.exponent - hi.exponent;
        let aligned = if shift < -2000 { 0.0 } else { lo.mantissa * 2f64.powi(shift as i32) };
        BinaryScaled {
            mantissa: hi.mantissa + aligned,
            exponent: hi.exponent,
        }
        .normalized()
    }
}

impl PartialOrd for BinaryScaled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            _ => self.ratio(*other).partial_cmp(&1.0),
        }
    }
}
