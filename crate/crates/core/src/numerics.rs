//! Scalar abstraction, adaptive-precision reals and circle geometry.
//!
//! Every algorithm in the crate is written against [`Real`], which is
//! implemented for `f64` (fast, 53 bits) and for [`AdaptiveReal`], an
//! MPFR-backed binary float whose precision is carried by each value.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Num, One, Zero};
use rug::float::Round;
use rug::ops::Pow;
use rug::{Assign, Float};

use crate::error::{Error, Result};

/// Precision used when two exact constants are combined.
pub const DEFAULT_PRECISION: u32 = 128;

/// Smallest precision accepted by [`AdaptiveReal::with_precision`].
pub const MIN_PRECISION: u32 = 64;

/// Real scalar used throughout the crate.
pub trait Real:
    Num + Neg<Output = Self> + Clone + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Working precision in bits.
    fn precision(&self) -> u32;
    /// Round or extend to `bits`. `f64` ignores the request.
    fn with_precision(&self, bits: u32) -> Result<Self>;
    fn from_f64_at(x: f64, bits: u32) -> Self;
    fn from_i64_at(x: i64, bits: u32) -> Self;
    /// Parse a decimal string at the given precision.
    fn parse_at(s: &str, bits: u32) -> Option<Self>;
    fn pi_at(bits: u32) -> Self;
    fn to_f64(&self) -> f64;
    fn to_decimal(&self, digits: usize) -> String;

    fn abs(&self) -> Self;
    fn floor(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn tan(&self) -> Self;
    fn atan(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// `2^e` at the given precision.
    fn exp2_at(e: i32, bits: u32) -> Self;
    /// Integer part toward negative infinity, as `i64`.
    fn floor_i64(&self) -> i64 {
        self.floor().to_f64() as i64
    }

    /// Constant at this value's precision.
    fn cst(&self, x: f64) -> Self {
        Self::from_f64_at(x, self.precision())
    }
    fn int(&self, n: i64) -> Self {
        Self::from_i64_at(n, self.precision())
    }
    /// `2^e` at this value's precision.
    fn pow2(&self, e: i32) -> Self {
        Self::exp2_at(e, self.precision())
    }
    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }
    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
    /// Nearest integer, ties upward.
    fn round_i64(&self) -> i64 {
        (self.clone() + self.cst(0.5)).floor_i64()
    }
    /// Fractional part in `[0, 1)`.
    fn fract01(&self) -> Self {
        let r = self.clone() - self.floor();
        if r >= Self::one() {
            r - Self::one()
        } else {
            r
        }
    }
}

impl Real for f64 {
    fn precision(&self) -> u32 {
        53
    }
    fn with_precision(&self, _bits: u32) -> Result<Self> {
        Ok(*self)
    }
    fn from_f64_at(x: f64, _bits: u32) -> Self {
        x
    }
    fn from_i64_at(x: i64, _bits: u32) -> Self {
        x as f64
    }
    fn parse_at(s: &str, _bits: u32) -> Option<Self> {
        s.trim().parse().ok()
    }
    fn pi_at(_bits: u32) -> Self {
        std::f64::consts::PI
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_decimal(&self, digits: usize) -> String {
        format!("{:.*e}", digits.saturating_sub(1).min(16), self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn exp2_at(e: i32, _bits: u32) -> Self {
        2f64.powi(e)
    }
}

/// Binary floating-point number with an explicit precision in bits.
///
/// Results of arithmetic carry the minimum precision of their operands.
/// Values built by `zero()`/`one()` are exact constants and do not lower
/// the precision of the values they are combined with.
#[derive(Clone)]
pub struct AdaptiveReal {
    value: Float,
    exact: bool,
}

impl AdaptiveReal {
    pub fn new(bits: u32, x: f64) -> Self {
        AdaptiveReal {
            value: Float::with_val(bits, x),
            exact: false,
        }
    }

    /// Exact small constant.
    pub fn exact(x: i64) -> Self {
        AdaptiveReal {
            value: Float::with_val(64, x),
            exact: true,
        }
    }

    pub fn from_float(value: Float) -> Self {
        AdaptiveReal {
            value,
            exact: false,
        }
    }

    pub fn as_float(&self) -> &Float {
        &self.value
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Round (or zero-extend) to `bits`; `bits < 64` is rejected.
    pub fn with_precision(&self, bits: u32) -> Result<Self> {
        if bits < MIN_PRECISION {
            return Err(Error::PrecisionTooLow { bits });
        }
        let mut v = Float::new(bits);
        v.assign(&self.value);
        Ok(AdaptiveReal {
            value: v,
            exact: false,
        })
    }

    fn result_prec(&self, other: &Self) -> u32 {
        match (self.exact, other.exact) {
            (true, true) => DEFAULT_PRECISION.max(self.value.prec()).max(other.value.prec()),
            (true, false) => other.value.prec(),
            (false, true) => self.value.prec(),
            (false, false) => self.value.prec().min(other.value.prec()),
        }
    }

    fn unary(&self, f: impl FnOnce(&mut Float)) -> Self {
        let prec = if self.exact {
            DEFAULT_PRECISION.max(self.value.prec())
        } else {
            self.value.prec()
        };
        let mut v = Float::with_val(prec, &self.value);
        f(&mut v);
        AdaptiveReal {
            value: v,
            exact: false,
        }
    }
}

impl fmt::Debug for AdaptiveReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}b]", self.value.to_f64(), self.value.prec())
    }
}

impl fmt::Display for AdaptiveReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(20))
    }
}

impl PartialEq for AdaptiveReal {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for AdaptiveReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr for AdaptiveReal {
            type Output = AdaptiveReal;
            fn $method(self, rhs: AdaptiveReal) -> AdaptiveReal {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a AdaptiveReal> for &'a AdaptiveReal {
            type Output = AdaptiveReal;
            fn $method(self, rhs: &'a AdaptiveReal) -> AdaptiveReal {
                let prec = self.result_prec(rhs);
                let (value, dir) = Float::with_val_round(prec, &self.value $op &rhs.value, Round::Nearest);
                AdaptiveReal {
                    value,
                    exact: self.exact && rhs.exact && dir == Ordering::Equal,
                }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Rem for AdaptiveReal {
    type Output = AdaptiveReal;
    fn rem(self, rhs: AdaptiveReal) -> AdaptiveReal {
        let q = (&self / &rhs).floor_trunc();
        let prod = &q * &rhs;
        &self - &prod
    }
}

impl AdaptiveReal {
    fn floor_trunc(&self) -> AdaptiveReal {
        AdaptiveReal {
            value: self.value.clone().trunc(),
            exact: self.exact,
        }
    }
}

impl Neg for AdaptiveReal {
    type Output = AdaptiveReal;
    fn neg(self) -> AdaptiveReal {
        AdaptiveReal {
            value: -self.value,
            exact: self.exact,
        }
    }
}

impl Zero for AdaptiveReal {
    fn zero() -> Self {
        AdaptiveReal::exact(0)
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero()
    }
}

impl One for AdaptiveReal {
    fn one() -> Self {
        AdaptiveReal::exact(1)
    }
}

impl Num for AdaptiveReal {
    type FromStrRadixErr = Error;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self> {
        let parsed = Float::parse_radix(s, radix as i32)
            .map_err(|e| Error::InvalidArgument(format!("cannot parse {s:?}: {e}")))?;
        Ok(AdaptiveReal::from_float(Float::with_val(DEFAULT_PRECISION, parsed)))
    }
}

impl Real for AdaptiveReal {
    fn precision(&self) -> u32 {
        self.value.prec()
    }
    fn with_precision(&self, bits: u32) -> Result<Self> {
        AdaptiveReal::with_precision(self, bits)
    }
    fn from_f64_at(x: f64, bits: u32) -> Self {
        AdaptiveReal::new(bits, x)
    }
    fn from_i64_at(x: i64, bits: u32) -> Self {
        AdaptiveReal::from_float(Float::with_val(bits, x))
    }
    // Integers and powers of two are exact, so they never lower the
    // precision of the value they are combined with.
    fn int(&self, n: i64) -> Self {
        AdaptiveReal::exact(n)
    }
    fn pow2(&self, e: i32) -> Self {
        let mut v = AdaptiveReal::exact(1);
        v.value <<= e;
        v
    }
    fn parse_at(s: &str, bits: u32) -> Option<Self> {
        let parsed = Float::parse(s.trim()).ok()?;
        Some(AdaptiveReal::from_float(Float::with_val(bits, parsed)))
    }
    fn pi_at(bits: u32) -> Self {
        AdaptiveReal::from_float(Float::with_val(bits, rug::float::Constant::Pi))
    }
    fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
    fn to_decimal(&self, digits: usize) -> String {
        self.value.to_string_radix(10, Some(digits.max(2)))
    }
    fn abs(&self) -> Self {
        AdaptiveReal {
            value: self.value.clone().abs(),
            exact: self.exact,
        }
    }
    // Rounding to an integer is exact at the input's own precision.
    fn floor(&self) -> Self {
        AdaptiveReal {
            value: self.value.clone().floor(),
            exact: self.exact,
        }
    }
    fn sqrt(&self) -> Self {
        self.unary(|v| {
            v.sqrt_mut();
        })
    }
    fn ln(&self) -> Self {
        self.unary(|v| {
            v.ln_mut();
        })
    }
    fn exp(&self) -> Self {
        self.unary(|v| {
            v.exp_mut();
        })
    }
    fn sin(&self) -> Self {
        self.unary(|v| {
            v.sin_mut();
        })
    }
    fn cos(&self) -> Self {
        self.unary(|v| {
            v.cos_mut();
        })
    }
    fn sin_cos(&self) -> (Self, Self) {
        let s = self.unary(|_| {});
        let mut sin = s.value.clone();
        let mut cos = Float::new(sin.prec());
        sin.sin_cos_mut(&mut cos);
        (AdaptiveReal::from_float(sin), AdaptiveReal::from_float(cos))
    }
    fn tan(&self) -> Self {
        self.unary(|v| {
            v.tan_mut();
        })
    }
    fn atan(&self) -> Self {
        self.unary(|v| {
            v.atan_mut();
        })
    }
    fn powi(&self, n: i32) -> Self {
        self.unary(|v| {
            let p = v.clone().pow(n);
            v.assign(p);
        })
    }
    fn exp2_at(e: i32, bits: u32) -> Self {
        let mut v = Float::with_val(bits, 1);
        v <<= e;
        AdaptiveReal::from_float(v)
    }
    fn floor_i64(&self) -> i64 {
        self.value
            .to_integer_round(Round::Down)
            .and_then(|(i, _)| i.to_i64())
            .unwrap_or(if self.value.is_sign_negative() { i64::MIN } else { i64::MAX })
    }
}

/// Precision in bits used for renormalization level `n` when the largest
/// partial quotient seen so far is `max_quotient`.
pub fn level_precision(n: usize, max_quotient: u64) -> u32 {
    let growth = 16.0 * n as f64 * ((max_quotient + 1) as f64).log2();
    (96.0 + growth).ceil().max(128.0) as u32
}

/// Bits needed to resolve the combinatorics of the given partial quotients.
pub fn required_bits(quotients: &[u64]) -> u32 {
    let s: f64 = quotients.iter().map(|&a| ((a + 1) as f64).log2()).sum();
    (96.0 + 16.0 * s).ceil() as u32
}

/// Comparison tolerance `2^{4-P}` for values at precision `P`.
pub fn tolerance<T: Real>(x: &T) -> T {
    x.pow2(4 - x.precision() as i32)
}

/// Neumaier compensated summation.
pub fn compensated_sum<T: Real>(terms: &[T]) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for t in terms {
        let s = sum.clone() + t.clone();
        if sum.abs() >= t.abs() {
            comp = comp + ((sum.clone() - s.clone()) + t.clone());
        } else {
            comp = comp + ((t.clone() - s.clone()) + sum.clone());
        }
        sum = s;
    }
    sum + comp
}

/// Plain left-to-right summation (fixed association order).
pub fn naive_sum<T: Real>(terms: &[T]) -> T {
    terms.iter().fold(T::zero(), |acc, t| acc + t.clone())
}

/// Point of the circle `R/Z`, stored by its representative in `[0, 1)`.
#[derive(Clone, Debug)]
pub struct CirclePoint<T> {
    rep: T,
}

impl<T: Real> CirclePoint<T> {
    pub fn new(x: T) -> Self {
        CirclePoint { rep: x.fract01() }
    }

    pub fn rep(&self) -> &T {
        &self.rep
    }

    /// Positive-orientation displacement from `self` to `other`, in `[0, 1)`.
    pub fn offset_to(&self, other: &Self) -> T {
        (other.rep.clone() - self.rep.clone()).fract01()
    }

    /// Unsigned distance on the circle, in `[0, 1/2]`.
    pub fn distance(&self, other: &Self) -> T {
        let d = self.offset_to(other);
        let e = T::one() - d.clone();
        d.min_of(e)
    }

    /// Equality modulo 1 within `2^{4-P}`.
    pub fn approx_eq(&self, other: &Self) -> bool {
        let d = self.offset_to(other);
        let tol = tolerance(&d);
        d <= tol.clone() || T::one() - d <= tol
    }
}

/// Positively oriented arc from `start` to `end`. Equal endpoints describe
/// the full circle.
#[derive(Clone, Debug)]
pub struct Arc<T> {
    pub start: CirclePoint<T>,
    pub end: CirclePoint<T>,
}

impl<T: Real> Arc<T> {
    pub fn new(start: CirclePoint<T>, end: CirclePoint<T>) -> Self {
        Arc { start, end }
    }

    pub fn from_reps(start: T, end: T) -> Self {
        Arc::new(CirclePoint::new(start), CirclePoint::new(end))
    }

    pub fn is_full(&self) -> bool {
        self.start.offset_to(&self.end).is_zero()
    }

    /// Complement arc; `None` for the full circle (empty arcs do not exist).
    pub fn complement(&self) -> Option<Self> {
        if self.is_full() {
            None
        } else {
            Some(Arc::new(self.end.clone(), self.start.clone()))
        }
    }

    /// Split at an interior point.
    pub fn split_at(&self, p: &CirclePoint<T>) -> Option<(Self, Self)> {
        if !self.contains(p) {
            return None;
        }
        Some((
            Arc::new(self.start.clone(), p.clone()),
            Arc::new(p.clone(), self.end.clone()),
        ))
    }

    /// Positively oriented length in `(0, 1]`.
    pub fn length(&self) -> T {
        arc_length(self)
    }

    /// True iff `p` lies strictly inside the arc.
    pub fn contains(&self, p: &CirclePoint<T>) -> bool {
        arc_contains(self, p)
    }
}

pub fn arc_length<T: Real>(a: &Arc<T>) -> T {
    let d = a.start.offset_to(&a.end);
    if d.is_zero() {
        T::one()
    } else {
        d
    }
}

pub fn arc_contains<T: Real>(a: &Arc<T>, p: &CirclePoint<T>) -> bool {
    let d = a.start.offset_to(p);
    d.is_positive() && d < arc_length(a)
}

/// Root of an increasing function on `[lo, hi]` by Newton steps kept
/// inside a shrinking bracket, falling back to bisection.
///
/// `g` returns the value and derivative of the function minus its target.
/// Stops when the bracket or the step falls below `2^{8-P}` times the scale
/// of the bracket endpoints.
pub fn solve_increasing<T: Real>(g: impl Fn(&T) -> (T, T), lo: &T, hi: &T) -> Result<T> {
    let (mut lo, mut hi) = if lo <= hi { (lo.clone(), hi.clone()) } else { (hi.clone(), lo.clone()) };
    let (g_lo, _) = g(&lo);
    let (g_hi, _) = g(&hi);
    if g_lo.is_positive() || g_hi.is_negative() {
        return Err(Error::Precondition(format!(
            "root not bracketed: g({lo}) = {g_lo}, g({hi}) = {g_hi}"
        )));
    }
    if g_lo.is_zero() {
        return Ok(lo);
    }
    if g_hi.is_zero() {
        return Ok(hi);
    }
    let bits = lo.precision().min(hi.precision());
    let half = T::one() / T::from_i64_at(2, bits);
    let scale = lo.abs().max_of(hi.abs()).max_of(T::exp2_at(-64, bits));
    let tol = scale * T::exp2_at(8 - bits as i32, bits);
    let mut x = (lo.clone() + hi.clone()) * half.clone();
    for _ in 0..(4 * bits as usize) {
        let (v, d) = g(&x);
        if v.is_zero() {
            return Ok(x);
        }
        if v.is_negative() {
            lo = x.clone();
        } else {
            hi = x.clone();
        }
        if hi.clone() - lo.clone() <= tol {
            return Ok(x);
        }
        let newton = if d.is_positive() { Some(x.clone() - v / d) } else { None };
        let next = match newton {
            Some(n) if n > lo && n < hi => n,
            _ => (lo.clone() + hi.clone()) * half.clone(),
        };
        if (next.clone() - x.clone()).abs() <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::PrecisionLoss("root solver did not converge".into()))
}

pub type Real512 = AdaptiveReal;

#[cfg(test)]
mod tests {
    use super::*;

    fn ar(x: f64) -> AdaptiveReal {
        AdaptiveReal::new(256, x)
    }

    #[test]
    fn arc_length_examples() {
        assert_eq!(Arc::from_reps(0.25, 0.75).length(), 0.5);
        assert!((Arc::from_reps(0.9, 0.1).length() - 0.2).abs() < 1e-15);
        assert_eq!(Arc::from_reps(0.3, 0.3).length(), 1.0);
    }

    #[test]
    fn arc_contains_examples() {
        let p = |x| CirclePoint::new(x);
        assert!(Arc::from_reps(0.0, 0.5).contains(&p(0.25)));
        assert!(Arc::from_reps(0.9, 0.1).contains(&p(0.0)));
        assert!(!Arc::from_reps(0.0, 0.5).contains(&p(0.75)));
        assert!(!Arc::from_reps(0.0, 0.5).contains(&p(0.0)));
    }

    #[test]
    fn full_arc_has_no_complement() {
        assert!(Arc::from_reps(ar(0.4), ar(0.4)).complement().is_none());
    }

    #[test]
    fn with_precision_examples() {
        let third = AdaptiveReal::from_i64_at(1, 128) / AdaptiveReal::from_i64_at(3, 128);
        let wide = third.with_precision(256).unwrap();
        assert_eq!(wide.precision(), 256);
        assert_eq!(wide, third);

        let pi = AdaptiveReal::pi_at(256);
        let narrow = pi.with_precision(128).unwrap();
        assert_eq!(narrow.precision(), 128);
        assert_eq!(narrow, AdaptiveReal::pi_at(128));

        assert!(AdaptiveReal::zero().with_precision(300).unwrap().is_zero());
        assert_eq!(
            third.with_precision(32).unwrap_err(),
            Error::PrecisionTooLow { bits: 32 }
        );
    }

    #[test]
    fn precision_propagates_as_minimum() {
        let a = AdaptiveReal::new(256, 0.1);
        let b = AdaptiveReal::new(128, 0.2);
        assert_eq!((a.clone() + b).precision(), 128);
        assert_eq!((a.clone() * AdaptiveReal::one()).precision(), 256);
        assert_eq!((a + AdaptiveReal::from_i64_at(2, 512)).precision(), 256);
    }

    #[test]
    fn integer_constants_keep_precision() {
        let zero = AdaptiveReal::zero();
        let x = AdaptiveReal::new(512, 0.1);
        assert_eq!((x.clone() - zero.int(3)).precision(), 512);
        assert_eq!((x.clone() * zero.pow2(-70)).precision(), 512);
        assert_eq!(zero.pow2(-70).to_f64(), 2f64.powi(-70));
        let y = zero.clone() - zero.int(0);
        assert_eq!((x.clone() + y).precision(), 512);
        let half = AdaptiveReal::one() / AdaptiveReal::exact(2);
        assert!(half.floor().is_exact() && half.fract01().is_exact());
        assert_eq!((x.clone() - half.fract01()).precision(), 512);
        let third = AdaptiveReal::one() / AdaptiveReal::exact(3);
        assert_eq!((x + third).precision(), DEFAULT_PRECISION);
    }

    #[test]
    fn relative_error_of_division_within_bound() {
        let p = 200;
        let x = AdaptiveReal::from_i64_at(1, p) / AdaptiveReal::from_i64_at(7, p);
        let hi = AdaptiveReal::from_i64_at(1, 1000) / AdaptiveReal::from_i64_at(7, 1000);
        let rel = ((x.with_precision(1000).unwrap() - hi.clone()) / hi).abs();
        assert!(rel <= AdaptiveReal::exp2_at(1 - p as i32, 1000));
    }

    #[test]
    fn solver_finds_cube_root() {
        let g = |x: &AdaptiveReal| {
            let x2 = x.clone() * x.clone();
            (x2.clone() * x.clone() - ar(2.0), ar(3.0) * x2)
        };
        let r = solve_increasing(g, &ar(0.0), &ar(2.0)).unwrap();
        let err = r.clone() * r.clone() * r - ar(2.0);
        assert!(err.abs() < AdaptiveReal::exp2_at(-240, 256));
        assert!(solve_increasing(g, &ar(2.0), &ar(3.0)).is_err());
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(level_precision(0, 1), 128);
        assert_eq!(level_precision(10, 1), 256);
        assert_eq!(required_bits(&[1; 12]), 96 + 16 * 12);
    }

    #[test]
    fn circle_point_equality_mod_one() {
        let x = ar(0.3) / ar(7.0);
        let a = CirclePoint::new(x.clone() + AdaptiveReal::exact(3));
        let b = CirclePoint::new(x - AdaptiveReal::exact(1));
        assert!(a.approx_eq(&b));
        assert!(!a.approx_eq(&CirclePoint::new(ar(0.5))));
    }
}
