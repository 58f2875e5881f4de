//! Bi-critical circle maps with closed-form derivatives.
//!
//! All lifts are evaluated in internal coordinates where the two critical
//! points sit at 0 and 1/2. A rotation conjugate `x ↦ F(x − s) + s` keeps
//! the same internal arithmetic and only records the shift `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::numerics::{CirclePoint, Real};

/// Degree-one circle lift with third-order jets.
pub trait CircleLift<T: Real>: Send + Sync {
    fn eval(&self, x: &T) -> T;
    /// `[F, F', F'', F''']` at `x`.
    fn local_jet(&self, x: &T) -> [T; 4];
    /// Working precision of the map parameters.
    fn precision(&self) -> u32;
    /// Marked points in `[0, 1)`; the first is the base point `c0 = 0`.
    fn marked_points(&self) -> Vec<T>;
    /// Critical points in `[0, 1)`.
    fn critical_set(&self) -> Vec<T> {
        self.marked_points()
    }

    /// `s` such that external coordinates are internal ones plus `s`.
    fn frame_shift(&self) -> Option<T> {
        None
    }

    fn jet(&self, j: &Jet<T>) -> Jet<T> {
        if j.order == 0 {
            Jet::value_only(self.eval(&j.v))
        } else {
            j.compose_with(self.local_jet(&j.v))
        }
    }

    /// `F^k(x)` on the lift.
    fn iterate(&self, x: &T, k: u64) -> T {
        self.iterate_shifted(x, k, 0)
    }

    /// `F^k(x) − p`, with the integer part carried exactly.
    fn iterate_shifted(&self, x: &T, k: u64, p: i64) -> T {
        let (y, m) = self.iterate_reduced(x, k);
        y + x.int(m - p)
    }

    /// `(y, m)` with `F^k(x) = y + m` and `|y| <= 1/2`. The orbit is
    /// reduced at every step so that rounding stays at the scale of 1.
    fn iterate_reduced(&self, x: &T, k: u64) -> (T, i64) {
        let mut m = x.round_i64();
        let mut y = x.clone() - x.int(m);
        for _ in 0..k {
            y = self.eval(&y);
            let r = y.round_i64();
            if r != 0 {
                y = y - x.int(r);
                m += r;
            }
        }
        (y, m)
    }

    /// Jet of `F^k` at the base of `j`.
    fn iterate_jet(&self, j: &Jet<T>, k: u64) -> Jet<T> {
        self.iterate_jet_shifted(j, k, 0)
    }

    /// Jet of `F^k − p`, reduced like [`CircleLift::iterate_reduced`].
    fn iterate_jet_shifted(&self, j: &Jet<T>, k: u64, p: i64) -> Jet<T> {
        let mut m = j.v.round_i64();
        let mut y = j.shift(&(-j.v.int(m)));
        for _ in 0..k {
            y = self.jet(&y);
            let r = y.v.round_i64();
            if r != 0 {
                y = y.shift(&(-j.v.int(r)));
                m += r;
            }
        }
        y.shift(&j.v.int(m - p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "arnold2")]
    Arnold,
    #[serde(rename = "perturbed2")]
    Perturbed,
}

/// Lift `x + a − sin(4πx)/(4π) + Σ c_k (1 − cos 4πx)² sin(2πkx)/k²`.
#[derive(Clone, Debug)]
pub struct BiCriticalMap<T> {
    family: Family,
    a: T,
    coeffs: Vec<T>,
    shift: T,
    two_pi: T,
    four_pi: T,
}

/// Grid size used to certify `d_lift > 0` for perturbed maps.
const MONOTONE_GRID: usize = 1 << 14;

impl<T: Real> BiCriticalMap<T> {
    pub fn arnold_bicritical(a: T) -> Result<Self> {
        if a.is_negative() || a >= T::one() {
            return Err(Error::InvalidArgument(format!("parameter a = {a} outside [0, 1)")));
        }
        let bits = a.precision();
        let two_pi = T::pi_at(bits) * T::from_i64_at(2, bits);
        let four_pi = two_pi.clone() * T::from_i64_at(2, bits);
        Ok(BiCriticalMap {
            family: Family::Arnold,
            a,
            coeffs: Vec::new(),
            shift: T::zero(),
            two_pi,
            four_pi,
        })
    }

    /// Perturbed family; rejects coefficients for which the lift is not
    /// monotone on a `2^14`-point grid.
    pub fn perturbed_family(a: T, coeffs: Vec<T>) -> Result<Self> {
        let mut map = Self::arnold_bicritical(a)?;
        map.family = Family::Perturbed;
        map.coeffs = coeffs;
        if map.coeffs.is_empty() {
            return Ok(map);
        }
        let bits = map.precision();
        let n = MONOTONE_GRID as i64;
        for i in 1..MONOTONE_GRID as i64 {
            if 2 * i == n {
                continue;
            }
            let x = T::from_i64_at(i, bits) / T::from_i64_at(n, bits);
            let d = map.local_jet(&x)[1].clone();
            if !d.is_positive() {
                return Err(Error::NotMonotone { x: x.to_f64() });
            }
        }
        Ok(map)
    }

    /// Same map viewed through the rotation `x ↦ x + shift`.
    pub fn with_shift(mut self, shift: T) -> Self {
        self.shift = shift.fract01();
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn a(&self) -> &T {
        &self.a
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn shift(&self) -> &T {
        &self.shift
    }

    /// Criticalities at `c0`, `c1`.
    pub fn criticalities(&self) -> (f64, f64) {
        (3.0, 3.0)
    }

    /// Critical points in external coordinates.
    pub fn critical_points(&self) -> (CirclePoint<T>, CirclePoint<T>) {
        let half = T::one() / self.a.int(2);
        (
            CirclePoint::new(self.shift.clone()),
            CirclePoint::new(self.shift.clone() + half),
        )
    }

    /// Lift in external coordinates.
    pub fn lift_external(&self, x: &T) -> T {
        self.eval(&(x.clone() - self.shift.clone())) + self.shift.clone()
    }

    pub fn d_lift(&self, x: &T) -> T {
        let [_, d1, _, _] = self.local_jet(x);
        d1
    }

    /// Same family and coefficients at another parameter value.
    pub fn at_parameter(&self, a: T) -> Result<Self> {
        let mut m = Self::arnold_bicritical(a)?;
        m.family = self.family;
        m.coeffs = self.coeffs.clone();
        m.shift = self.shift.clone();
        Ok(m)
    }

    /// Perturbation term and its derivatives at `x`, given `sin`/`cos` of `4πx`.
    fn perturbation(&self, x: &T, s4: &T, c4: &T) -> [T; 4] {
        let mut out = [T::zero(), T::zero(), T::zero(), T::zero()];
        if self.coeffs.is_empty() {
            return out;
        }
        let fp = self.four_pi.clone();
        let fp2 = fp.clone() * fp.clone();
        let u = T::one() - c4.clone();
        let u1 = fp.clone() * s4.clone();
        let u2 = fp2.clone() * c4.clone();
        let u3 = -(fp2 * fp * s4.clone());
        let two = x.int(2);
        let w = u.clone() * u.clone();
        let w1 = two.clone() * u.clone() * u1.clone();
        let w2 = two.clone() * u1.clone() * u1.clone() + two.clone() * u.clone() * u2.clone();
        let w3 = x.int(6) * u1 * u2 + two * u * u3;
        for (idx, c) in self.coeffs.iter().enumerate() {
            let k = (idx + 1) as i64;
            let om = self.two_pi.clone() * x.int(k);
            let (sv, cv) = (om.clone() * x.clone()).sin_cos();
            let v = sv.clone();
            let v1 = om.clone() * cv.clone();
            let v2 = -(om.clone() * om.clone() * sv);
            let v3 = -(om.clone() * om.clone() * om * cv);
            let scale = c.clone() / x.int(k * k);
            let three = x.int(3);
            let t0 = w.clone() * v.clone();
            let t1 = w1.clone() * v.clone() + w.clone() * v1.clone();
            let t2 = w2.clone() * v.clone()
                + x.int(2) * w1.clone() * v1.clone()
                + w.clone() * v2.clone();
            let t3 = w3.clone() * v
                + three.clone() * w2.clone() * v1
                + three * w1.clone() * v2
                + w.clone() * v3;
            out[0] = out[0].clone() + scale.clone() * t0;
            out[1] = out[1].clone() + scale.clone() * t1;
            out[2] = out[2].clone() + scale.clone() * t2;
            out[3] = out[3].clone() + scale * t3;
        }
        out
    }
}

impl<T: Real> CircleLift<T> for BiCriticalMap<T> {
    fn eval(&self, x: &T) -> T {
        let arg = self.four_pi.clone() * x.clone();
        if self.coeffs.is_empty() {
            return x.clone() + self.a.clone() - arg.sin() / self.four_pi.clone();
        }
        let (s4, c4) = arg.sin_cos();
        let p = self.perturbation(x, &s4, &c4);
        let [p0, _, _, _] = p;
        x.clone() + self.a.clone() - s4 / self.four_pi.clone() + p0
    }

    fn local_jet(&self, x: &T) -> [T; 4] {
        let (s4, c4) = (self.four_pi.clone() * x.clone()).sin_cos();
        let fp = self.four_pi.clone();
        let f0 = x.clone() + self.a.clone() - s4.clone() / fp.clone();
        let f1 = T::one() - c4.clone();
        let f2 = fp.clone() * s4.clone();
        let f3 = fp.clone() * fp * c4.clone();
        if self.coeffs.is_empty() {
            return [f0, f1, f2, f3];
        }
        let [p0, p1, p2, p3] = self.perturbation(x, &s4, &c4);
        [f0 + p0, f1 + p1, f2 + p2, f3 + p3]
    }

    fn precision(&self) -> u32 {
        self.a.precision()
    }

    fn marked_points(&self) -> Vec<T> {
        vec![T::zero(), T::one() / self.a.int(2)]
    }

    fn frame_shift(&self) -> Option<T> {
        Some(self.shift.clone())
    }
}

/// Rigid rotation `x ↦ x + ρ` with one extra marked point. Test-only
/// stand-in for the bi-critical maps (it has no critical points).
#[derive(Clone, Debug)]
pub struct RigidRotation<T> {
    pub rho: T,
    pub marked: T,
}

impl<T: Real> RigidRotation<T> {
    pub fn new(rho: T) -> Self {
        let half = T::one() / rho.int(2);
        RigidRotation { rho, marked: half }
    }

    pub fn with_marked(rho: T, marked: T) -> Self {
        RigidRotation { rho, marked }
    }
}

impl<T: Real> CircleLift<T> for RigidRotation<T> {
    fn eval(&self, x: &T) -> T {
        x.clone() + self.rho.clone()
    }

    fn local_jet(&self, x: &T) -> [T; 4] {
        [self.eval(x), T::one(), T::zero(), T::zero()]
    }

    fn precision(&self) -> u32 {
        self.rho.precision()
    }

    fn marked_points(&self) -> Vec<T> {
        vec![T::zero(), self.marked.clone()]
    }

    fn critical_set(&self) -> Vec<T> {
        Vec::new()
    }
}

/// `x ↦ F(x + c) − c`: the same circle map with its base point moved to `c`.
#[derive(Clone, Debug)]
pub struct Recentered<T, F> {
    inner: F,
    offset: T,
}

impl<T: Real, F: CircleLift<T>> Recentered<T, F> {
    pub fn new(inner: F, offset: T) -> Self {
        Recentered { inner, offset }
    }

    pub fn offset(&self) -> &T {
        &self.offset
    }
}

impl<T: Real, F: CircleLift<T>> CircleLift<T> for Recentered<T, F> {
    fn eval(&self, x: &T) -> T {
        self.inner.eval(&(x.clone() + self.offset.clone())) - self.offset.clone()
    }

    fn local_jet(&self, x: &T) -> [T; 4] {
        let [f0, f1, f2, f3] = self.inner.local_jet(&(x.clone() + self.offset.clone()));
        [f0 - self.offset.clone(), f1, f2, f3]
    }

    fn precision(&self) -> u32 {
        self.inner.precision()
    }

    /// A marked point moved to the base comes first.
    fn marked_points(&self) -> Vec<T> {
        let mut out: Vec<T> = self
            .inner
            .marked_points()
            .into_iter()
            .map(|m| (m - self.offset.clone()).fract01())
            .collect();
        if let Some(k) = out.iter().position(|m| m.is_zero()) {
            out.rotate_left(k);
        }
        out
    }

    fn critical_set(&self) -> Vec<T> {
        self.inner
            .critical_set()
            .into_iter()
            .map(|m| (m - self.offset.clone()).fract01())
            .collect()
    }

    fn frame_shift(&self) -> Option<T> {
        let s = self.inner.frame_shift();
        Some(s.map_or_else(|| self.offset.clone(), |s| s + self.offset.clone()))
    }
}

macro_rules! forward_lift {
    ($($ty:ty),*) => {$(
        impl<T: Real, F: CircleLift<T> + ?Sized> CircleLift<T> for $ty {
            fn eval(&self, x: &T) -> T {
                (**self).eval(x)
            }
            fn local_jet(&self, x: &T) -> [T; 4] {
                (**self).local_jet(x)
            }
            fn precision(&self) -> u32 {
                (**self).precision()
            }
            fn marked_points(&self) -> Vec<T> {
                (**self).marked_points()
            }
            fn critical_set(&self) -> Vec<T> {
                (**self).critical_set()
            }
            fn frame_shift(&self) -> Option<T> {
                (**self).frame_shift()
            }
        }
    )*};
}

forward_lift!(&F, std::sync::Arc<F>, Box<F>);

/// Value of an iterate on the circle together with its derivatives.
#[derive(Clone, Debug)]
pub struct IterateJet<T> {
    pub value: CirclePoint<T>,
    pub d1: T,
    pub d2: T,
    pub d3: T,
}

impl<T: Real> IterateJet<T> {
    pub fn from_jet(j: Jet<T>) -> Self {
        IterateJet {
            value: CirclePoint::new(j.v),
            d1: j.d1,
            d2: j.d2,
            d3: j.d3,
        }
    }
}

/// `f^k` at `x` with its first three derivatives.
pub fn iterate_with_jet<T: Real, F: CircleLift<T> + ?Sized>(
    f: &F,
    x: &CirclePoint<T>,
    k: u64,
) -> Result<IterateJet<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("iterate count must be >= 1".into()));
    }
    let j = f.iterate_jet(&Jet::variable(x.rep().clone()), k);
    Ok(IterateJet::from_jet(j))
}

/// `D³/D − (3/2)(D²/D)²` from raw derivatives.
pub fn schwarzian_from<T: Real>(d1: &T, d2: &T, d3: &T) -> Result<T> {
    if d1.is_zero() {
        return Err(Error::CriticalPoint);
    }
    let r = d2.clone() / d1.clone();
    let three_halves = d1.cst(1.5);
    Ok(d3.clone() / d1.clone() - three_halves * r.clone() * r)
}

pub fn schwarzian<T: Real>(jet: &IterateJet<T>) -> Result<T> {
    schwarzian_from(&jet.d1, &jet.d2, &jet.d3)
}

/// Local degree at `c`, from a least-squares fit of `log|F(c±h) − F(c)|`
/// against `log h` over `h = 2^-6 … 2^-16` on both sides.
pub fn criticality_slope<T: Real, F: CircleLift<T> + ?Sized>(f: &F, c: &T) -> f64 {
    let fc = f.eval(c);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for e in 6..=16 {
        let h = c.pow2(-e);
        for side in [h.clone(), -h] {
            let d = (f.eval(&(c.clone() + side.clone())) - fc.clone()).abs();
            if d.is_positive() {
                xs.push(side.abs().ln().to_f64());
                ys.push(d.ln().to_f64());
            }
        }
    }
    least_squares_slope(&xs, &ys)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Chebyshev points of the first kind mapped to the open interval `(lo, hi)`.
pub fn chebyshev_points<T: Real>(lo: &T, hi: &T, count: usize) -> Vec<T> {
    let bits = lo.precision().min(hi.precision());
    let pi = T::pi_at(bits);
    let half = T::one() / T::from_i64_at(2, bits);
    let mid = (lo.clone() + hi.clone()) * half.clone();
    let rad = (hi.clone() - lo.clone()) * half;
    (0..count)
        .map(|k| {
            let theta = pi.clone() * T::from_i64_at(2 * k as i64 + 1, bits)
                / T::from_i64_at(2 * count as i64, bits);
            mid.clone() - rad.clone() * theta.cos()
        })
        .collect()
}

/// JSON description of a map: `{"family": "arnold2", "a": 0.3, "coeffs": []}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub family: Family,
    /// Decimal string or JSON number.
    pub a: serde_json::Value,
    #[serde(default)]
    pub coeffs: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<serde_json::Value>,
}

fn parse_value<T: Real>(v: &serde_json::Value, bits: u32, what: &str) -> Result<T> {
    let s = match v {
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::String(s) => s.clone(),
        other => return Err(Error::Config(format!("{what}: expected a number, got {other}"))),
    };
    T::parse_at(&s, bits).ok_or_else(|| Error::Config(format!("{what}: cannot parse {s:?}")))
}

impl MapSpec {
    pub fn arnold(a: &str) -> Self {
        MapSpec {
            family: Family::Arnold,
            a: serde_json::Value::String(a.to_string()),
            coeffs: Vec::new(),
            shift: None,
        }
    }

    pub fn perturbed(a: &str, coeffs: &[f64]) -> Self {
        MapSpec {
            family: Family::Perturbed,
            a: serde_json::Value::String(a.to_string()),
            coeffs: coeffs.iter().map(|c| serde_json::json!(c)).collect(),
            shift: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn parameter<T: Real>(&self, bits: u32) -> Result<T> {
        parse_value(&self.a, bits, "a")
    }

    /// Build the map at `bits` of precision.
    pub fn build<T: Real>(&self, bits: u32) -> Result<BiCriticalMap<T>> {
        let a = self.parameter::<T>(bits)?;
        self.build_at(a)
    }

    /// Build with the parameter replaced by `a`.
    pub fn build_at<T: Real>(&self, a: T) -> Result<BiCriticalMap<T>> {
        let bits = a.precision();
        let mut map = match self.family {
            Family::Arnold => {
                if !self.coeffs.is_empty() {
                    return Err(Error::Config("arnold2 takes no coeffs".into()));
                }
                BiCriticalMap::arnold_bicritical(a)?
            }
            Family::Perturbed => {
                let coeffs = self
                    .coeffs
                    .iter()
                    .map(|c| parse_value(c, bits, "coeffs"))
                    .collect::<Result<Vec<T>>>()?;
                BiCriticalMap::perturbed_family(a, coeffs)?
            }
        };
        if let Some(s) = &self.shift {
            map = map.with_shift(parse_value(s, bits, "shift")?);
        }
        Ok(map)
    }

    pub fn with_parameter(&self, a: &str) -> Self {
        let mut s = self.clone();
        s.a = serde_json::Value::String(a.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::AdaptiveReal;
    use num_traits::Zero;

    fn ar(x: f64) -> AdaptiveReal {
        AdaptiveReal::new(256, x)
    }

    #[test]
    fn arnold_examples() {
        let f = BiCriticalMap::arnold_bicritical(0.0f64).unwrap();
        assert_eq!(f.d_lift(&0.0), 0.0);
        assert!((f.d_lift(&0.25) - 2.0).abs() < 1e-15);
        assert!((f.d_lift(&0.5)).abs() < 1e-15);
        let g = BiCriticalMap::arnold_bicritical(ar(0.3)).unwrap();
        for x in [0.0, 0.13, 0.77] {
            let x = ar(x);
            let d = g.eval(&(x.clone() + AdaptiveReal::exact(1))) - g.eval(&x) - AdaptiveReal::exact(1);
            assert!(d.abs() < tol(250));
        }
        assert!(BiCriticalMap::arnold_bicritical(1.0f64).is_err());
    }

    fn tol(e: i32) -> AdaptiveReal {
        AdaptiveReal::exp2_at(-e, 256)
    }

    #[test]
    fn perturbed_examples() {
        let a = ar(0.3);
        let f = BiCriticalMap::arnold_bicritical(a.clone()).unwrap();
        let g = BiCriticalMap::perturbed_family(a.clone(), vec![]).unwrap();
        let x = ar(0.123);
        assert_eq!(f.eval(&x), g.eval(&x));
        let p = BiCriticalMap::perturbed_family(a.clone(), vec![ar(0.01)]).unwrap();
        assert!(p.d_lift(&ar(0.0)).is_zero());
        assert!(p.d_lift(&ar(0.5)).abs() < tol(250));
        let half = ar(0.5);
        assert!(p.local_jet(&half)[2].abs() < tol(240));
        assert!(matches!(
            BiCriticalMap::perturbed_family(a, vec![ar(0.5)]),
            Err(Error::NotMonotone { .. })
        ));
    }

    #[test]
    fn local_jet_matches_finite_differences() {
        let f = BiCriticalMap::perturbed_family(0.3f64, vec![0.01, -0.004]).unwrap();
        for &x in &[0.1, 0.37, 0.61, 0.9] {
            let h = 1e-5;
            let [_, d1, d2, d3] = f.local_jet(&x);
            let fd1 = (f.eval(&(x + h)) - f.eval(&(x - h))) / (2.0 * h);
            let g = |y: f64| f.local_jet(&y)[1];
            let fd2 = (g(x + h) - g(x - h)) / (2.0 * h);
            let k = |y: f64| f.local_jet(&y)[2];
            let fd3 = (k(x + h) - k(x - h)) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8);
            assert!((d2 - fd2).abs() < 1e-7 * (1.0 + d2.abs()));
            assert!((d3 - fd3).abs() < 1e-6 * (1.0 + d3.abs()));
        }
    }

    #[test]
    fn rigid_rotation_jet() {
        let r = RigidRotation::new(ar(0.3));
        let j = iterate_with_jet(&r, &CirclePoint::new(ar(0.7)), 10).unwrap();
        assert_eq!(j.d1, AdaptiveReal::exact(1));
        assert!(j.d2.is_zero() && j.d3.is_zero());
    }

    #[test]
    fn critical_start_has_zero_derivative() {
        let f = BiCriticalMap::arnold_bicritical(ar(0.3)).unwrap();
        let j = iterate_with_jet(&f, &CirclePoint::new(ar(0.0)), 1).unwrap();
        assert!(j.d1.is_zero());
        assert!(matches!(schwarzian(&j), Err(Error::CriticalPoint)));
    }

    #[test]
    fn schwarzian_examples() {
        let affine = IterateJet { value: CirclePoint::new(0.1), d1: 3.0, d2: 0.0, d3: 0.0 };
        assert_eq!(schwarzian(&affine).unwrap(), 0.0);
        let tan = IterateJet { value: CirclePoint::new(0.0), d1: 1.0, d2: 0.0, d3: 2.0 };
        assert_eq!(schwarzian(&tan).unwrap(), 2.0);
    }

    #[test]
    fn criticality_is_cubic() {
        let f = BiCriticalMap::arnold_bicritical(ar(0.3)).unwrap();
        assert!((criticality_slope(&f, &ar(0.0)) - 3.0).abs() < 0.01);
        assert!((criticality_slope(&f, &ar(0.5)) - 3.0).abs() < 0.01);
    }

    #[test]
    fn map_spec_round_trip() {
        let spec = MapSpec::from_json(r#"{"family":"perturbed2","a":0.3,"coeffs":[0.01]}"#).unwrap();
        assert_eq!(spec.family, Family::Perturbed);
        let f: BiCriticalMap<AdaptiveReal> = spec.build(256).unwrap();
        assert_eq!(f.coeffs().len(), 1);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(MapSpec::from_json(&text).unwrap(), spec);
        assert!(MapSpec::from_json(r#"{"family":"cubic","a":0.3}"#).is_err());
    }

    #[test]
    fn shifted_map_is_conjugate() {
        let f = BiCriticalMap::arnold_bicritical(ar(0.3)).unwrap();
        let g = f.clone().with_shift(ar(0.5));
        for x in [0.1, 0.45, 0.8] {
            let x = ar(x);
            let lhs = g.lift_external(&(x.clone() + ar(0.5)));
            let rhs = f.eval(&x) + ar(0.5);
            assert!((lhs - rhs).abs() < tol(240));
        }
    }

    #[test]
    fn recentring_puts_the_new_base_first() {
        let f = BiCriticalMap::arnold_bicritical(ar(0.3)).unwrap();
        let m = Recentered::new(f.clone(), ar(0.5)).marked_points();
        assert!(m[0].is_zero());
        assert_eq!(m[1], ar(0.5));
        let m = Recentered::new(f, ar(0.25)).marked_points();
        assert_eq!((m[0].clone(), m[1].clone()), (ar(0.75), ar(0.25)));
    }
}
