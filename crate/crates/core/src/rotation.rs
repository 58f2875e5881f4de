//! Continued fractions, closest returns and parameter tuning.
//!
//! Conventions: `ρ = [a_0, a_1, …] = 1/(a_0 + 1/(a_1 + …))`, with
//! `q_0 = 1`, `q_1 = a_0`, `p_0 = 0`, `p_1 = 1` and
//! `q_{n+1} = a_n q_n + q_{n-1}`. The signed return `e_n = F^{q_n}(0) − p_n`
//! has sign `(−1)^n` and `|e_n| = |I_n(c_0)|`.

use std::cmp::Ordering;

use num_integer::Integer;
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::CircleLift;
use crate::numerics::{required_bits, Real};

/// Default cap on map evaluations per computation.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub quotients: Vec<u64>,
}

impl ContinuedFraction {
    pub fn new(quotients: Vec<u64>) -> Result<Self> {
        if let Some(i) = quotients.iter().position(|&a| a == 0) {
            return Err(Error::InvalidArgument(format!("partial quotient a_{i} = 0")));
        }
        Ok(ContinuedFraction { quotients })
    }

    /// Parse `"1,1,1,30"`.
    pub fn parse(s: &str) -> Result<Self> {
        let q = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Config(format!("bad partial quotient {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(q)
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    pub fn prefix(&self, n: usize) -> ContinuedFraction {
        ContinuedFraction {
            quotients: self.quotients[..n.min(self.len())].to_vec(),
        }
    }

    /// Append `tail` quotients equal to 1.
    pub fn extended(&self, tail: usize) -> ContinuedFraction {
        let mut q = self.quotients.clone();
        q.extend(std::iter::repeat(1).take(tail));
        ContinuedFraction { quotients: q }
    }

    /// Value of the finite expansion.
    pub fn value<T: Real>(&self, bits: u32) -> T {
        let mut x = T::from_i64_at(0, bits);
        for &a in self.quotients.iter().rev() {
            x = T::one() / (T::from_i64_at(a as i64, bits) + x);
        }
        x
    }
}

/// Convergents `(p_k, q_k)` for `k = 0..=len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergentTable<I> {
    pub entries: Vec<(I, I)>,
}

impl<I: Clone> ConvergentTable<I> {
    pub fn p(&self, k: usize) -> I {
        self.entries[k].0.clone()
    }

    pub fn q(&self, k: usize) -> I {
        self.entries[k].1.clone()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Convergents in any integer type.
pub fn convergents_in<I: Integer + Clone + FromPrimitive>(cf: &ContinuedFraction) -> ConvergentTable<I> {
    let mut entries = vec![(I::zero(), I::one())];
    let (mut p_prev, mut q_prev) = (I::one(), I::zero());
    for &a in &cf.quotients {
        let a = I::from_u64(a).expect("partial quotient fits the integer type");
        let (p, q) = entries.last().cloned().unwrap();
        let next = (a.clone() * p.clone() + p_prev, a * q.clone() + q_prev);
        p_prev = p;
        q_prev = q;
        entries.push(next);
    }
    ConvergentTable { entries }
}

pub fn convergents(cf: &ContinuedFraction) -> ConvergentTable<i128> {
    convergents_in(cf)
}

/// First `depth` partial quotients of `rho` by the Gauss map.
///
/// The rounding error is tracked through `x ↦ 1/x − a`; the expansion is
/// declared terminated when the remainder falls below `2^{-P/2}`, and a
/// precision error is raised once fewer than 16 significant bits remain.
pub fn cf_expansion<T: Real>(rho: &T, depth: usize) -> Result<ContinuedFraction> {
    if !rho.is_positive() || *rho >= T::one() {
        return Err(Error::InvalidArgument(format!("rho = {rho} outside (0, 1)")));
    }
    let bits = rho.precision();
    let ulp = rho.pow2(1 - bits as i32);
    let vanish = rho.pow2(-(bits as i32) / 2);
    let lossy = rho.pow2(-16);
    let mut x = rho.clone();
    let mut err = ulp.clone() * x.clone();
    let mut out = Vec::with_capacity(depth);
    for step in 0..depth {
        let inv = T::one() / x.clone();
        let a = inv.floor();
        let next_err = err.clone() / (x.clone() * x.clone()) + ulp.clone();
        let ai = a.floor_i64();
        if ai < 1 {
            return Err(Error::Internal(format!("Gauss map produced a_{step} = {ai}")));
        }
        out.push(ai as u64);
        x = inv - a;
        err = next_err;
        if step + 1 == depth {
            break;
        }
        if x < vanish {
            return Err(Error::Terminated { step });
        }
        if err.clone() > lossy.clone() * x.clone() {
            return Err(Error::PrecisionLoss(format!(
                "fewer than 16 significant bits after {} quotients",
                step + 1
            )));
        }
    }
    Ok(ContinuedFraction { quotients: out })
}

/// Closest-return data of a lift at its base point 0.
#[derive(Clone, Debug)]
pub struct Combinatorics<T> {
    pub cf: ContinuedFraction,
    /// `q_0 ..= q_len`.
    pub q: Vec<u64>,
    pub p: Vec<u64>,
    /// Signed returns `e_0 ..= e_len`.
    pub e: Vec<T>,
    /// True when the evaluation budget stopped the scan early.
    pub exhausted: bool,
    /// Map evaluations spent.
    pub evaluations: u64,
}

impl<T: Real> Combinatorics<T> {
    pub fn depth(&self) -> usize {
        self.cf.len()
    }

    /// `a_n`.
    pub fn a(&self, n: usize) -> u64 {
        self.cf.quotients[n]
    }

    /// Largest level `n` with `e_n` known.
    pub fn max_level(&self) -> usize {
        self.e.len() - 1
    }

    /// `e_n` for `n ≥ −1` (`e_{-1} = −1`).
    pub fn e_at(&self, n: isize) -> T {
        if n < 0 {
            -T::one()
        } else {
            self.e[n as usize].clone()
        }
    }

    /// `|I_n(c_0)|`.
    pub fn length(&self, n: usize) -> T {
        self.e[n].abs()
    }

    /// Scaling ratio `s_n = |I_{n+1}| / |I_n|`.
    pub fn scaling_ratio(&self, n: usize) -> T {
        self.length(n + 1) / self.length(n)
    }

    pub fn convergents(&self) -> ConvergentTable<i128> {
        convergents(&self.cf)
    }

    pub fn require_level(&self, n: usize) -> Result<()> {
        if n > self.max_level() {
            return Err(Error::Combinatorics(format!(
                "level {n} requested but combinatorics known only to level {}",
                self.max_level()
            )));
        }
        Ok(())
    }
}

/// A map together with its closest-return data and the orbit of its base
/// point, shared by the partition and renormalization code.
#[derive(Clone, Debug)]
pub struct CriticalOrbit<T, F> {
    pub map: std::sync::Arc<F>,
    pub comb: Combinatorics<T>,
    /// `F^i(0) = orbit[i] + turns[i]` with `|orbit[i]| <= 1/2`, for
    /// `0 <= i < q_L + q_{L-1}`, `L` the deepest level.
    orbit: Vec<T>,
    turns: Vec<i64>,
}

impl<T: Real, F: CircleLift<T>> CriticalOrbit<T, F> {
    /// Scan `depth` levels of `map` and store the orbit of 0.
    pub fn new(map: F, depth: usize, budget: u64) -> Result<Self> {
        let comb = partial_quotients_by_returns(&map, depth, budget)?;
        Self::from_parts(std::sync::Arc::new(map), comb, budget)
    }

    pub fn from_parts(map: std::sync::Arc<F>, comb: Combinatorics<T>, budget: u64) -> Result<Self> {
        let l = comb.max_level();
        let len = comb.q[l] + if l > 0 { comb.q[l - 1] } else { 0 };
        if len > budget {
            return Err(Error::Budget {
                what: "orbit of the base point".into(),
                required: len,
                budget,
            });
        }
        let mut orbit = Vec::with_capacity(len as usize);
        let mut turns = Vec::with_capacity(len as usize);
        let (mut x, mut m) = (T::from_i64_at(0, map.precision()), 0i64);
        for _ in 0..len {
            let (next, r) = map.iterate_reduced(&x, 1);
            orbit.push(x);
            turns.push(m);
            x = next;
            m += r;
        }
        Ok(CriticalOrbit { map, comb, orbit, turns })
    }

    /// Lift `F^i(0)`.
    pub fn lift(&self, i: u64) -> T {
        self.displacement(i, 0)
    }

    /// `F^i(0) − shift`, exact in the integer part.
    pub fn displacement(&self, i: u64, shift: i64) -> T {
        let x = &self.orbit[i as usize];
        x.clone() + x.int(self.turns[i as usize] - shift)
    }

    pub fn orbit_len(&self) -> u64 {
        self.orbit.len() as u64
    }

    /// `f^i(0)` as a representative in `[0, 1)`.
    pub fn point(&self, i: u64) -> T {
        self.orbit[i as usize].fract01()
    }

    pub fn q(&self, n: usize) -> u64 {
        self.comb.q[n]
    }

    pub fn p(&self, n: usize) -> u64 {
        self.comb.p[n]
    }

    pub fn e(&self, n: usize) -> &T {
        &self.comb.e[n]
    }

    pub fn a(&self, n: usize) -> u64 {
        self.comb.cf.quotients[n]
    }

    /// Deepest level whose partition can be built and ordered exactly.
    pub fn max_partition_level(&self) -> usize {
        self.comb.max_level().saturating_sub(2)
    }

    pub fn precision(&self) -> u32 {
        self.map.precision()
    }
}

/// Outcome of scanning one renormalization level.
enum Scan<T> {
    /// `a_n` and the last pre-crossing point `e_{n+1}`.
    Crossed(u64, T),
    /// The count exceeded `cap` without crossing.
    Capped,
    /// Successive points stopped moving: a periodic orbit.
    Stalled,
    /// Budget ran out mid-scan.
    Exhausted,
}

fn scan_level<T: Real, F: CircleLift<T> + ?Sized>(
    f: &F,
    start: &T,
    q: u64,
    p: u64,
    cap: u64,
    spent: &mut u64,
    budget: u64,
) -> Scan<T> {
    let side = start.is_negative();
    let stall = start.pow2(-(start.precision() as i32) / 2);
    let mut y = start.clone();
    let mut count = 0u64;
    loop {
        if *spent + q > budget {
            return Scan::Exhausted;
        }
        *spent += q;
        let next = f.iterate_shifted(&y, q, p as i64);
        let crossed = if side { !next.is_negative() } else { !next.is_positive() };
        if crossed {
            return Scan::Crossed(count, y);
        }
        if (next.clone() - y.clone()).abs() < stall {
            return Scan::Stalled;
        }
        count += 1;
        y = next;
        if count > cap {
            return Scan::Capped;
        }
    }
}

/// Partial quotients of the rotation number read off the closest returns of
/// the orbit of 0.
///
/// At level `n` the point `e_{n−1}` is pushed by `y ↦ F^{q_n}(y) − p_n`
/// until it crosses 0; the number of steps before the crossing is `a_n`.
/// This is the period of the level-`n` commuting pair written in
/// unrescaled coordinates.
pub fn partial_quotients_by_returns<T: Real, F: CircleLift<T> + ?Sized>(
    f: &F,
    depth: usize,
    budget: u64,
) -> Result<Combinatorics<T>> {
    let bits = f.precision();
    let zero = T::from_i64_at(0, bits);
    let mut q = vec![1u64];
    let mut p = vec![0u64];
    let mut e = vec![f.eval(&zero)];
    let (mut q_prev, mut p_prev, mut e_prev) = (0u64, 1u64, -T::from_i64_at(1, bits));
    let mut cf = Vec::new();
    let mut spent = 1u64;
    let mut exhausted = false;
    for n in 0..depth {
        let (qn, pn) = (q[n], p[n]);
        match scan_level(f, &e_prev, qn, pn, u64::MAX - 1, &mut spent, budget) {
            Scan::Crossed(0, _) => {
                return Err(Error::Combinatorics(format!("no return at level {n}")));
            }
            Scan::Crossed(a, next) => {
                cf.push(a);
                let q_next = a
                    .checked_mul(qn)
                    .and_then(|v| v.checked_add(q_prev))
                    .ok_or_else(|| Error::Internal("q overflow".into()))?;
                let p_next = a * pn + p_prev;
                q_prev = qn;
                p_prev = pn;
                e_prev = e[n].clone();
                q.push(q_next);
                p.push(p_next);
                e.push(next);
            }
            Scan::Stalled | Scan::Capped => return Err(Error::RationalRotation { level: n }),
            Scan::Exhausted => {
                exhausted = true;
                break;
            }
        }
    }
    Ok(Combinatorics {
        cf: ContinuedFraction { quotients: cf },
        q,
        p,
        e,
        exhausted,
        evaluations: spent,
    })
}

/// Poincaré estimate `F^k(0)/k` with its error bound `1/k`.
pub fn rotation_number_by_lift<T: Real, F: CircleLift<T> + ?Sized>(f: &F, iterates: u64) -> Result<(T, T)> {
    if iterates == 0 {
        return Err(Error::InvalidArgument("iterates must be >= 1".into()));
    }
    let bits = f.precision();
    let x0 = T::from_i64_at(0, bits);
    let k = T::from_i64_at(iterates as i64, bits);
    let y = f.iterate(&x0, iterates);
    Ok((y / k.clone(), T::one() / k))
}

/// Order of `ρ(F)` relative to the rotation numbers with prefix `target`.
/// `Equal` means the measured expansion starts with `target`.
fn compare_to_target<T: Real, F: CircleLift<T> + ?Sized>(
    f: &F,
    target: &ContinuedFraction,
    budget: u64,
) -> Result<(Ordering, usize)> {
    let bits = f.precision();
    let zero = T::from_i64_at(0, bits);
    let (mut q, mut p, mut e) = (1u64, 0u64, f.eval(&zero));
    let (mut q_prev, mut p_prev, mut e_prev) = (0u64, 1u64, -T::from_i64_at(1, bits));
    let mut spent = 1u64;
    for (n, &want) in target.quotients.iter().enumerate() {
        // A larger digit at an even index means a smaller rotation number.
        let bigger = if n % 2 == 0 { Ordering::Less } else { Ordering::Greater };
        match scan_level(f, &e_prev, q, p, want, &mut spent, budget) {
            Scan::Crossed(a, next) if a == want => {
                let (qn, pn) = (a * q + q_prev, a * p + p_prev);
                q_prev = q;
                p_prev = p;
                e_prev = e;
                q = qn;
                p = pn;
                e = next;
            }
            Scan::Crossed(a, _) if a < want => return Ok((bigger.reverse(), n)),
            Scan::Crossed(..) | Scan::Capped | Scan::Stalled => return Ok((bigger, n)),
            Scan::Exhausted => {
                return Err(Error::Budget {
                    what: format!("tuning scan at level {n}"),
                    required: spent + q,
                    budget,
                })
            }
        }
    }
    Ok((Ordering::Equal, target.len()))
}

#[derive(Clone, Debug)]
pub struct TuneOptions {
    /// Working precision in bits.
    pub bits: u32,
    /// Extra quotients equal to 1 appended to the target so that deeper
    /// levels of the tuned map are well defined.
    pub tail: usize,
    pub budget: u64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            bits: 512,
            tail: 6,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tuned<T> {
    pub a: T,
    pub verified_depth: usize,
    /// Closest-return data of the tuned map to depth `depth + tail`.
    pub combinatorics: Combinatorics<T>,
}

/// Bisection on the parameter of a monotone family until the measured
/// expansion starts with `target[..depth]` followed by `tail` ones.
///
/// Each probe compares the combinatorial order of closest returns against
/// the target, so plateaus of rational rotation number are stepped over
/// rather than bisected into.
pub fn tune_parameter<T, M, G>(
    family: G,
    target: &ContinuedFraction,
    depth: usize,
    tol: &T,
    opts: &TuneOptions,
) -> Result<Tuned<T>>
where
    T: Real,
    M: CircleLift<T>,
    G: Fn(T) -> Result<M>,
{
    if depth == 0 || depth > target.len() {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} must lie in 1..={}",
            target.len()
        )));
    }
    let goal = target.prefix(depth).extended(opts.tail);
    let required = required_bits(&goal.quotients);
    if opts.bits < required {
        return Err(Error::PrecisionBudget {
            level: goal.len(),
            required,
            available: opts.bits,
        });
    }
    let bits = opts.bits;
    let mut lo = T::from_i64_at(0, bits);
    let mut hi = T::one() - T::exp2_at(-(bits as i32) + 2, bits);
    let (c_lo, _) = compare_to_target(&family(lo.clone())?, &goal, opts.budget)?;
    let (c_hi, _) = compare_to_target(&family(hi.clone())?, &goal, opts.budget)?;
    if c_lo != Ordering::Less || c_hi != Ordering::Greater {
        return Err(Error::NonMonotone(format!(
            "bracket [0, 1) does not straddle the target (ends compare {c_lo:?}, {c_hi:?})"
        )));
    }
    let half = T::one() / T::from_i64_at(2, bits);
    let mut deepest = 0usize;
    while hi.clone() - lo.clone() > tol.clone() {
        let mid = (lo.clone() + hi.clone()) * half.clone();
        let (ord, level) = compare_to_target(&family(mid.clone())?, &goal, opts.budget)?;
        deepest = deepest.max(level);
        match ord {
            Ordering::Less => lo = mid,
            Ordering::Greater => hi = mid,
            Ordering::Equal => {
                let map = family(mid.clone())?;
                let comb = partial_quotients_by_returns(&map, goal.len(), opts.budget)?;
                let verified = comb
                    .cf
                    .quotients
                    .iter()
                    .zip(&goal.quotients)
                    .take_while(|(a, b)| a == b)
                    .count()
                    .min(depth);
                if verified < depth {
                    return Err(Error::Combinatorics(format!(
                        "tuned parameter verifies only {verified} of {depth} quotients"
                    )));
                }
                return Ok(Tuned {
                    a: mid,
                    verified_depth: verified,
                    combinatorics: comb,
                });
            }
        }
    }
    Err(Error::PrecisionLoss(format!(
        "parameter bracket fell below tolerance while matching level {deepest} of {}",
        goal.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{BiCriticalMap, RigidRotation};
    use crate::numerics::AdaptiveReal;

    fn ar(x: f64) -> AdaptiveReal {
        AdaptiveReal::new(512, x)
    }

    #[test]
    fn convergent_examples() {
        let t = convergents(&ContinuedFraction::new(vec![2]).unwrap());
        assert_eq!((t.q(0), t.q(1)), (1, 2));
        let t = convergents(&ContinuedFraction::new(vec![30, 30, 30]).unwrap());
        let q: Vec<i128> = (0..t.len()).map(|k| t.q(k)).collect();
        assert_eq!(q, vec![1, 30, 901, 27060]);
        let t = convergents(&ContinuedFraction::new(vec![1; 8]).unwrap());
        let q: Vec<i128> = (0..t.len()).map(|k| t.q(k)).collect();
        assert_eq!(q, vec![1, 1, 2, 3, 5, 8, 13, 21, 34]);
    }

    #[test]
    fn zero_quotient_rejected() {
        assert!(ContinuedFraction::new(vec![1, 0]).is_err());
        assert!(ContinuedFraction::parse("1, 2,x").is_err());
        assert_eq!(ContinuedFraction::parse("1,1,1,30").unwrap().quotients, vec![1, 1, 1, 30]);
    }

    #[test]
    fn gauss_map_examples() {
        let five = AdaptiveReal::from_i64_at(5, 512);
        let golden = (five.sqrt() - AdaptiveReal::exact(1)) / AdaptiveReal::exact(2);
        assert_eq!(cf_expansion(&golden, 20).unwrap().quotients, vec![1; 20]);
        let two = AdaptiveReal::from_i64_at(2, 512);
        let r2 = two.sqrt() - AdaptiveReal::exact(1);
        assert_eq!(cf_expansion(&r2, 10).unwrap().quotients, vec![2; 10]);
        let r = AdaptiveReal::from_i64_at(13, 512) / AdaptiveReal::from_i64_at(40, 512);
        assert!(matches!(cf_expansion(&r, 10), Err(Error::Terminated { step: 2 })));
    }

    #[test]
    fn gauss_map_reports_precision_loss() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!(matches!(cf_expansion(&golden, 60), Err(Error::PrecisionLoss(_))));
    }

    #[test]
    fn rigid_rotation_returns() {
        let golden = ContinuedFraction::new(vec![1; 40]).unwrap().value::<AdaptiveReal>(512);
        let r = RigidRotation::new(golden);
        let comb = partial_quotients_by_returns(&r, 15, DEFAULT_BUDGET).unwrap();
        assert_eq!(comb.cf.quotients, vec![1; 15]);
        assert_eq!(comb.q[12], 233);
        let (rho, err) = rotation_number_by_lift(&RigidRotation::new(0.25f64), 1000).unwrap();
        assert_eq!(rho, 0.25);
        assert_eq!(err, 1e-3);
    }

    #[test]
    fn fixed_point_is_rational() {
        let f = BiCriticalMap::arnold_bicritical(ar(0.0)).unwrap();
        let (rho, _) = rotation_number_by_lift(&f, 100).unwrap();
        assert!(rho.abs() < ar(1e-100));
        assert!(matches!(
            partial_quotients_by_returns(&f, 3, 1000),
            Err(Error::RationalRotation { level: 0 })
        ));
    }

    #[test]
    fn budget_gives_partial_result() {
        let f = BiCriticalMap::arnold_bicritical(ar(0.35)).unwrap();
        let comb = partial_quotients_by_returns(&f, 30, 50).unwrap();
        assert!(comb.exhausted);
        assert!(comb.depth() < 30);
    }

    #[test]
    fn tune_short_target() {
        let target = ContinuedFraction::new(vec![2]).unwrap();
        let opts = TuneOptions { bits: 256, tail: 4, budget: DEFAULT_BUDGET };
        let tol = AdaptiveReal::exp2_at(-120, 256);
        let tuned = tune_parameter(BiCriticalMap::arnold_bicritical, &target, 1, &tol, &opts).unwrap();
        assert_eq!(tuned.combinatorics.cf.quotients[0], 2);
        assert_eq!(tuned.verified_depth, 1);
    }

    #[test]
    fn tune_rejects_low_precision() {
        let target = ContinuedFraction::new(vec![1; 30]).unwrap();
        let opts = TuneOptions { bits: 256, tail: 6, budget: DEFAULT_BUDGET };
        let tol = AdaptiveReal::exp2_at(-120, 256);
        assert!(matches!(
            tune_parameter(BiCriticalMap::arnold_bicritical, &target, 30, &tol, &opts),
            Err(Error::PrecisionBudget { .. })
        ));
    }
}
