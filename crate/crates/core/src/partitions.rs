//! Classical dynamical partitions, the two-bridges partitions and their
//! audits.
//!
//! Endpoints carry their orbit provenance. Ordering, adjacency and nesting
//! are decided from provenance, with the cached numeric values used only
//! to interleave the orbits of the two marked points and as a cross-check.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::maps::{chebyshev_points, CircleLift, Recentered};
use crate::numerics::{compensated_sum, solve_increasing, Arc, CirclePoint, Real};
use crate::rotation::CriticalOrbit;

/// Which marked point an endpoint is an iterate of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    C0,
    C1,
}

/// `f^iterate(base)`; negative iterates are pullbacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub base: Base,
    pub iterate: i64,
}

impl Provenance {
    pub fn c0(i: u64) -> Self {
        Provenance { base: Base::C0, iterate: i as i64 }
    }

    pub fn c1(i: i64) -> Self {
        Provenance { base: Base::C1, iterate: i }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = match self.base {
            Base::C0 => "c0",
            Base::C1 => "c1",
        };
        write!(f, "f^{}({b})", self.iterate)
    }
}

#[derive(Clone, Debug)]
pub struct Endpoint<T> {
    pub prov: Provenance,
    /// Representative in `[0, 1)`.
    pub value: T,
}

/// Which classical family an atom belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomLabel {
    /// `f^i(I_n)`, `0 <= i < q_{n+1}`.
    Long { iterate: u64 },
    /// `f^j(I_{n+1})`, `0 <= j < q_n`.
    Short { iterate: u64 },
    /// Atom of a two-bridges partition.
    Piece,
}

/// Borrowed view of one atom.
#[derive(Clone, Debug)]
pub struct Atom<'a, T> {
    pub start: &'a Endpoint<T>,
    pub end: &'a Endpoint<T>,
    pub length: &'a T,
    pub label: AtomLabel,
}

/// A finite partition of the circle into arcs with provenance-tagged
/// endpoints, listed counterclockwise from the base point.
#[derive(Clone, Debug)]
pub struct Partition<T> {
    pub level: usize,
    pub base: T,
    endpoints: Vec<Endpoint<T>>,
    lengths: Vec<T>,
    labels: Vec<AtomLabel>,
    index: HashMap<Provenance, usize>,
}

/// Classical partition `P_n`.
pub type DynamicalPartition<T> = Partition<T>;

impl<T: Real> Partition<T> {
    /// Sort `endpoints` counterclockwise from `base` and cut the circle.
    ///
    /// Fails with `PrecisionLoss` when two endpoints are closer than
    /// `2^{16-P}`, since their order is then not reliable.
    pub fn from_endpoints(level: usize, base: T, mut endpoints: Vec<Endpoint<T>>) -> Result<Self> {
        if endpoints.is_empty() {
            return Err(Error::InvalidArgument("partition without endpoints".into()));
        }
        let offsets: Vec<T> = endpoints
            .iter()
            .map(|e| (e.value.clone() - base.clone()).fract01())
            .collect();
        let mut order: Vec<usize> = (0..endpoints.len()).collect();
        order.sort_by(|&a, &b| offsets[a].partial_cmp(&offsets[b]).expect("NaN endpoint"));
        let sorted_offsets: Vec<T> = order.iter().map(|&k| offsets[k].clone()).collect();
        let mut slots: Vec<Option<Endpoint<T>>> = endpoints.drain(..).map(Some).collect();
        let endpoints: Vec<Endpoint<T>> = order.iter().map(|&k| slots[k].take().unwrap()).collect();

        let bits = base.precision().min(endpoints[0].value.precision());
        let tol = T::exp2_at(16 - bits as i32, bits);
        let count = endpoints.len();
        let mut lengths = Vec::with_capacity(count);
        for k in 0..count {
            let len = if k + 1 < count {
                sorted_offsets[k + 1].clone() - sorted_offsets[k].clone()
            } else {
                T::one() + sorted_offsets[0].clone() - sorted_offsets[k].clone()
            };
            if count > 1 && len <= tol {
                return Err(Error::PrecisionLoss(format!(
                    "endpoints {} and {} of level {level} are not separated at {bits} bits",
                    endpoints[k].prov,
                    endpoints[(k + 1) % count].prov
                )));
            }
            lengths.push(len);
        }
        let mut index = HashMap::with_capacity(count);
        for (k, e) in endpoints.iter().enumerate() {
            if index.insert(e.prov, k).is_some() {
                return Err(Error::Internal(format!("duplicate endpoint {}", e.prov)));
            }
        }
        Ok(Partition {
            level,
            base,
            endpoints,
            lengths,
            labels: vec![AtomLabel::Piece; count],
            index,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.endpoints.len()
    }

    pub fn endpoints(&self) -> &[Endpoint<T>] {
        &self.endpoints
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn labels(&self) -> &[AtomLabel] {
        &self.labels
    }

    pub fn atom(&self, k: usize) -> Atom<'_, T> {
        Atom {
            start: &self.endpoints[k],
            end: &self.endpoints[(k + 1) % self.endpoints.len()],
            length: &self.lengths[k],
            label: self.labels[k],
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom<'_, T>> {
        (0..self.atom_count()).map(move |k| self.atom(k))
    }

    pub fn arc(&self, k: usize) -> Arc<T> {
        let a = self.atom(k);
        Arc::from_reps(a.start.value.clone(), a.end.value.clone())
    }

    /// Atom `k` together with its two neighbours.
    pub fn star(&self, k: usize) -> Arc<T> {
        let n = self.atom_count();
        if n < 3 {
            return Arc::from_reps(self.base.clone(), self.base.clone() + T::one());
        }
        let s = &self.endpoints[(k + n - 1) % n];
        let e = &self.endpoints[(k + 2) % n];
        Arc::from_reps(s.value.clone(), e.value.clone())
    }

    pub fn contains(&self, prov: &Provenance) -> bool {
        self.index.contains_key(prov)
    }

    pub fn position(&self, prov: &Provenance) -> Option<usize> {
        self.index.get(prov).copied()
    }

    pub fn provenances(&self) -> impl Iterator<Item = &Provenance> {
        self.endpoints.iter().map(|e| &e.prov)
    }

    /// Offset of `x` from the base, in `[0, 1)`.
    fn offset(&self, x: &T) -> T {
        (x.clone() - self.base.clone()).fract01()
    }

    fn start_offset(&self, k: usize) -> T {
        self.offset(&self.endpoints[k].value)
    }

    /// Index of the atom containing `x` (atoms are closed on the left).
    pub fn locate(&self, x: &T) -> usize {
        let o = self.offset(x);
        let (mut lo, mut hi) = (0usize, self.endpoints.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.start_offset(mid) <= o {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `|Σ|I| − 1|`, summed with compensation.
    pub fn coverage_defect(&self) -> T {
        (compensated_sum(&self.lengths) - T::one()).abs()
    }

    /// Largest atom length.
    pub fn max_length(&self) -> T {
        self.lengths
            .iter()
            .cloned()
            .reduce(|a, b| a.max_of(b))
            .unwrap_or_else(T::zero)
    }

    /// Nesting against a coarser partition.
    ///
    /// Decided by provenance: every coarse endpoint must be a fine endpoint.
    /// The numeric check confirms each fine atom lies in the coarse atom
    /// containing its start point.
    pub fn nesting_in(&self, coarse: &Partition<T>) -> Nesting {
        let missing: Vec<Provenance> = coarse
            .provenances()
            .filter(|p| !self.contains(p))
            .copied()
            .collect();
        let mut numeric = true;
        for k in 0..self.atom_count() {
            let j = coarse.locate(&self.endpoints[k].value);
            let c_start = coarse.start_offset(j);
            let c_end = if j + 1 < coarse.atom_count() {
                coarse.start_offset(j + 1)
            } else {
                T::one()
            };
            let s = coarse.offset(&self.endpoints[k].value);
            let e = s.clone() + self.lengths[k].clone();
            let slack = T::exp2_at(12 - s.precision() as i32, s.precision());
            if s < c_start.clone() - slack.clone() || e > c_end + slack {
                numeric = false;
            }
        }
        Nesting {
            provenance: missing.is_empty(),
            numeric,
            missing,
        }
    }

    /// Check the order of each single-orbit subsequence against the
    /// rotation order `i ↦ i·p_K mod q_K`, with `q_K` larger than the spread
    /// of iterates. Returns `false` when no such `K` is available.
    pub fn verify_orbit_order(&self, q: &[u64], p: &[u64]) -> Result<bool> {
        for base in [Base::C0, Base::C1] {
            let iters: Vec<i64> = self
                .endpoints
                .iter()
                .filter(|e| e.prov.base == base)
                .map(|e| e.prov.iterate)
                .collect();
            if iters.len() < 3 {
                continue;
            }
            let span = (iters.iter().max().unwrap() - iters.iter().min().unwrap()) as u64;
            let Some(k) = q.iter().position(|&qk| qk > span) else {
                return Ok(false);
            };
            let (qk, pk) = (q[k] as i128, p[k] as i128);
            let keys: Vec<i128> = iters.iter().map(|&i| (i as i128 * pk).rem_euclid(qk)).collect();
            let descents = (0..keys.len())
                .filter(|&t| keys[(t + 1) % keys.len()] <= keys[t])
                .count();
            // cyclically increasing: exactly one wrap-around
            if descents != 1 {
                return Err(Error::PrecisionLoss(format!(
                    "numeric order of the {base:?} orbit at level {} disagrees with the rotation order",
                    self.level
                )));
            }
        }
        Ok(true)
    }

    /// JSON rendering with decimal values and provenance tuples.
    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let prov = |p: &Provenance| {
            let b = match p.base {
                Base::C0 => "c0",
                Base::C1 => "c1",
            };
            serde_json::json!([b, p.iterate])
        };
        let atoms: Vec<serde_json::Value> = self
            .atoms()
            .map(|a| {
                serde_json::json!({
                    "start": a.start.value.to_decimal(digits),
                    "end": a.end.value.to_decimal(digits),
                    "start_provenance": prov(&a.start.prov),
                    "end_provenance": prov(&a.end.prov),
                    "length": a.length.to_decimal(digits),
                    "label": a.label,
                })
            })
            .collect();
        serde_json::json!({
            "level": self.level,
            "precision_bits": self.base.precision().min(self.endpoints[0].value.precision()),
            "atom_count": self.atom_count(),
            "atoms": atoms,
        })
    }
}

/// Result of [`Partition::nesting_in`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Nesting {
    pub provenance: bool,
    pub numeric: bool,
    pub missing: Vec<Provenance>,
}

impl Nesting {
    pub fn holds(&self) -> bool {
        self.provenance && self.numeric
    }
}

/// Classical partition `P_n(c0)` built from the stored orbit of 0.
pub fn classical_partition<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
) -> Result<DynamicalPartition<T>> {
    if n > orb.max_partition_level() {
        return Err(Error::Budget {
            what: format!("orbit for partition level {n}"),
            required: orb.q(n.min(orb.comb.max_level())) + orb.q((n + 1).min(orb.comb.max_level())),
            budget: orb.orbit_len(),
        });
    }
    let (qn, qn1) = (orb.q(n), orb.q(n + 1));
    let endpoints = (0..qn + qn1)
        .map(|i| Endpoint {
            prov: Provenance::c0(i),
            value: orb.point(i),
        })
        .collect();
    let zero = T::from_i64_at(0, orb.precision());
    let mut part = Partition::from_endpoints(n, zero, endpoints)?;
    if !part.verify_orbit_order(&orb.comb.q, &orb.comb.p)? {
        return Err(Error::Combinatorics(format!("cannot certify the order of level {n}")));
    }
    label_classical(&mut part, n, qn, qn1)?;
    Ok(part)
}

/// Classical partition `P_n(x)` at an arbitrary base point.
pub fn classical_partition_at<T: Real, F: CircleLift<T>>(
    map: &F,
    base: &CirclePoint<T>,
    n: usize,
    budget: u64,
) -> Result<DynamicalPartition<T>> {
    let shifted = Recentered::new(map, base.rep().clone());
    let orb = CriticalOrbit::new(shifted, n + 2, budget)?;
    let part = classical_partition(&orb, n)?;
    let endpoints = part
        .endpoints
        .iter()
        .map(|e| Endpoint {
            prov: e.prov,
            value: (e.value.clone() + base.rep().clone()).fract01(),
        })
        .collect();
    let mut out = Partition::from_endpoints(n, base.rep().clone(), endpoints)?;
    out.labels = part.labels;
    Ok(out)
}

/// Label atoms by the index difference of their endpoints.
///
/// `f^i(I_n)` runs from `f^i(c)` to `f^{i+q_n}(c)`, counterclockwise when
/// `n` is even; parity separates the two families when `q_n = q_{n+1}`.
fn label_classical<T: Real>(part: &mut Partition<T>, n: usize, qn: u64, qn1: u64) -> Result<()> {
    let mut seen_long = vec![false; qn1 as usize];
    let mut seen_short = vec![false; qn as usize];
    for k in 0..part.atom_count() {
        let i = part.endpoints[k].prov.iterate;
        let j = part.endpoints[(k + 1) % part.atom_count()].prov.iterate;
        let d = j - i;
        let lo = i.min(j) as u64;
        let long = (d == qn as i64 && n % 2 == 0) || (d == -(qn as i64) && n % 2 == 1);
        let short = (d == qn1 as i64 && n % 2 == 1) || (d == -(qn1 as i64) && n % 2 == 0);
        part.labels[k] = if long && lo < qn1 && !seen_long[lo as usize] {
            seen_long[lo as usize] = true;
            AtomLabel::Long { iterate: lo }
        } else if short && lo < qn && !seen_short[lo as usize] {
            seen_short[lo as usize] = true;
            AtomLabel::Short { iterate: lo }
        } else {
            return Err(Error::Combinatorics(format!(
                "atom between f^{i}(c) and f^{j}(c) at level {n} is not a classical atom"
            )));
        };
    }
    Ok(())
}

/// The pullback `𝔠_n ∈ J_n(c0)` of the second marked point `c1`.
#[derive(Clone, Debug)]
pub struct FreeCriticalPoint<T> {
    pub level: usize,
    /// Lift of `𝔠_n` near 0, between 0 and `e_n` or `e_{n+1}`.
    pub lift: T,
    /// `f^j(𝔠_n) = c1`.
    pub j: u64,
    /// True when `𝔠_n ∈ I_n(c0)`, false when `𝔠_n ∈ I_{n+1}(c0)`.
    pub in_long: bool,
    /// `|F^j(𝔠_n) − (c1 + m)|` on the lift.
    pub residual: T,
}

impl<T: Real> FreeCriticalPoint<T> {
    pub fn point(&self) -> CirclePoint<T> {
        CirclePoint::new(self.lift.clone())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::c1(-(self.j as i64))
    }
}

fn second_marked<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>) -> Result<T> {
    orb.map
        .marked_points()
        .get(1)
        .cloned()
        .ok_or_else(|| Error::Precondition("map has no second marked point".into()))
}

/// Solve `F^k(x) = target` for `x` between `a` and `b`.
fn pull_back<T: Real, F: CircleLift<T>>(f: &F, k: u64, target: &T, a: &T, b: &T) -> Result<T> {
    if k == 0 {
        return Ok(target.clone());
    }
    solve_increasing(
        |x: &T| {
            let j = f.iterate_jet(&Jet::variable(x.clone()), k);
            (j.v - target.clone(), j.d1)
        },
        a,
        b,
    )
}

/// Locate the atom of `P_n(c0)` containing `c1` and pull `c1` back to `J_n`.
pub fn free_critical_point<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
) -> Result<FreeCriticalPoint<T>> {
    if n > orb.max_partition_level() {
        return Err(Error::Combinatorics(format!("level {n} beyond the stored orbit")));
    }
    let c1 = second_marked(orb)?;
    let bits = orb.precision();
    let tol = T::exp2_at(16 - bits as i32, bits);
    let (qn, qn1) = (orb.q(n), orb.q(n + 1));
    let (pn, pn1) = (orb.p(n) as i64, orb.p(n + 1) as i64);
    // (start iterate, length of the iterate run, return index, return shift, long?)
    let families = [(qn1, qn, pn, true), (qn, qn1, pn1, false)];
    for (count, ret, shift, in_long) in families {
        for i in 0..count {
            let a = orb.lift(i);
            let b = orb.displacement(i + ret, shift);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let m = (hi.clone() - c1.clone()).floor_i64();
            let target = c1.clone() + T::from_i64_at(m, bits);
            if target < lo.clone() - tol.clone() {
                continue;
            }
            if (target.clone() - lo.clone()).abs() <= tol || (hi.clone() - target.clone()).abs() <= tol {
                return Err(Error::Degenerate(format!(
                    "c1 lies on the orbit of c0 (iterate {i}, level {n})"
                )));
            }
            let e = if in_long { orb.e(n).clone() } else { orb.e(n + 1).clone() };
            let zero = T::from_i64_at(0, bits);
            let x = pull_back(&*orb.map, i, &target, &zero, &e)?;
            let residual = (orb.map.iterate(&x, i) - target).abs();
            return Ok(FreeCriticalPoint {
                level: n,
                lift: x,
                j: i,
                in_long,
                residual,
            });
        }
    }
    Err(Error::Internal(format!("c1 not found in any atom of level {n}")))
}

/// The two-bridges condition on `a_{n+1}` and the slot of `𝔠_n`.
pub fn two_bridges_flag(a_next: u64, slot: Option<u64>) -> bool {
    a_next >= 23 && slot.is_some_and(|k| k >= 11 && k + 10 <= a_next)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoBridgesCheck {
    pub flag: bool,
    pub a_next: u64,
    pub slot: Option<u64>,
}

/// Lifts `y_k = F^{q_n + k q_{n+1}}(0) − (p_n + k p_{n+1})`, `0 <= k <= a_{n+1}`.
/// Consecutive points bound `Δ_{k}`, `1 <= k <= a_{n+1}`.
fn bridge_lattice<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>, n: usize) -> Vec<T> {
    let a = orb.a(n + 1);
    (0..=a)
        .map(|k| {
            let idx = orb.q(n) + k * orb.q(n + 1);
            let shift = orb.p(n) + k * orb.p(n + 1);
            orb.displacement(idx, shift as i64)
        })
        .collect()
}

fn between<T: Real>(x: &T, a: &T, b: &T) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    x >= lo && x <= hi
}

fn overlap<T: Real>(a: (&T, &T), b: (&T, &T)) -> bool {
    let (a0, a1) = if a.0 <= a.1 { (a.0, a.1) } else { (a.1, a.0) };
    let (b0, b1) = if b.0 <= b.1 { (b.0, b.1) } else { (b.1, b.0) };
    a0 <= b1 && b0 <= a1
}

fn slot_of<T: Real>(lattice: &[T], x: &T) -> Option<u64> {
    (1..lattice.len())
        .find(|&k| between(x, &lattice[k - 1], &lattice[k]))
        .map(|k| k as u64)
}

pub fn is_two_bridges_level<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
) -> Result<TwoBridgesCheck> {
    let fcp = free_critical_point(orb, n)?;
    Ok(check_from(orb, n, &fcp))
}

fn check_from<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
    fcp: &FreeCriticalPoint<T>,
) -> TwoBridgesCheck {
    let a_next = orb.a(n + 1);
    let slot = if fcp.in_long {
        slot_of(&bridge_lattice(orb, n), &fcp.lift)
    } else {
        None
    };
    TwoBridgesCheck {
        flag: two_bridges_flag(a_next, slot),
        a_next,
        slot,
    }
}

/// Bridge data of a two-bridges level.
#[derive(Clone, Debug)]
pub struct Bridges<T> {
    pub level: usize,
    pub a_next: u64,
    pub slot: u64,
    pub r: u64,
    pub l: u64,
    /// `|Δ_R| < |Δ_1|` in return-time units, i.e. the containment opposite
    /// to the generic picture.
    pub right_mirrored: bool,
    pub left_mirrored: bool,
    /// `r` and `ℓ` agree with `⌊k/2⌋` and `⌊(a−k)/2⌋`.
    pub closed_form_ok: bool,
    pub free: FreeCriticalPoint<T>,
    /// `y_0 ..= y_a`.
    pub lattice: Vec<T>,
    /// `η^i(𝔠_n)` for `1 − r <= i <= ℓ + 1`.
    pub pullbacks: BTreeMap<i64, T>,
}

/// `r(n)` and `ℓ(n)` from the first overlaps of the sweeps through the
/// bridge, using `η = F^{q_{n+1}} − p_{n+1}` on `I_n`.
pub fn bridge_counts<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>, n: usize) -> Result<Bridges<T>> {
    let free = free_critical_point(orb, n)?;
    let check = check_from(orb, n, &free);
    if !check.flag {
        return Err(Error::Precondition(format!("level {n} is not a two-bridges level")));
    }
    let k = check.slot.unwrap();
    let a = check.a_next;
    let y = bridge_lattice(orb, n);
    let bits = orb.precision();
    let (q1, p1) = (orb.q(n + 1), T::from_i64_at(orb.p(n + 1) as i64, bits));
    let eta = |x: &T| orb.map.iterate(x, q1) - p1.clone();

    let mut x: BTreeMap<i64, T> = BTreeMap::new();
    x.insert(0, free.lift.clone());
    x.insert(1, eta(&free.lift));

    let mut r = None;
    for j in 0..=a {
        let ji = j as i64;
        if !x.contains_key(&-ji) {
            // x_{-j} sits in slot k - j
            let s = k as i64 - ji;
            if s < 1 {
                break;
            }
            let target = x[&(1 - ji)].clone() + p1.clone();
            let v = pull_back(&*orb.map, q1, &target, &y[s as usize - 1], &y[s as usize])?;
            x.insert(-ji, v);
        }
        if overlap((&y[j as usize], &y[j as usize + 1]), (&x[&-ji], &x[&(1 - ji)])) {
            r = Some(j);
            break;
        }
    }
    let mut l = None;
    for j in 0..=a {
        let ji = j as i64;
        if !x.contains_key(&(ji + 1)) {
            let v = eta(&x[&ji]);
            x.insert(ji + 1, v);
        }
        if j + 1 > a {
            break;
        }
        let lo = (a - 1 - j) as usize;
        if overlap((&y[lo], &y[lo + 1]), (&x[&ji], &x[&(ji + 1)])) {
            l = Some(j);
            break;
        }
    }
    let (Some(r), Some(l)) = (r, l) else {
        return Err(Error::Internal(format!(
            "bridge sweeps at level {n} found no overlap; precision is insufficient"
        )));
    };
    // Lengths in return-time units: Δ_R = [r, θ+1−r], Δ_L = [θ+ℓ, a−ℓ].
    // Compared through the lattice: Δ_R shorter than one step iff x_{1−r}
    // lies before y_{r+1}.
    let time_before = |u: &T, v: &T| u.abs() > v.abs();
    let right_mirrored = time_before(&x[&(1 - r as i64)], &y[r as usize + 1]);
    let left_mirrored = time_before(&y[(a - l) as usize], &x[&(l as i64 + 1)]);
    let closed_form_ok = r == k / 2 && l == (a - k) / 2;
    Ok(Bridges {
        level: n,
        a_next: a,
        slot: k,
        r,
        l,
        right_mirrored,
        left_mirrored,
        closed_form_ok,
        free,
        lattice: y,
        pullbacks: x,
    })
}

/// Log of the endpoint surgery that produced a level.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SurgeryLog {
    pub removed: Vec<Provenance>,
    pub added: Vec<Provenance>,
    /// Endpoints added at the midpoint of their atom, without removal.
    pub midpoints: Vec<Provenance>,
    /// Removals skipped because the nearest endpoint was already present
    /// one level up.
    pub protected: Vec<Provenance>,
}

#[derive(Clone, Debug)]
pub struct TwoBridgesMeta<T> {
    pub is_two_bridges_level: bool,
    pub a_next: u64,
    pub free_critical_point: Option<FreeCriticalPoint<T>>,
    pub slot: Option<u64>,
    pub r: Option<u64>,
    pub l: Option<u64>,
    pub right_mirrored: Option<bool>,
    pub left_mirrored: Option<bool>,
    /// This level was assembled from the bridges of the level below.
    pub built_from_bridges: bool,
    pub surgery: SurgeryLog,
}

#[derive(Clone, Debug)]
pub struct TwoBridgesPartition<T> {
    pub partition: Partition<T>,
    pub meta: TwoBridgesMeta<T>,
}

impl<T: Real> TwoBridgesPartition<T> {
    pub fn level(&self) -> usize {
        self.partition.level
    }

    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let mut v = self.partition.to_json(digits);
        let m = &self.meta;
        v["meta"] = serde_json::json!({
            "is_two_bridges_level": m.is_two_bridges_level,
            "a_next": m.a_next,
            "free_critical_point": m.free_critical_point.as_ref().map(|c| c.point().rep().to_decimal(digits)),
            "free_critical_point_j": m.free_critical_point.as_ref().map(|c| c.j),
            "slot": m.slot,
            "r": m.r,
            "l": m.l,
            "right_mirrored": m.right_mirrored,
            "left_mirrored": m.left_mirrored,
            "built_from_bridges": m.built_from_bridges,
            "removed_endpoints": m.surgery.removed,
            "added_endpoints": m.surgery.added,
            "midpoint_additions": m.surgery.midpoints,
            "protected_endpoints": m.surgery.protected,
        });
        v
    }
}

fn classical_endpoints<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>, n: usize) -> Vec<Endpoint<T>> {
    (0..orb.q(n) + orb.q(n + 1))
        .map(|i| Endpoint {
            prov: Provenance::c0(i),
            value: orb.point(i),
        })
        .collect()
}

/// Endpoints of the level built from the bridges of level `n`: `E_{n+1}`
/// with the bridge interior replaced by the lattice `η^i(𝔠_n)`, spread by
/// `f^j`, `j < q_{n+1}`.
fn bridge_endpoints<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>, b: &Bridges<T>) -> Vec<Endpoint<T>> {
    let n = b.level;
    let (qn, q1) = (orb.q(n), orb.q(n + 1));
    let dropped: HashSet<u64> = (b.r + 1..b.a_next - b.l)
        .flat_map(|m| (0..q1).map(move |j| j + qn + m * q1))
        .collect();
    let mut out: Vec<Endpoint<T>> = classical_endpoints(orb, n + 1)
        .into_iter()
        .filter(|e| !dropped.contains(&(e.prov.iterate as u64)))
        .collect();
    let jj = b.free.j as i64;
    for i in (1 - b.r as i64)..=(b.l as i64) {
        let mut v = b.pullbacks[&i].clone();
        for j in 0..q1 {
            out.push(Endpoint {
                prov: Provenance::c1(j as i64 + i * q1 as i64 - jj),
                value: v.fract01(),
            });
            v = orb.map.eval(&v);
        }
    }
    out
}

/// Make `prev`'s endpoints part of `base`: each missing `v` is added and
/// the nearest endpoint `w` of its atom is removed, unless `v` is at the
/// midpoint or `w` is itself an endpoint of `prev`.
fn surgery<T: Real>(base: Partition<T>, prev: &Partition<T>) -> Result<(Vec<Endpoint<T>>, SurgeryLog)> {
    let mut log = SurgeryLog::default();
    let mut removed: HashSet<Provenance> = HashSet::new();
    let mut added: Vec<Endpoint<T>> = Vec::new();
    for v in prev.endpoints() {
        if base.contains(&v.prov) {
            continue;
        }
        let k = base.locate(&v.value);
        let len = base.lengths[k].clone();
        let du = base.offset(&v.value) - base.start_offset(k);
        let dw = len.clone() - du.clone();
        let bits = len.precision();
        let tol = T::exp2_at(-(bits as i32) / 2, bits) * len;
        if (du.clone() - dw.clone()).abs() <= tol {
            log.midpoints.push(v.prov);
        } else {
            let w = if du < dw { &base.endpoints[k] } else { &base.endpoints[(k + 1) % base.atom_count()] };
            if prev.contains(&w.prov) {
                log.protected.push(w.prov);
            } else if removed.insert(w.prov) {
                log.removed.push(w.prov);
            }
        }
        log.added.push(v.prov);
        added.push(v.clone());
    }
    let mut out: Vec<Endpoint<T>> = base
        .endpoints
        .into_iter()
        .filter(|e| !removed.contains(&e.prov))
        .collect();
    out.extend(added);
    Ok((out, log))
}

fn meta_for<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
) -> Result<(TwoBridgesMeta<T>, Option<Bridges<T>>)> {
    let fcp = free_critical_point(orb, n)?;
    let check = check_from(orb, n, &fcp);
    let bridges = if check.flag { Some(bridge_counts(orb, n)?) } else { None };
    let meta = TwoBridgesMeta {
        is_two_bridges_level: check.flag,
        a_next: check.a_next,
        free_critical_point: Some(fcp),
        slot: check.slot,
        r: bridges.as_ref().map(|b| b.r),
        l: bridges.as_ref().map(|b| b.l),
        right_mirrored: bridges.as_ref().map(|b| b.right_mirrored),
        left_mirrored: bridges.as_ref().map(|b| b.left_mirrored),
        built_from_bridges: false,
        surgery: SurgeryLog::default(),
    };
    Ok((meta, bridges))
}

/// `P̂_0, …, P̂_{n_max}`.
pub fn two_bridges_sequence<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n_max: usize,
) -> Result<Vec<TwoBridgesPartition<T>>> {
    if n_max > orb.max_partition_level() {
        return Err(Error::Combinatorics(format!(
            "two-bridges level {n_max} requested; the stored orbit supports {}",
            orb.max_partition_level()
        )));
    }
    let zero = T::from_i64_at(0, orb.precision());
    let mut out: Vec<TwoBridgesPartition<T>> = Vec::with_capacity(n_max + 1);
    let (meta, mut bridges) = meta_for(orb, 0)?;
    out.push(TwoBridgesPartition {
        partition: classical_partition(orb, 0)?,
        meta,
    });
    for n in 0..n_max {
        let prev = &out[n].partition;
        let base_endpoints = match &bridges {
            Some(b) => bridge_endpoints(orb, b),
            None => classical_endpoints(orb, n + 1),
        };
        let built_from_bridges = bridges.is_some();
        let base = Partition::from_endpoints(n + 1, zero.clone(), base_endpoints)?;
        let (endpoints, log) = surgery(base, prev)?;
        let partition = Partition::from_endpoints(n + 1, zero.clone(), endpoints)?;
        if !partition.verify_orbit_order(&orb.comb.q, &orb.comb.p)? {
            return Err(Error::Combinatorics(format!("cannot certify the order of level {}", n + 1)));
        }
        let (mut meta, next) = meta_for(orb, n + 1)?;
        meta.built_from_bridges = built_from_bridges;
        meta.surgery = log;
        bridges = next;
        out.push(TwoBridgesPartition { partition, meta });
    }
    Ok(out)
}

/// `P̂_n`, built through all lower levels.
pub fn two_bridges_partition<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
) -> Result<TwoBridgesPartition<T>> {
    Ok(two_bridges_sequence(orb, n)?.pop().unwrap())
}

/// Mechanical check of the listed properties on one level of the sequence.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub level: usize,
    /// (1) every endpoint is an iterate of `c0` or `c1` and its value checks out.
    pub dynamically_defined: bool,
    /// (2) `I_{n−1}` and `I_n` are unions of atoms of this level.
    pub contains_return_intervals: bool,
    /// (3) nested in the previous level.
    pub nested: bool,
    /// (4) the largest atom shrinks over two levels.
    pub refining: bool,
    /// (5) the free critical point of the level below is an endpoint, when
    /// that level is a two-bridges level.
    pub free_point_endpoint: Option<bool>,
    pub coverage_defect: f64,
}

impl PropertyReport {
    pub fn holds(&self) -> bool {
        self.dynamically_defined
            && self.contains_return_intervals
            && self.nested
            && self.refining
            && self.free_point_endpoint != Some(false)
    }
}

pub fn check_properties<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    seq: &[TwoBridgesPartition<T>],
) -> Result<Vec<PropertyReport>> {
    let c1 = second_marked(orb)?;
    let bits = orb.precision();
    let tol = T::exp2_at(24 - bits as i32, bits);
    let mut out = Vec::with_capacity(seq.len());
    for (n, tb) in seq.iter().enumerate() {
        let part = &tb.partition;
        let dynamically_defined = part.endpoints().iter().all(|e| match e.prov.base {
            Base::C0 => {
                let i = e.prov.iterate;
                i >= 0 && (i as u64) < orb.orbit_len() && orb.point(i as u64) == e.value
            }
            Base::C1 => {
                let i = e.prov.iterate;
                let (start, steps, target) = if i >= 0 {
                    (c1.clone(), i as u64, e.value.clone())
                } else {
                    (e.value.clone(), (-i) as u64, c1.clone())
                };
                let img = orb.map.iterate(&start, steps);
                CirclePoint::new(img).distance(&CirclePoint::new(target)) <= tol
            }
        });
        let contains_return_intervals = n == 0
            || [Provenance::c0(0), Provenance::c0(orb.q(n - 1)), Provenance::c0(orb.q(n))]
                .iter()
                .all(|p| part.contains(p));
        let nested = n == 0 || part.nesting_in(&seq[n - 1].partition).holds();
        let refining = n < 2 || part.max_length() < seq[n - 2].partition.max_length();
        let free_point_endpoint = if n > 0 && seq[n - 1].meta.is_two_bridges_level {
            let fcp = seq[n - 1].meta.free_critical_point.as_ref().unwrap();
            Some(part.contains(&fcp.provenance()))
        } else {
            None
        };
        out.push(PropertyReport {
            level: n,
            dynamically_defined,
            contains_return_intervals,
            nested,
            refining,
            free_point_endpoint,
            coverage_defect: part.coverage_defect().to_f64(),
        });
    }
    Ok(out)
}

/// For each endpoint of `P_n`, the first `m >= n` with the endpoint in `Ê_m`.
/// Returns, per level `n`, the largest observed `m − n` (`None` when some
/// endpoint never appears within the computed depth).
pub fn classical_endpoint_recovery<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    seq: &[TwoBridgesPartition<T>],
) -> Vec<(usize, Option<usize>)> {
    (0..seq.len())
        .map(|n| {
            let mut worst = Some(0usize);
            for i in 0..orb.q(n) + orb.q(n + 1) {
                let p = Provenance::c0(i);
                let first = (n..seq.len()).find(|&m| seq[m].partition.contains(&p));
                worst = match (worst, first) {
                    (Some(w), Some(m)) => Some(w.max(m - n)),
                    _ => None,
                };
            }
            (n, worst)
        })
        .collect()
}

/// Ratio `max(|I|/|J|, |J|/|I|)`.
fn sym_ratio<T: Real>(a: &T, b: &T) -> f64 {
    let r = (a.clone() / b.clone()).to_f64();
    r.max(1.0 / r)
}

#[derive(Clone, Debug, Serialize)]
pub struct RealBoundsReport {
    /// (level, max adjacent ratio).
    pub per_level: Vec<(usize, f64)>,
    pub global_max: f64,
}

/// Largest ratio of adjacent atom lengths on each level.
pub fn real_bounds_audit<T: Real>(parts: &[&Partition<T>]) -> Result<RealBoundsReport> {
    if parts.len() < 2 {
        return Err(Error::InvalidArgument("real bounds audit needs at least two levels".into()));
    }
    let per_level: Vec<(usize, f64)> = parts
        .par_iter()
        .map(|p| {
            let n = p.atom_count();
            let worst = (0..n)
                .map(|k| sym_ratio(&p.lengths[k], &p.lengths[(k + 1) % n]))
                .fold(1.0f64, f64::max);
            (p.level, worst)
        })
        .collect();
    let global_max = per_level.iter().map(|x| x.1).fold(1.0, f64::max);
    Ok(RealBoundsReport { per_level, global_max })
}

/// Largest `max(|I|/|Î|, |Î|/|I|)` over intersecting atoms of two
/// partitions with the same base.
pub fn comparability<T: Real>(a: &Partition<T>, b: &Partition<T>) -> f64 {
    let mut worst = 1.0f64;
    let na = a.atom_count();
    for k in 0..b.atom_count() {
        let s = b.start_offset(k);
        let e = s.clone() + b.lengths[k].clone();
        let mut j = a.locate(&b.endpoints[k].value);
        loop {
            worst = worst.max(sym_ratio(&a.lengths[j], &b.lengths[k]));
            j += 1;
            if j >= na || a.start_offset(j) >= e {
                break;
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefiningEntry {
    pub n: usize,
    pub m: usize,
    pub mu: f64,
}

/// `max (|I|/|J|)^{1/(m−n)}` over `I ∈` level `m` inside `J ∈` level `n`,
/// for every pair of supplied levels.
pub fn refining_audit<T: Real>(parts: &[&Partition<T>]) -> Result<Vec<RefiningEntry>> {
    if parts.len() < 2 {
        return Err(Error::InvalidArgument("refining audit needs at least two levels".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..parts.len())
        .flat_map(|a| (a + 1..parts.len()).map(move |b| (a, b)))
        .collect();
    Ok(pairs
        .par_iter()
        .map(|&(a, b)| {
            let (coarse, fine) = (parts[a], parts[b]);
            let gap = (fine.level - coarse.level).max(1) as f64;
            let worst = (0..fine.atom_count())
                .map(|k| {
                    let j = coarse.locate(&fine.endpoints[k].value);
                    (fine.lengths[k].clone() / coarse.lengths[j].clone()).to_f64()
                })
                .fold(0.0f64, f64::max);
            RefiningEntry {
                n: coarse.level,
                m: fine.level,
                mu: worst.powf(1.0 / gap),
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct KoebeReport {
    pub k: u64,
    /// `sup_{x,y ∈ M} Df^k(x)/Df^k(y)`.
    pub distortion: f64,
    /// `Σ_{j<k} |f^j(T)|`.
    pub gamma: f64,
    /// Space of `f^k(M)` inside `f^k(T)`.
    pub tau: f64,
    /// `(1 + 1/τ)^2`.
    pub koebe_factor: f64,
    /// Smallest `C̃` with `distortion <= (1+1/τ)^2 exp(C̃ γ)`.
    pub c_tilde_needed: f64,
    pub within_bound: bool,
}

/// Koebe distortion audit of `f^k` on `M ⊂ T`.
///
/// `Df^k` is sampled on `grid` Chebyshev points of `M`.
pub fn koebe_audit<T: Real, F: CircleLift<T> + ?Sized>(
    f: &F,
    t: &Arc<T>,
    m: &Arc<T>,
    k: u64,
    c_tilde: f64,
    grid: usize,
) -> Result<KoebeReport> {
    let t0 = t.start.rep().clone();
    let t1 = t0.clone() + t.length();
    let m0 = t0.clone() + t.start.offset_to(&m.start).fract01();
    let m1 = m0.clone() + m.length();
    if m1 > t1 {
        return Err(Error::InvalidArgument("M is not contained in T".into()));
    }
    let crit = f.critical_set();
    let mut gamma = 0.0f64;
    let (mut a, mut b) = (t0.clone(), t1.clone());
    for step in 0..k {
        for c in &crit {
            let off = (c.clone() - a.clone()).fract01();
            if off.is_positive() && off < b.clone() - a.clone() {
                return Err(Error::NotDiffeomorphism { step: step as usize });
            }
        }
        gamma += (b.clone() - a.clone()).to_f64();
        a = f.eval(&a);
        b = f.eval(&b);
    }
    let fm0 = f.iterate(&m0, k);
    let fm1 = f.iterate(&m1, k);
    let img_m = fm1.clone() - fm0.clone();
    let left = fm0 - a;
    let right = b - fm1;
    let tau = (left.min_of(right) / img_m).to_f64();
    let samples = chebyshev_points(&m0, &m1, grid.max(2));
    let derivs: Vec<f64> = samples
        .par_iter()
        .map(|x| f.iterate_jet(&Jet::variable(x.clone()), k).d1.to_f64())
        .collect();
    let hi = derivs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = derivs.iter().cloned().fold(f64::MAX, f64::min);
    if lo <= 0.0 {
        return Err(Error::NotDiffeomorphism { step: k as usize });
    }
    let distortion = hi / lo;
    let koebe_factor = (1.0 + 1.0 / tau).powi(2);
    let c_tilde_needed = if distortion <= koebe_factor || gamma == 0.0 {
        0.0
    } else {
        (distortion / koebe_factor).ln() / gamma
    };
    Ok(KoebeReport {
        k,
        distortion,
        gamma,
        tau,
        koebe_factor,
        c_tilde_needed,
        within_bound: c_tilde_needed <= c_tilde,
    })
}
