//! Commuting pairs, the renormalization operator, the Möbius-normalized
//! pseudo-distance and the M-controlled checklist.
//!
//! Pairs are stored in the normalized frame `x = λ ũ`, `λ = −(F^{q_{n+1}}(0) − p_{n+1})`,
//! so that `η(0) = −1` holds exactly and `ξ(0) = |I_n| / |I_{n+1}|`.

use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use serde::Serialize;

use crate::decay::DecayReport;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::maps::{chebyshev_points, schwarzian_from, CircleLift, Recentered};
use crate::numerics::{solve_increasing, Real};
use crate::partitions::free_critical_point;
use crate::rotation::CriticalOrbit;

/// Default cap on the number of `η` steps when counting `χ`.
pub const DEFAULT_CHI_CAP: usize = 1 << 20;

/// Default mesh size per side of 0.
pub const DEFAULT_GRID: usize = 1024;

/// Branch of a pair, acting on jets.
pub type Branch<T> = Arc<dyn Fn(&Jet<T>) -> Jet<T> + Send + Sync>;

/// `(η, ξ)` with `η` on `[0, ξ(0)]` and `ξ` on `[η(0), 0]`.
#[derive(Clone)]
pub struct CommutingPair<T> {
    pub eta: Branch<T>,
    pub xi: Branch<T>,
    /// `η(0) < 0`, left end of the domain of `ξ`.
    pub eta0: T,
    /// `ξ(0) > 0`, right end of the domain of `η`.
    pub xi0: T,
    /// Critical point of `η` inside `(0, ξ(0))`.
    pub beta: Option<T>,
    /// Critical point of `ξ` inside `(η(0), 0)`.
    pub beta_xi: Option<T>,
    pub level: usize,
    /// Sign of the frame relative to the lift.
    pub orientation: i8,
}

impl<T: Real> fmt::Debug for CommutingPair<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommutingPair")
            .field("level", &self.level)
            .field("eta0", &self.eta0)
            .field("xi0", &self.xi0)
            .field("beta", &self.beta)
            .field("beta_xi", &self.beta_xi)
            .field("orientation", &self.orientation)
            .finish()
    }
}

impl<T: Real> CommutingPair<T> {
    pub fn eta(&self, x: &T) -> T {
        (self.eta)(&Jet::value_only(x.clone())).v
    }

    pub fn xi(&self, x: &T) -> T {
        (self.xi)(&Jet::value_only(x.clone())).v
    }

    pub fn eta_jet(&self, x: &T) -> Jet<T> {
        (self.eta)(&Jet::variable(x.clone()))
    }

    pub fn xi_jet(&self, x: &T) -> Jet<T> {
        (self.xi)(&Jet::variable(x.clone()))
    }

    /// `η(x)` for `x >= 0`, `ξ(x)` for `x < 0`.
    pub fn eval(&self, x: &T) -> T {
        if x.is_negative() {
            self.xi(x)
        } else {
            self.eta(x)
        }
    }

    /// `|η(ξ(0)) − ξ(η(0))|`.
    pub fn commutation_residual(&self) -> T {
        (self.eta(&self.xi0) - self.xi(&self.eta0)).abs()
    }

    /// Largest relative gap between the derivatives of `η∘ξ` and `ξ∘η` at 0,
    /// orders 1 to 3.
    pub fn lateral_residual(&self) -> T {
        let zero = Jet::variable(self.xi0.clone() - self.xi0.clone());
        let a = (self.eta)(&(self.xi)(&zero));
        let b = (self.xi)(&(self.eta)(&zero));
        let rel = |x: &T, y: &T| {
            let scale = x.abs().max_of(y.abs()).max_of(T::one());
            (x.clone() - y.clone()).abs() / scale
        };
        rel(&a.d1, &b.d1).max_of(rel(&a.d2, &b.d2)).max_of(rel(&a.d3, &b.d3))
    }

    /// Lateral derivatives agree to `2^{16−P}`.
    pub fn laterally_matched(&self) -> bool {
        let bits = self.xi0.precision();
        self.lateral_residual() <= T::exp2_at(16 - bits as i32, bits)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta0.is_negative() || !self.xi0.is_positive() {
            return Err(Error::Precondition(format!(
                "pair requires η(0) < 0 < ξ(0), got η(0) = {}, ξ(0) = {}",
                self.eta0.to_f64(),
                self.xi0.to_f64()
            )));
        }
        Ok(())
    }
}

/// Pair rescaled so that `η(0) = −1`; `s = ξ(0)`.
#[derive(Clone)]
pub struct NormalizedPair<T> {
    pub pair: CommutingPair<T>,
    pub s: T,
}

impl<T: Real> fmt::Debug for NormalizedPair<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalizedPair").field("pair", &self.pair).field("s", &self.s).finish()
    }
}

impl<T: Real> NormalizedPair<T> {
    /// Rescale any pair by `1/|η(0)|`.
    pub fn from_pair(pair: CommutingPair<T>) -> Result<Self> {
        pair.validate()?;
        let k = -pair.eta0.clone();
        let zero = k.clone() - k.clone();
        let wrap = |b: &Branch<T>| -> Branch<T> {
            let b = b.clone();
            let (k, zero) = (k.clone(), zero.clone());
            Arc::new(move |u: &Jet<T>| b(&u.affine(&k, &zero)).div_scalar(&k))
        };
        let eta = wrap(&pair.eta);
        let xi = wrap(&pair.xi);
        let eta0 = eta(&Jet::value_only(zero.clone())).v;
        let xi0 = pair.xi0.clone() / k.clone();
        Ok(NormalizedPair {
            pair: CommutingPair {
                eta,
                xi,
                eta0,
                xi0: xi0.clone(),
                beta: pair.beta.map(|b| b / k.clone()),
                beta_xi: pair.beta_xi.map(|b| b / k.clone()),
                level: pair.level,
                orientation: pair.orientation,
            },
            s: xi0,
        })
    }

    /// `|I_{n+1}| / |I_n|` for pairs extracted from a map.
    pub fn scaling_ratio(&self) -> T {
        T::one() / self.s.clone()
    }
}

/// Orbit data of `F` recentred at its marked point `critical_index`.
pub fn critical_orbit<T: Real, M: CircleLift<T>>(
    map: M,
    critical_index: usize,
    depth: usize,
    budget: u64,
) -> Result<CriticalOrbit<T, Recentered<T, M>>> {
    let marked = map.marked_points();
    let offset = marked
        .get(critical_index)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("no marked point with index {critical_index}")))?;
    CriticalOrbit::new(Recentered::new(map, offset), depth, budget)
}

fn lift_branch<T: Real, F: CircleLift<T> + 'static>(map: &Arc<F>, q: u64, p: i64, lam: T) -> Branch<T> {
    let map = map.clone();
    let zero = lam.clone() - lam.clone();
    Arc::new(move |u: &Jet<T>| {
        let x = u.affine(&lam, &zero);
        map.iterate_jet_shifted(&x, q, p).div_scalar(&lam)
    })
}

/// `R^n f` at the base point of `orb`, in the normalized frame.
///
/// `η = F^{q_{n+1}} − p_{n+1}` on `I_n` and `ξ = F^{q_n} − p_n` on `I_{n+1}`.
/// The critical point coming from the second marked point is recorded in
/// whichever branch contains it.
pub fn pair_at_level<T: Real, F: CircleLift<T> + 'static>(
    orb: &CriticalOrbit<T, F>,
    n: usize,
) -> Result<NormalizedPair<T>> {
    orb.comb.require_level(n + 1)?;
    let bits = orb.precision();
    let (qn, qn1) = (orb.q(n), orb.q(n + 1));
    if qn1 >= orb.orbit_len() {
        return Err(Error::Budget {
            what: format!("orbit for pair at level {n}"),
            required: qn1 + 1,
            budget: orb.orbit_len(),
        });
    }
    let (pn, pn1) = (orb.p(n) as i64, orb.p(n + 1) as i64);
    let lam = -orb.displacement(qn1, pn1);
    let eta = lift_branch(&orb.map, qn1, pn1, lam.clone());
    let xi = lift_branch(&orb.map, qn, pn, lam.clone());
    let zero = Jet::value_only(T::from_i64_at(0, bits));
    let eta0 = eta(&zero).v;
    let xi0 = xi(&zero).v;
    let (mut beta, mut beta_xi) = (None, None);
    if n <= orb.max_partition_level() {
        let c = free_critical_point(orb, n)?;
        let b = c.lift.clone() / lam.clone();
        if c.in_long {
            beta = Some(b);
        } else {
            beta_xi = Some(b);
        }
    }
    let pair = CommutingPair {
        eta,
        xi,
        eta0,
        xi0: xi0.clone(),
        beta,
        beta_xi,
        level: n,
        orientation: if lam.is_negative() { -1 } else { 1 },
    };
    pair.validate()?;
    Ok(NormalizedPair { pair, s: xi0 })
}

/// Iterates `η^k(ξ(0))` for `k = 0, 1, …` up to and including the first
/// negative one.
fn eta_orbit<T: Real>(pair: &CommutingPair<T>, cap: usize) -> Result<Vec<T>> {
    let mut out = vec![pair.xi0.clone()];
    for _ in 0..cap {
        let x = out.last().unwrap();
        let y = pair.eta(x);
        if y.is_negative() {
            out.push(y);
            return Ok(out);
        }
        if y >= *x {
            return Err(Error::PeriodInfinite);
        }
        out.push(y);
    }
    Err(Error::ChiCap {
        cap,
        partial: out.len() - 1,
    })
}

/// Least `k >= 1` with `η^k(ξ(0)) < 0`.
pub fn crossing_count<T: Real>(pair: &CommutingPair<T>, cap: usize) -> Result<usize> {
    Ok(eta_orbit(pair, cap)?.len() - 1)
}

/// Number of `η` steps that keep `ξ(0)` in `I_η`: `η^χ(ξ(0)) >= 0 > η^{χ+1}(ξ(0))`.
/// Equals `a_{n+1}` for the pair of level `n`.
pub fn chi<T: Real>(pair: &CommutingPair<T>, cap: usize) -> Result<usize> {
    Ok(crossing_count(pair, cap)? - 1)
}

/// `(η|[0, η^χ(ξ(0))], η^χ∘ξ|[η(0), 0])`.
pub fn prerenormalize<T: Real>(pair: &CommutingPair<T>, cap: usize) -> Result<CommutingPair<T>> {
    pair.validate()?;
    let orbit = eta_orbit(pair, cap)?;
    let a = orbit.len() - 2;
    if a == 0 {
        return Err(Error::Precondition("η(ξ(0)) < 0: the pair has no renormalization".into()));
    }
    let mu = orbit[a].clone();
    if !mu.is_positive() {
        return Err(Error::Precondition("η^χ(ξ(0)) is not inside the domain of η".into()));
    }
    let (eta, xi) = (pair.eta.clone(), pair.xi.clone());
    let composed: Branch<T> = Arc::new(move |u: &Jet<T>| {
        let mut y = xi(u);
        for _ in 0..a {
            y = eta(&y);
        }
        y
    });
    let beta = pair.beta.clone().filter(|b| b.is_positive() && *b < mu);
    let mut beta_xi = pair.beta_xi.clone();
    if beta_xi.is_none() {
        if let Some(b) = &pair.beta {
            beta_xi = pull_back_beta(pair, a, b)?;
        }
    }
    Ok(CommutingPair {
        eta: pair.eta.clone(),
        xi: composed,
        eta0: pair.eta0.clone(),
        xi0: mu,
        beta,
        beta_xi,
        level: pair.level,
        orientation: pair.orientation,
    })
}

/// The point of `(η(0), 0)` sent to `β` by some `η^k∘ξ`, `k < a`.
fn pull_back_beta<T: Real>(pair: &CommutingPair<T>, a: usize, beta: &T) -> Result<Option<T>> {
    let mut lo = pair.xi(&pair.eta0);
    let mut hi = pair.xi0.clone();
    for k in 0..a {
        if *beta > lo && *beta < hi {
            let g = |x: &T| {
                let mut y = pair.xi_jet(x);
                for _ in 0..k {
                    y = (pair.eta)(&y);
                }
                (y.v - beta.clone(), y.d1)
            };
            let zero = pair.xi0.clone() - pair.xi0.clone();
            return solve_increasing(g, &pair.eta0, &zero).map(Some);
        }
        lo = pair.eta(&lo);
        hi = pair.eta(&hi);
    }
    Ok(None)
}

/// Pre-renormalize, flip orientation and rescale so that `η(0) = −1`.
///
/// The branches swap roles: the new `η` is the old `η^χ∘ξ` and the new `ξ`
/// is the old `η`, both seen through `x ↦ −μ x`, `μ = η^χ(ξ(0))`.
pub fn renormalize<T: Real>(p: &NormalizedPair<T>, cap: usize) -> Result<NormalizedPair<T>> {
    let pr = prerenormalize(&p.pair, cap)?;
    let k = -pr.xi0.clone();
    let zero = k.clone() - k.clone();
    let flip = |b: &Branch<T>| -> Branch<T> {
        let b = b.clone();
        let (k, zero) = (k.clone(), zero.clone());
        Arc::new(move |u: &Jet<T>| b(&u.affine(&k, &zero)).div_scalar(&k))
    };
    let eta = flip(&pr.xi);
    let xi = flip(&pr.eta);
    let z = Jet::value_only(zero.clone());
    let eta0 = eta(&z).v;
    let xi0 = xi(&z).v;
    let pair = CommutingPair {
        eta,
        xi,
        eta0,
        xi0: xi0.clone(),
        beta: pr.beta_xi.map(|b| b / k.clone()),
        beta_xi: pr.beta.map(|b| b / k.clone()),
        level: pr.level + 1,
        orientation: -pr.orientation,
    };
    pair.validate()?;
    Ok(NormalizedPair { pair, s: xi0 })
}

/// `τ(x) = αx/(γx + δ)` with `τ(η(0)) = −1`, `τ(0) = 0`, `τ(ξ(0)) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moebius<T> {
    pub alpha: T,
    pub gamma: T,
    pub delta: T,
}

impl<T: Real> Moebius<T> {
    /// For `η(0) = −A`, `ξ(0) = B`: `α = A + B`, `γ = B − A`, `δ = 2AB`.
    pub fn new(eta0: &T, xi0: &T) -> Result<Self> {
        let a = -eta0.clone();
        let b = xi0.clone();
        if !a.is_positive() || !b.is_positive() {
            return Err(Error::Degenerate(format!(
                "Möbius frame needs η(0) < 0 < ξ(0), got {} and {}",
                eta0.to_f64(),
                xi0.to_f64()
            )));
        }
        Ok(Moebius {
            alpha: a.clone() + b.clone(),
            gamma: b.clone() - a.clone(),
            delta: a.int(2) * a * b,
        })
    }

    pub fn for_pair(p: &CommutingPair<T>) -> Result<Self> {
        Self::new(&p.eta0, &p.xi0)
    }

    pub fn eval(&self, x: &T) -> T {
        self.alpha.clone() * x.clone() / (self.gamma.clone() * x.clone() + self.delta.clone())
    }

    pub fn derivative(&self, x: &T) -> T {
        let w = self.gamma.clone() * x.clone() + self.delta.clone();
        self.alpha.clone() * self.delta.clone() / (w.clone() * w)
    }

    /// `[τ, τ', τ'', τ''']` at `x`.
    pub fn local(&self, x: &T) -> [T; 4] {
        let w = self.gamma.clone() * x.clone() + self.delta.clone();
        let ad = self.alpha.clone() * self.delta.clone();
        let w2 = w.clone() * w.clone();
        let w3 = w2.clone() * w.clone();
        let w4 = w3.clone() * w.clone();
        let g = self.gamma.clone();
        [
            self.alpha.clone() * x.clone() / w,
            ad.clone() / w2,
            -(ad.int(2) * ad.clone() * g.clone()) / w3,
            ad.int(6) * ad * g.clone() * g / w4,
        ]
    }

    pub fn inverse(&self, v: &T) -> T {
        self.delta.clone() * v.clone() / (self.alpha.clone() - self.gamma.clone() * v.clone())
    }

    /// `[τ^{-1}, (τ^{-1})', (τ^{-1})'', (τ^{-1})''']` at `v`.
    pub fn inverse_local(&self, v: &T) -> [T; 4] {
        let w = self.alpha.clone() - self.gamma.clone() * v.clone();
        let da = self.delta.clone() * self.alpha.clone();
        let w2 = w.clone() * w.clone();
        let w3 = w2.clone() * w.clone();
        let w4 = w3.clone() * w.clone();
        let g = self.gamma.clone();
        [
            self.delta.clone() * v.clone() / w,
            da.clone() / w2,
            da.int(2) * da.clone() * g.clone() / w3,
            da.int(6) * da * g.clone() * g / w4,
        ]
    }
}

/// Jet of `τ∘ζ∘τ^{-1}` at `v`, using `ξ` for `v < 0` and `η` otherwise.
fn conjugated_jet<T: Real>(p: &CommutingPair<T>, tau: &Moebius<T>, v: &T, order: u8) -> Jet<T> {
    let base = if order == 0 {
        Jet::value_only(v.clone())
    } else {
        Jet::variable(v.clone())
    };
    let u = base.compose_with(tau.inverse_local(v));
    let y = if v.is_negative() { (p.xi)(&u) } else { (p.eta)(&u) };
    let local = tau.local(&y.v);
    y.compose_with(local)
}

fn mesh<T: Real>(grid: usize, bits: u32) -> Vec<T> {
    let one = T::from_i64_at(1, bits);
    let zero = T::from_i64_at(0, bits);
    let mut pts = chebyshev_points(&(-one.clone()), &zero, grid);
    pts.extend(chebyshev_points(&zero, &one, grid));
    pts
}

/// `[‖·‖_0, …, ‖·‖_r]` of the difference of the conjugated pairs on the mesh.
fn mesh_norms<T: Real>(p1: &CommutingPair<T>, p2: &CommutingPair<T>, r: usize, grid: usize) -> Result<Vec<T>> {
    let t1 = Moebius::for_pair(p1)?;
    let t2 = Moebius::for_pair(p2)?;
    let bits = p1.xi0.precision().min(p2.xi0.precision());
    let order = if r == 0 { 0 } else { 3 };
    let mut worst = vec![T::from_i64_at(0, bits); r + 1];
    for v in mesh::<T>(grid, bits) {
        let a = conjugated_jet(p1, &t1, &v, order);
        let b = conjugated_jet(p2, &t2, &v, order);
        let mut d = (a.v - b.v).abs();
        worst[0] = worst[0].clone().max_of(d.clone());
        if r >= 1 {
            d = d.max_of((a.d1 - b.d1).abs());
            worst[1] = worst[1].clone().max_of(d.clone());
        }
        if r >= 2 {
            d = d.max_of((a.d2 - b.d2).abs());
            worst[2] = worst[2].clone().max_of(d);
        }
    }
    Ok(worst)
}

/// `d_0, …, d_r` on a shared mesh of `grid` Chebyshev points per side of 0,
/// doubled until every mesh maximum changes by less than 1% (at most four
/// doublings).
pub fn pseudo_distances<T: Real>(
    p1: &NormalizedPair<T>,
    p2: &NormalizedPair<T>,
    r: usize,
    grid: usize,
) -> Result<Vec<T>> {
    if grid < 64 {
        return Err(Error::InvalidArgument(format!("mesh of {grid} points is below the minimum of 64")));
    }
    if r > 2 {
        return Err(Error::InvalidArgument(format!("d_r is defined for r <= 2, got {r}")));
    }
    let (a, b) = (&p1.pair, &p2.pair);
    let ratio = (a.xi0.clone() / a.eta0.clone() - b.xi0.clone() / b.eta0.clone()).abs();
    let mut g = grid;
    let mut norms = mesh_norms(a, b, r, g)?;
    for _ in 0..4 {
        g *= 2;
        let next = mesh_norms(a, b, r, g)?;
        let settled = next
            .iter()
            .zip(&norms)
            .all(|(n, o)| (n.clone() - o.clone()).abs() <= n.cst(0.01) * n.clone());
        norms = next;
        if settled {
            break;
        }
    }
    Ok(norms.into_iter().map(|n| ratio.clone().max_of(n)).collect())
}

/// `d_r` alone; see [`pseudo_distances`].
pub fn pseudo_distance<T: Real>(p1: &NormalizedPair<T>, p2: &NormalizedPair<T>, r: usize, grid: usize) -> Result<T> {
    Ok(pseudo_distances(p1, p2, r, grid)?.swap_remove(r))
}

/// Sup of `|η_1 − η_2|` and `|ξ_1 − ξ_2|` over `grid` Chebyshev points of
/// the domains of the first pair.
pub fn branch_sup_difference<T: Real>(p1: &CommutingPair<T>, p2: &CommutingPair<T>, grid: usize) -> T {
    let zero = p1.xi0.clone() - p1.xi0.clone();
    let mut worst = zero.clone();
    for x in chebyshev_points(&zero, &p1.xi0, grid) {
        worst = worst.max_of((p1.eta(&x) - p2.eta(&x)).abs());
    }
    for x in chebyshev_points(&p1.eta0, &zero, grid) {
        worst = worst.max_of((p1.xi(&x) - p2.xi(&x)).abs());
    }
    worst
}

/// One inequality of the M-controlled checklist.
#[derive(Clone, Debug, Serialize)]
pub struct Condition {
    pub index: u8,
    pub applicable: bool,
    /// Smallest `M` for which this condition holds.
    pub required: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub m: f64,
    pub chi: usize,
    pub conditions: Vec<Condition>,
    /// Smallest `M` passing every applicable condition.
    pub m_star: f64,
}

impl ControlReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| !c.applicable || c.passed)
    }
}

fn inv<T: Real>(x: &T) -> f64 {
    if x.is_positive() {
        1.0 / x.to_f64()
    } else {
        f64::INFINITY
    }
}

fn c3_norm<T: Real>(j: &Jet<T>) -> T {
    j.v.abs().max_of(j.d1.abs()).max_of(j.d2.abs()).max_of(j.d3.abs())
}

/// Conditions (1)–(9) of the M-controlled definition on `grid` mesh
/// points. Mesh points within `2^{-P/4}` of `β` are skipped; (9) applies
/// when `β ∈ [η^a(ξ(0)), η(ξ(0))]`.
pub fn m_controlled_check<T: Real>(p: &NormalizedPair<T>, m: f64, grid: usize, cap: usize) -> Result<ControlReport> {
    let pair = &p.pair;
    pair.validate()?;
    let orbit = eta_orbit(pair, cap)?;
    let a = orbit.len() - 2;
    let xi0 = pair.xi0.clone();
    let bits = xi0.precision();
    let zero = T::from_i64_at(0, bits);
    let radius = T::exp2_at(-(bits as i32) / 4, bits);
    let near_beta = |x: &T| pair.beta.as_ref().is_some_and(|b| (x.clone() - b.clone()).abs() < radius);

    let mut req = Vec::with_capacity(9);
    req.push((1u8, true, (1.0 / xi0.to_f64()).max(xi0.to_f64())));
    req.push((2, true, inv(&(xi0.clone() - orbit[1].clone()))));
    let c3 = if a >= 1 {
        inv(&(orbit[a - 1].clone() - orbit[a].clone()))
    } else {
        f64::INFINITY
    };
    req.push((3, true, c3));
    req.push((4, true, inv(&orbit[a])));
    req.push((5, true, inv(&(-orbit[a + 1].clone()))));

    let xi_norm = chebyshev_points(&pair.eta0, &zero, grid)
        .iter()
        .map(|x| c3_norm(&pair.xi_jet(x)))
        .fold(zero.clone(), |acc, v| acc.max_of(v));
    req.push((6, true, xi_norm.to_f64()));
    let eta_norm = chebyshev_points(&zero, &xi0, grid)
        .iter()
        .filter(|x| !near_beta(x))
        .map(|x| c3_norm(&pair.eta_jet(x)))
        .fold(zero.clone(), |acc, v| acc.max_of(v));
    req.push((7, true, eta_norm.to_f64()));
    let min_d = chebyshev_points(&orbit[a], &xi0, grid)
        .iter()
        .filter(|x| !near_beta(x))
        .map(|x| pair.eta_jet(x).d1)
        .reduce(|acc, v| acc.min_of(v))
        .unwrap_or_else(|| zero.clone());
    req.push((8, true, inv(&min_d)));

    let ninth = match &pair.beta {
        Some(b) if *b >= orbit[a] && *b <= orbit[1] => {
            let forward = b.clone() - pair.eta(b);
            let pre = solve_increasing(
                |x: &T| {
                    let j = pair.eta_jet(x);
                    (j.v - b.clone(), j.d1)
                },
                &zero,
                &xi0,
            )?;
            let backward = pre - b.clone();
            (true, inv(&forward).max(inv(&backward)))
        }
        _ => (false, 0.0),
    };
    req.push((9, ninth.0, ninth.1));

    let m_star = req
        .iter()
        .filter(|c| c.1)
        .map(|c| c.2)
        .fold(1.0f64, f64::max);
    let conditions = req
        .into_iter()
        .map(|(index, applicable, required)| Condition {
            index,
            applicable,
            required,
            passed: required <= m,
        })
        .collect();
    Ok(ControlReport {
        m,
        chi: a,
        conditions,
        m_star,
    })
}

/// `d_r(R^n f, R^n g)` over `levels`, with the scaling-ratio sequence
/// `| |I_n|/|I_{n+1}| − |h(I_n)|/|h(I_{n+1})| |`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceProbe {
    pub distance: DecayReport,
    pub scaling: DecayReport,
}

pub fn convergence_probe<T, F, G>(
    f: &CriticalOrbit<T, F>,
    g: &CriticalOrbit<T, G>,
    levels: RangeInclusive<usize>,
    r: usize,
    grid: usize,
) -> Result<ConvergenceProbe>
where
    T: Real,
    F: CircleLift<T> + 'static,
    G: CircleLift<T> + 'static,
{
    let n_max = *levels.end();
    let need = n_max + 2;
    let (qf, qg) = (&f.comb.cf.quotients, &g.comb.cf.quotients);
    if qf.len() < need || qg.len() < need {
        return Err(Error::Combinatorics(format!(
            "probe to level {n_max} needs {need} partial quotients of both maps"
        )));
    }
    if let Some(k) = (0..need).find(|&k| qf[k] != qg[k]) {
        return Err(Error::Combinatorics(format!(
            "partial quotients differ at index {k}: {} vs {}",
            qf[k], qg[k]
        )));
    }
    let bits = f.precision().min(g.precision());
    let floor = 2f64.powi(24 - bits as i32);
    let mut dist = Vec::new();
    let mut scal = Vec::new();
    for n in levels {
        let pf = pair_at_level(f, n)?;
        let pg = pair_at_level(g, n)?;
        dist.push((n, pseudo_distance(&pf, &pg, r, grid)?.to_f64()));
        scal.push((n, (pf.s.clone() - pg.s.clone()).abs().to_f64()));
    }
    Ok(ConvergenceProbe {
        distance: DecayReport::new(format!("d{r}"), dist, 4, floor),
        scaling: DecayReport::new("scaling_ratio_gap", scal, 4, floor),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SchwarzianLevel {
    pub n: usize,
    /// Largest sampled `S(f^{q_{n+1}})` on `I_n`.
    pub max: f64,
    pub samples: usize,
    pub negative: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SchwarzianReport {
    pub levels: Vec<SchwarzianLevel>,
    /// Least tested level from which every tested level is negative.
    pub n1: Option<usize>,
}

/// Sign of `S(f^{q_{n+1}})` at `grid` Chebyshev points of `I_n(c)`,
/// skipping points within `2^{-P/4}|I_n|` of a critical preimage.
pub fn schwarzian_audit<T: Real, F: CircleLift<T>>(
    orb: &CriticalOrbit<T, F>,
    levels: RangeInclusive<usize>,
    grid: usize,
) -> Result<SchwarzianReport> {
    let bits = orb.precision();
    let zero = T::from_i64_at(0, bits);
    let mut out = Vec::new();
    for n in levels {
        orb.comb.require_level(n + 1)?;
        let e = orb.e(n).clone();
        let radius = T::exp2_at(-(bits as i32) / 4, bits) * e.abs();
        let mut avoid = vec![zero.clone()];
        if n <= orb.max_partition_level() {
            let c = free_critical_point(orb, n)?;
            if c.in_long {
                avoid.push(c.lift);
            }
        }
        let q = orb.q(n + 1);
        let mut worst = f64::NEG_INFINITY;
        let mut samples = 0;
        for x in chebyshev_points(&zero, &e, grid) {
            if avoid.iter().any(|c| (x.clone() - c.clone()).abs() < radius) {
                continue;
            }
            let j = orb.map.iterate_jet(&Jet::variable(x), q);
            match schwarzian_from(&j.d1, &j.d2, &j.d3) {
                Ok(s) => {
                    worst = worst.max(s.to_f64());
                    samples += 1;
                }
                Err(Error::CriticalPoint) => continue,
                Err(e) => return Err(e),
            }
        }
        out.push(SchwarzianLevel {
            n,
            max: worst,
            samples,
            negative: samples > 0 && worst < 0.0,
        });
    }
    let n1 = out
        .iter()
        .rposition(|l| !l.negative)
        .map_or_else(|| out.first().map(|l| l.n), |k| out.get(k + 1).map(|l| l.n));
    Ok(SchwarzianReport { levels: out, n1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{BiCriticalMap, RigidRotation};

    fn toy() -> CommutingPair<f64> {
        CommutingPair {
            eta: Arc::new(|u: &Jet<f64>| u.shift(&-1.5)),
            xi: Arc::new(|u: &Jet<f64>| u.shift(&1.0)),
            eta0: -1.5,
            xi0: 1.0,
            beta: None,
            beta_xi: None,
            level: 0,
            orientation: 1,
        }
    }

    #[test]
    fn translation_toy_crosses_in_one_step() {
        assert_eq!(crossing_count(&toy(), 10).unwrap(), 1);
        assert_eq!(chi(&toy(), 10).unwrap(), 0);
    }

    #[test]
    fn fixed_point_means_infinite_period() {
        let mut p = toy();
        p.eta = Arc::new(|u: &Jet<f64>| u.affine(&0.5, &0.25));
        assert_eq!(crossing_count(&p, 100).unwrap_err(), Error::PeriodInfinite);
    }

    #[test]
    fn chi_cap_reports_partial_count() {
        let mut p = toy();
        p.eta = Arc::new(|u: &Jet<f64>| u.shift(&-1e-3));
        assert_eq!(crossing_count(&p, 10).unwrap_err(), Error::ChiCap { cap: 10, partial: 10 });
    }

    #[test]
    fn moebius_interpolates() {
        let t = Moebius::new(&-1.0, &1.0).unwrap();
        for x in [-0.7, 0.0, 0.3, 1.0] {
            assert!((t.eval(&x) - x).abs() < 1e-15);
        }
        let t = Moebius::new(&-2.0, &1.0).unwrap();
        assert_eq!(t.eval(&-2.0), -1.0);
        assert_eq!(t.eval(&0.0), 0.0);
        assert_eq!(t.eval(&1.0), 1.0);
        // 3x / (4 - x)
        assert!((t.eval(&0.5) - 1.5 / 3.5).abs() < 1e-15);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=30 {
            let x = -2.0 + 3.0 * k as f64 / 30.0;
            assert!(t.eval(&x) > prev);
            prev = t.eval(&x);
        }
        assert!(Moebius::new(&1.0, &1.0).is_err());
    }

    #[test]
    fn moebius_inverse_and_derivatives() {
        let t = Moebius::new(&-0.8, &1.7).unwrap();
        for x in [-0.5, 0.2, 1.1] {
            assert!((t.inverse(&t.eval(&x)) - x).abs() < 1e-14);
            let h = 1e-5;
            let fd = (t.eval(&(x + h)) - t.eval(&(x - h))) / (2.0 * h);
            assert!((t.local(&x)[1] - fd).abs() < 1e-8);
            let fd2 = (t.local(&(x + h))[1] - t.local(&(x - h))[1]) / (2.0 * h);
            assert!((t.local(&x)[2] - fd2).abs() < 1e-7);
            let fd3 = (t.local(&(x + h))[2] - t.local(&(x - h))[2]) / (2.0 * h);
            assert!((t.local(&x)[3] - fd3).abs() < 1e-6);
            let v = t.eval(&x);
            let id = t.inverse_local(&v)[1] * t.local(&x)[1];
            assert!((id - 1.0).abs() < 1e-13);
            let fdi = (t.inverse_local(&(v + h))[2] - t.inverse_local(&(v - h))[2]) / (2.0 * h);
            assert!((t.inverse_local(&v)[3] - fdi).abs() < 1e-6);
        }
    }

    #[test]
    fn rotation_pairs_have_period_one_steps() {
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        let orb = critical_orbit(RigidRotation::new(rho), 0, 12, 1 << 20).unwrap();
        for n in 1..8 {
            let p = pair_at_level(&orb, n).unwrap();
            assert_eq!(p.pair.eta0, -1.0);
            assert_eq!(chi(&p.pair, 100).unwrap(), 1);
            assert!(p.pair.commutation_residual() < 1e-9);
            assert!(p.pair.laterally_matched());
        }
    }

    #[test]
    fn distance_to_self_is_zero() {
        let f = BiCriticalMap::arnold_bicritical(0.3f64).unwrap();
        let orb = critical_orbit(f, 0, 4, 1 << 20).unwrap();
        let p = pair_at_level(&orb, 1).unwrap();
        for r in 0..=2 {
            assert_eq!(pseudo_distance(&p, &p, r, 64).unwrap(), 0.0);
        }
        assert!(pseudo_distance(&p, &p, 0, 32).is_err());
    }
}
