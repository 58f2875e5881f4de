//! Near-tangency regions of a renormalization, tubular coordinates and the
//! funnel/tunnel asymptotics of the parabolic passage.
//!
//! `R^n f` is the long branch of the pair rescaled to `[0, 1]`:
//! `R(z) = η(ξ(0) z) / ξ(0)`, so `z = 1` is `f^{q_n}(c_0)`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::maps::CircleLift;
use crate::numerics::{solve_increasing, Real};
use crate::partitions::bridge_counts;
use crate::renorm::{pair_at_level, Branch, NormalizedPair};
use crate::rotation::CriticalOrbit;

/// Default mesh used to locate tubular components.
pub const DEFAULT_TUBULAR_GRID: usize = 2048;

/// Bisection steps used to refine component boundaries.
const BOUNDARY_STEPS: usize = 80;

/// `R^n f` on `[0, 1]` and its critical point there, if any.
#[derive(Clone)]
pub struct RenormalizedMap<T> {
    pub level: usize,
    pub bits: u32,
    map: Branch<T>,
    /// Critical point in `(0, 1)`.
    pub beta: Option<T>,
}

impl<T: Real> RenormalizedMap<T> {
    pub fn from_pair(p: &NormalizedPair<T>) -> Self {
        let s = p.pair.xi0.clone();
        let zero = s.clone() - s.clone();
        let eta = p.pair.eta.clone();
        let scale = s.clone();
        let map: Branch<T> = Arc::new(move |u: &Jet<T>| eta(&u.affine(&scale, &zero)).div_scalar(&scale));
        RenormalizedMap {
            level: p.pair.level,
            bits: s.precision(),
            map,
            beta: p.pair.beta.clone().map(|b| b / s),
        }
    }

    /// Any increasing map of `[0, 1]` given on jets, with optional critical point.
    pub fn from_branch(map: Branch<T>, beta: Option<T>, bits: u32) -> Self {
        RenormalizedMap {
            level: 0,
            bits,
            map,
            beta,
        }
    }

    pub fn eval(&self, z: &T) -> T {
        (self.map)(&Jet::value_only(z.clone())).v
    }

    pub fn jet(&self, z: &T) -> Jet<T> {
        (self.map)(&Jet::variable(z.clone()))
    }

    /// `R^{-1}(y)` on `[0, 1]`.
    pub fn inverse(&self, y: &T) -> Result<T> {
        let zero = T::from_i64_at(0, self.bits);
        let one = T::from_i64_at(1, self.bits);
        solve_increasing(
            |x: &T| {
                let j = self.jet(x);
                (j.v - y.clone(), j.d1)
            },
            &zero,
            &one,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterSide {
    /// In `[R^{-1}(β), 1]`; also used when there is no critical point.
    Z,
    /// In `[0, R(β)]`.
    W,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Center<T> {
    pub point: T,
    pub side: CenterSide,
    /// `z − R(z)`.
    pub gap: T,
    pub d1: T,
    pub d2: T,
}

#[derive(Clone, Debug)]
pub struct TubularSet<T> {
    pub level: usize,
    pub l: u64,
    /// Open arcs of `[0, 1]` where `z − R(z) < 1/L`.
    pub components: Vec<(T, T)>,
    pub centers: Vec<Center<T>>,
}

impl<T: Real> TubularSet<T> {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn center(&self, side: CenterSide) -> Option<&Center<T>> {
        self.centers.iter().find(|c| c.side == side)
    }
}

/// `max(2, ⌈a/2⌉)`.
pub fn auto_l(a_next: u64) -> u64 {
    a_next.div_ceil(2).max(2)
}

fn bisect<T: Real>(g: impl Fn(&T) -> T, lo: &T, hi: &T) -> T {
    let half = lo.cst(0.5);
    let (mut lo, mut hi) = (lo.clone(), hi.clone());
    let lo_neg = g(&lo).is_negative();
    for _ in 0..BOUNDARY_STEPS {
        let mid = (lo.clone() + hi.clone()) * half.clone();
        if g(&mid).is_negative() == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}

/// `{z ∈ [0, 1] : z − R(z) < 1/L}` on a uniform mesh of `grid` cells, with
/// boundaries refined by bisection and centers solved from `DR = 1`.
pub fn tubular_set<T: Real>(map: &RenormalizedMap<T>, l: u64, grid: usize) -> Result<TubularSet<T>> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    if grid < 16 {
        return Err(Error::InvalidArgument(format!("mesh of {grid} cells is too coarse")));
    }
    let bits = map.bits;
    let inv_l = T::from_i64_at(1, bits) / T::from_i64_at(l as i64, bits);
    let g = |z: &T| z.clone() - map.eval(z) - inv_l.clone();
    let n = T::from_i64_at(grid as i64, bits);
    let mesh: Vec<T> = (0..=grid).map(|k| T::from_i64_at(k as i64, bits) / n.clone()).collect();
    let inside: Vec<bool> = mesh.iter().map(|z| g(z).is_negative()).collect();

    let mut components = Vec::new();
    let mut k = 0;
    while k <= grid {
        if !inside[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < grid && inside[k + 1] {
            k += 1;
        }
        let lo = if start == 0 {
            mesh[0].clone()
        } else {
            bisect(&g, &mesh[start - 1], &mesh[start])
        };
        let hi = if k == grid {
            mesh[grid].clone()
        } else {
            bisect(&g, &mesh[k], &mesh[k + 1])
        };
        components.push((lo, hi, start, k));
        k += 1;
    }

    let mut centers: Vec<Center<T>> = Vec::new();
    for (lo, hi, a, b) in &components {
        let mut pts = vec![lo.clone()];
        pts.extend(mesh[*a..=*b].iter().cloned());
        pts.push(hi.clone());
        let d1: Vec<T> = pts.iter().map(|z| map.jet(z).d1).collect();
        let one = T::from_i64_at(1, bits);
        for w in 0..pts.len() - 1 {
            if !(d1[w] > one && d1[w + 1] <= one) {
                continue;
            }
            let z = solve_increasing(
                |x: &T| {
                    let j = map.jet(x);
                    (one.clone() - j.d1, -j.d2)
                },
                &pts[w],
                &pts[w + 1],
            )?;
            let j = map.jet(&z);
            let side = match &map.beta {
                Some(b) if z < *b => CenterSide::W,
                _ => CenterSide::Z,
            };
            let c = Center {
                gap: z.clone() - j.v.clone(),
                point: z,
                side,
                d1: j.d1,
                d2: j.d2,
            };
            match centers.iter_mut().find(|o| o.side == side) {
                Some(o) if o.gap > c.gap => *o = c,
                Some(_) => {}
                None => centers.push(c),
            }
        }
    }
    Ok(TubularSet {
        level: map.level,
        l,
        components: components.into_iter().map(|(lo, hi, _, _)| (lo, hi)).collect(),
        centers,
    })
}

/// `𝓕 = φ∘R∘φ^{-1}`, `φ(x) = D²R(z)(x − z)/2`, on the monotone arc
/// containing the center.
#[derive(Clone)]
pub struct TubularChart<T> {
    pub center: T,
    pub d2: T,
    /// `𝓕(0)`. Positive: the passage runs left to right in the chart.
    pub eps: T,
    /// Chart-coordinate domain, `lo < hi`.
    pub domain: (T, T),
    /// `|𝓕'(0) − 1|`.
    pub residual_d1: T,
    /// `|𝓕''(0) − 2|`.
    pub residual_d2: T,
    map: Branch<T>,
}

impl<T: Real> std::fmt::Debug for TubularChart<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TubularChart")
            .field("center", &self.center)
            .field("d2", &self.d2)
            .field("eps", &self.eps)
            .field("domain", &self.domain)
            .field("residual_d1", &self.residual_d1)
            .field("residual_d2", &self.residual_d2)
            .finish()
    }
}

impl<T: Real> TubularChart<T> {
    /// Chart of `map` at `center`. The domain is `[R^{-1}(β), 1]` for a `Z`
    /// center and `[0, R(β)]` for a `W` center, `[0, 1]` without `β`.
    pub fn new(map: &RenormalizedMap<T>, center: &Center<T>) -> Result<Self> {
        let z = center.point.clone();
        let j = map.jet(&z);
        if !j.d2.is_negative() {
            return Err(Error::Degenerate(format!(
                "D²R = {} at the center is not negative",
                j.d2.to_f64()
            )));
        }
        let bits = map.bits;
        let zero = T::from_i64_at(0, bits);
        let one = T::from_i64_at(1, bits);
        let (a, b) = match (&map.beta, center.side) {
            (Some(beta), CenterSide::Z) => (map.inverse(beta)?, one),
            (Some(beta), CenterSide::W) => (zero, map.eval(beta)),
            (None, _) => (zero, one),
        };
        let k = j.d2.clone() / T::from_i64_at(2, bits);
        let (inner, zc, kk) = (map.map.clone(), z.clone(), k.clone());
        let chart: Branch<T> = Arc::new(move |u: &Jet<T>| {
            let x = u.div_scalar(&kk).shift(&zc);
            let y = inner(&x);
            y.shift(&(-zc.clone())).affine(&kk, &(zc.clone() - zc.clone()))
        });
        let phi = |x: &T| k.clone() * (x.clone() - z.clone());
        let (pa, pb) = (phi(&a), phi(&b));
        let domain = if pa <= pb { (pa, pb) } else { (pb, pa) };
        Self::assemble(z, j.d2, chart, domain)
    }

    /// A map already in tubular coordinates, such as `x ↦ ε + x + x²`.
    pub fn from_model(map: Branch<T>, domain: (T, T)) -> Result<Self> {
        let bits = domain.0.precision();
        Self::assemble(T::from_i64_at(0, bits), T::from_i64_at(2, bits), map, domain)
    }

    fn assemble(center: T, d2: T, map: Branch<T>, domain: (T, T)) -> Result<Self> {
        if domain.0 >= domain.1 {
            return Err(Error::Precondition("empty chart domain".into()));
        }
        let bits = domain.0.precision();
        let at0 = map(&Jet::variable(T::from_i64_at(0, bits)));
        Ok(TubularChart {
            center,
            d2,
            eps: at0.v.clone(),
            domain,
            residual_d1: (at0.d1 - T::from_i64_at(1, bits)).abs(),
            residual_d2: (at0.d2 - T::from_i64_at(2, bits)).abs(),
            map,
        })
    }

    /// `φ(x)` for a point `x` of `[0, 1]`; identity for models.
    pub fn phi(&self, x: &T) -> T {
        self.d2.clone() / self.d2.int(2) * (x.clone() - self.center.clone())
    }

    pub fn phi_inverse(&self, y: &T) -> T {
        y.clone() * self.d2.int(2) / self.d2.clone() + self.center.clone()
    }

    pub fn eval(&self, x: &T) -> T {
        (self.map)(&Jet::value_only(x.clone())).v
    }

    pub fn jet(&self, x: &T) -> Jet<T> {
        (self.map)(&Jet::variable(x.clone()))
    }

    pub fn contains(&self, x: &T) -> bool {
        *x >= self.domain.0 && *x <= self.domain.1
    }

    /// `𝓕^{-1}(y)` when `y ∈ 𝓕(domain)`.
    pub fn inverse(&self, y: &T) -> Option<T> {
        let (lo, hi) = &self.domain;
        if *y < self.eval(lo) || *y > self.eval(hi) {
            return None;
        }
        solve_increasing(
            |x: &T| {
                let j = self.jet(x);
                (j.v - y.clone(), j.d1)
            },
            lo,
            hi,
        )
        .ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Funnel,
    Tunnel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceOptions {
    /// Funnel when `|x|^{2+α} > C₀ |ε|`.
    pub c0: f64,
    pub alpha: f64,
    pub max_iter: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            c0: 1.0,
            alpha: 1.0,
            max_iter: 1 << 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParabolicTrace<T> {
    pub direction: Direction,
    pub s: Vec<T>,
    pub regimes: Vec<Regime>,
    /// `C₀ |ε|`.
    pub threshold: f64,
    /// Least index with `s ∈ (0, ε]`.
    pub i_c: Option<usize>,
    /// Last funnel index before the tunnel on the side the trace starts.
    pub entry: Option<usize>,
    /// First funnel index after the tunnel.
    pub exit: Option<usize>,
    /// `true` when the orbit left the chart domain.
    pub escaped: bool,
}

impl<T: Real> ParabolicTrace<T> {
    /// Left funnel edge: `i_ℓ` forward, `î_ℓ` backward.
    pub fn i_left(&self) -> Option<usize> {
        match self.direction {
            Direction::Forward => self.entry,
            Direction::Backward => self.exit,
        }
    }

    /// Right funnel edge: `i_r` forward, `î_r` backward.
    pub fn i_right(&self) -> Option<usize> {
        match self.direction {
            Direction::Forward => self.exit,
            Direction::Backward => self.entry,
        }
    }

    pub fn funnel_count(&self) -> usize {
        self.regimes.iter().filter(|r| **r == Regime::Funnel).count()
    }

    /// The first funnel run oriented as a positive decreasing sequence,
    /// ready for [`funnel_bound_check`].
    pub fn entry_funnel(&self) -> Vec<T> {
        let end = self.entry.map_or(0, |e| e + 1);
        self.s[..end]
            .iter()
            .map(|x| match self.direction {
                Direction::Forward => -x.clone(),
                Direction::Backward => x.clone(),
            })
            .collect()
    }
}

/// Orbit of `start` under `𝓕` or `𝓕^{-1}` until it leaves the chart domain.
pub fn trace_parabolic<T: Real>(
    chart: &TubularChart<T>,
    start: &T,
    direction: Direction,
    opts: &TraceOptions,
) -> Result<ParabolicTrace<T>> {
    if !chart.contains(start) {
        return Err(Error::Precondition("trace start lies outside the chart domain".into()));
    }
    let eps = chart.eps.abs();
    let threshold = opts.c0 * eps.to_f64();
    let regime = |x: &T| {
        if x.to_f64().abs().powf(2.0 + opts.alpha) > threshold {
            Regime::Funnel
        } else {
            Regime::Tunnel
        }
    };
    let mut s = vec![start.clone()];
    let mut escaped = false;
    while s.len() <= opts.max_iter {
        let x = s.last().unwrap();
        let next = match direction {
            Direction::Forward => Some(chart.eval(x)),
            Direction::Backward => chart.inverse(x),
        };
        match next {
            Some(y) if chart.contains(&y) => s.push(y),
            _ => {
                escaped = true;
                break;
            }
        }
    }
    let regimes: Vec<Regime> = s.iter().map(&regime).collect();
    let i_c = s.iter().position(|x| x.is_positive() && *x <= eps);
    let first_tunnel = regimes.iter().position(|r| *r == Regime::Tunnel);
    let entry = first_tunnel.and_then(|t| t.checked_sub(1));
    let exit = regimes
        .iter()
        .rposition(|r| *r == Regime::Tunnel)
        .map(|t| t + 1)
        .filter(|&t| t < s.len());
    Ok(ParabolicTrace {
        direction,
        s,
        regimes,
        threshold,
        i_c,
        entry,
        exit,
        escaped,
    })
}

/// `s_0, …, s_n` under `step`.
pub fn model_orbit<T: Real>(s0: T, n: usize, step: impl Fn(&T) -> T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    for _ in 0..n {
        let next = step(out.last().unwrap());
        out.push(next);
    }
    out
}

fn pow_f<T: Real>(x: &T, e: f64) -> T {
    (x.ln() * x.cst(e)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunnelReport {
    pub points: usize,
    pub alpha: f64,
    /// Max of `|s_i − 1/(i + 1/s_0)| (i + 1/s_0)^{1+α}`.
    pub d1: f64,
    /// Same maximum over the first half only.
    pub d1_first_half: f64,
    /// Maximum over the second half.
    pub second_half: f64,
    /// Max `|δ_i|` in `s_i − s_{i+1} = (1 + δ_i)/(i + 1/s_0)²`.
    pub max_delta: f64,
}

impl FunnelReport {
    /// The constant fitted on the first half also bounds the second half,
    /// up to a factor 2.
    pub fn split_consistent(&self) -> bool {
        self.second_half <= 2.0 * self.d1_first_half
    }
}

/// Residuals of a positive funnel sequence against `1/(i + 1/s_0)`.
pub fn funnel_bound_check<T: Real>(s: &[T], alpha: f64) -> Result<FunnelReport> {
    if s.len() < 10 {
        return Err(Error::Precondition(format!(
            "funnel check needs at least 10 points, got {}",
            s.len()
        )));
    }
    if !s[0].is_positive() {
        return Err(Error::Precondition("funnel sequence must start positive".into()));
    }
    let c = T::one() / s[0].clone();
    let mut res = Vec::with_capacity(s.len());
    let mut max_delta = 0f64;
    for (i, x) in s.iter().enumerate() {
        let t = c.clone() + x.int(i as i64);
        let model = T::one() / t.clone();
        res.push(((x.clone() - model).abs() * pow_f(&t, 1.0 + alpha)).to_f64());
        if let Some(y) = s.get(i + 1) {
            let delta = (x.clone() - y.clone()) * t.clone() * t - T::one();
            max_delta = max_delta.max(delta.abs().to_f64());
        }
    }
    let half = s.len() / 2;
    let fold = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    Ok(FunnelReport {
        points: s.len(),
        alpha,
        d1: fold(&res),
        d1_first_half: fold(&res[..half]),
        second_half: fold(&res[half..]),
        max_delta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TunnelReport {
    pub eps: f64,
    /// `N = ε^{-1/2} atan(C₃ ε^{-α/(2(2+α))})`.
    pub n_bound: f64,
    /// `B = ε^{-1/2} atan(ε^{-1/6})`; equals `N` when `α = 1`, `C₃ = 1`.
    pub b_bound: f64,
    pub checked: usize,
    /// Indices beyond `N`.
    pub excluded: usize,
    /// `(i, |s_i / model_i − 1|)` for `1 <= i <= N`.
    pub relative_errors: Vec<(usize, f64)>,
    /// Max of `|s_i − model_i| / (√ε tan √ε i)^{1 + α(α+1)/2}`.
    pub d3: f64,
    /// Max `|δ_i|` in `s_{i+1} − s_i = ε(1 + δ_i)/cos²(√ε i)`.
    pub max_delta: f64,
}

impl TunnelReport {
    pub fn max_relative_error_upto(&self, i_max: f64) -> f64 {
        self.relative_errors
            .iter()
            .filter(|(i, _)| (*i as f64) <= i_max)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

/// Compare `s_i` with `√ε tan(√ε i + atan(s_0/√ε))` for `i <= N`.
pub fn tunnel_bound_check<T: Real>(s: &[T], eps: &T, alpha: f64, c3: f64) -> Result<TunnelReport> {
    if !eps.is_positive() || *eps >= T::one() {
        return Err(Error::Precondition(format!("ε = {} outside (0, 1)", eps.to_f64())));
    }
    if s.is_empty() {
        return Err(Error::Precondition("empty tunnel sequence".into()));
    }
    let root = eps.sqrt();
    let ef = eps.to_f64();
    let n_bound = (c3 * ef.powf(-alpha / (2.0 * (2.0 + alpha)))).atan() / ef.sqrt();
    let phase = (s[0].clone() / root.clone()).atan();
    let power = 1.0 + alpha * (alpha + 1.0) / 2.0;
    let mut relative_errors = Vec::new();
    let (mut d3, mut max_delta, mut excluded) = (0f64, 0f64, 0usize);
    for (i, x) in s.iter().enumerate() {
        if i as f64 > n_bound {
            excluded += 1;
            continue;
        }
        let ti = root.clone() * x.int(i as i64);
        let model = root.clone() * (ti.clone() + phase.clone()).tan();
        if i >= 1 {
            let diff = (x.clone() - model.clone()).abs();
            relative_errors.push((i, (diff.clone() / model.abs()).to_f64()));
            let scale = root.clone() * ti.tan();
            if scale.is_positive() {
                d3 = d3.max((diff / pow_f(&scale, power)).to_f64());
            }
        }
        if let Some(y) = s.get(i + 1) {
            let c = ti.cos();
            let delta = (y.clone() - x.clone()) * c.clone() * c / eps.clone() - T::one();
            max_delta = max_delta.max(delta.abs().to_f64());
        }
    }
    Ok(TunnelReport {
        eps: ef,
        n_bound,
        b_bound: (ef.powf(-1.0 / 6.0)).atan() / ef.sqrt(),
        checked: relative_errors.len(),
        excluded,
        relative_errors,
        d3,
        max_delta,
    })
}

/// Steps of `s ↦ ε + s + s²` from `−a` until `s > a`.
pub fn riccati_crossing_time<T: Real>(eps: &T, a: &T, cap: usize) -> Result<usize> {
    let mut s = -a.clone();
    for k in 0..cap {
        if s > *a {
            return Ok(k);
        }
        s = eps.clone() + s.clone() + s.clone() * s;
    }
    Err(Error::Budget {
        what: "Riccati crossing".into(),
        required: cap as u64 + 1,
        budget: cap as u64,
    })
}

/// Forward trace from `φ(1)`, backward trace from `φ(R^{-1}(β))` and the
/// parameters the tunnel bounds compare.
#[derive(Clone)]
pub struct TubularAnalysis<T> {
    pub level: usize,
    pub l: u64,
    pub set: TubularSet<T>,
    pub chart: TubularChart<T>,
    pub forward: ParabolicTrace<T>,
    pub backward: ParabolicTrace<T>,
}

impl<T: Real> std::fmt::Debug for TubularAnalysis<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TubularAnalysis")
            .field("level", &self.level)
            .field("l", &self.l)
            .field("set", &self.set)
            .field("chart", &self.chart)
            .field("forward", &self.forward)
            .field("backward", &self.backward)
            .finish()
    }
}

/// Tubular set, `Z` chart and both traces of `R^m f`.
pub fn analyze_level<T: Real, F: CircleLift<T> + 'static>(
    orb: &CriticalOrbit<T, F>,
    m: usize,
    l: Option<u64>,
    grid: usize,
    opts: &TraceOptions,
) -> Result<TubularAnalysis<T>> {
    let pair = pair_at_level(orb, m)?;
    let map = RenormalizedMap::from_pair(&pair);
    let l = l.unwrap_or_else(|| auto_l(orb.a(m + 1)));
    let set = tubular_set(&map, l, grid)?;
    let center = set
        .center(CenterSide::Z)
        .ok_or_else(|| Error::Precondition(format!("no Z center at level {m} with L = {l}")))?
        .clone();
    let chart = TubularChart::new(&map, &center)?;
    let bits = orb.precision();
    let one = T::from_i64_at(1, bits);
    let start_f = clamp(&chart, chart.phi(&one));
    let back_from = match &map.beta {
        Some(b) => map.inverse(b)?,
        None => T::from_i64_at(0, bits),
    };
    let start_b = clamp(&chart, chart.phi(&back_from));
    let forward = trace_parabolic(&chart, &start_f, Direction::Forward, opts)?;
    let backward = trace_parabolic(&chart, &start_b, Direction::Backward, opts)?;
    Ok(TubularAnalysis {
        level: m,
        l,
        set,
        chart,
        forward,
        backward,
    })
}

fn clamp<T: Real>(chart: &TubularChart<T>, x: T) -> T {
    x.max_of(chart.domain.0.clone()).min_of(chart.domain.1.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct ParameterRelations {
    pub level: usize,
    pub r: u64,
    /// `r >= threshold`.
    pub r_sufficient: bool,
    pub eps: f64,
    /// `2 r √ε / π`.
    pub crossing_ratio: f64,
    /// `ε^{(α−1)/2}`, the scale of the tunnel defects.
    pub predicted_scale: f64,
    pub i_c: Option<usize>,
    pub i_c_hat: Option<usize>,
    pub i_c_gap: Option<i64>,
    pub i_c_hat_gap: Option<i64>,
    pub eps_g: Option<f64>,
    /// `ε_g / ε_f`.
    pub eps_ratio: Option<f64>,
    /// `(name, |i_κ − j_κ|)` for `κ ∈ {c, r, ℓ}` and hatted versions.
    pub landmark_gaps: Vec<(String, Option<i64>)>,
}

fn gap(a: Option<usize>, b: Option<usize>) -> Option<i64> {
    Some((a? as i64 - b? as i64).abs())
}

/// Measured counterparts of the tubular parameter estimates at level `m`
/// of `f` and, optionally, of `g`.
pub fn parameter_relations<T, F, G>(
    f: &CriticalOrbit<T, F>,
    g: Option<&CriticalOrbit<T, G>>,
    m: usize,
    grid: usize,
    opts: &TraceOptions,
    r_threshold: u64,
) -> Result<ParameterRelations>
where
    T: Real,
    F: CircleLift<T> + 'static,
    G: CircleLift<T> + 'static,
{
    let r = bridge_counts(f, m)?.r;
    let fa = analyze_level(f, m, None, grid, opts)?;
    let eps = fa.chart.eps.to_f64();
    let alpha = opts.alpha;
    let mut report = ParameterRelations {
        level: m,
        r,
        r_sufficient: r >= r_threshold,
        eps,
        crossing_ratio: 2.0 * r as f64 * eps.sqrt() / std::f64::consts::PI,
        predicted_scale: eps.powf((alpha - 1.0) / 2.0),
        i_c: fa.forward.i_c,
        i_c_hat: fa.backward.i_c,
        i_c_gap: fa.forward.i_c.map(|i| (i as i64 - r as i64).abs()),
        i_c_hat_gap: fa.backward.i_c.map(|i| (i as i64 - r as i64).abs()),
        eps_g: None,
        eps_ratio: None,
        landmark_gaps: Vec::new(),
    };
    if let Some(g) = g {
        let ga = analyze_level(g, m, Some(fa.l), grid, opts)?;
        let eg = ga.chart.eps.to_f64();
        report.eps_g = Some(eg);
        report.eps_ratio = Some(eg / eps);
        report.landmark_gaps = vec![
            ("c".into(), gap(fa.forward.i_c, ga.forward.i_c)),
            ("r".into(), gap(fa.forward.i_right(), ga.forward.i_right())),
            ("l".into(), gap(fa.forward.i_left(), ga.forward.i_left())),
            ("c_hat".into(), gap(fa.backward.i_c, ga.backward.i_c)),
            ("r_hat".into(), gap(fa.backward.i_right(), ga.backward.i_right())),
            ("l_hat".into(), gap(fa.backward.i_left(), ga.backward.i_left())),
        ];
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> RenormalizedMap<f64> {
        RenormalizedMap::from_branch(
            Arc::new(|u: &Jet<f64>| {
                let d = u.shift(&-0.5);
                let sq = Jet::new(d.v * d.v, 2.0 * d.v * d.d1, 2.0 * (d.d1 * d.d1 + d.v * d.d2), 0.0);
                let mut out = u.clone();
                out.v = u.v - sq.v - 0.001;
                out.d1 = u.d1 - sq.d1;
                out.d2 = u.d2 - sq.d2;
                out.d3 = u.d3 - 6.0 * d.d1 * d.d2 - 2.0 * d.v * d.d3;
                out
            }),
            None,
            53,
        )
    }

    #[test]
    fn toy_parabola_has_center_at_half() {
        let set = tubular_set(&toy(), 100, 256).unwrap();
        assert_eq!(set.components.len(), 1);
        let (lo, hi) = set.components[0];
        // z − F(z) = (z − 1/2)² + 0.001 < 0.01
        assert!((lo - (0.5 - 0.009f64.sqrt())).abs() < 1e-12);
        assert!((hi - (0.5 + 0.009f64.sqrt())).abs() < 1e-12);
        let c = set.center(CenterSide::Z).unwrap();
        assert_eq!(c.point, 0.5);
        assert!((c.gap - 0.001).abs() < 1e-15);
    }

    #[test]
    fn toy_chart_is_normalized() {
        let map = toy();
        let set = tubular_set(&map, 100, 256).unwrap();
        let chart = TubularChart::new(&map, set.center(CenterSide::Z).unwrap()).unwrap();
        // φ(x) = −(x − 1/2), 𝓕(0) = −(F(1/2) − 1/2) = 0.001
        assert!((chart.eps - 0.001).abs() < 1e-15);
        assert!(chart.residual_d1 < 1e-15 && chart.residual_d2 < 1e-15);
        for x in [0.1, 0.37, 0.9] {
            assert!((chart.phi_inverse(&chart.phi(&x)) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_set_is_legal() {
        let set = tubular_set(&toy(), 2000, 256).unwrap();
        assert!(set.is_empty());
        assert!(set.centers.is_empty());
    }

    #[test]
    fn model_trace_follows_recurrence() {
        let eps = -1e-4f64;
        let model: Branch<f64> = Arc::new(move |u: &Jet<f64>| {
            let sq = Jet::new(u.v * u.v, 2.0 * u.v * u.d1, 2.0 * (u.d1 * u.d1 + u.v * u.d2), 0.0);
            Jet::new(eps + u.v + sq.v, u.d1 + sq.d1, u.d2 + sq.d2, 0.0)
        });
        let chart = TubularChart::from_model(model, (-1.0, 1.0)).unwrap();
        assert_eq!(chart.eps, eps);
        let t = trace_parabolic(&chart, &0.05, Direction::Forward, &TraceOptions::default()).unwrap();
        let mut x = 0.05f64;
        for s in &t.s {
            assert_eq!(*s, x);
            x = eps + x + x * x;
        }
        // 0.05 lies above the repelling fixed point √|ε|
        assert!(t.escaped);
        assert!(*t.s.last().unwrap() > 0.5);
    }

    #[test]
    fn mobius_model_is_exact() {
        let s = model_orbit(0.01f64, 1000, |s| s / (1.0 + s));
        let r = funnel_bound_check(&s, 1.0).unwrap();
        assert!(r.d1 < 1e-8);
        assert!(funnel_bound_check(&s[..5], 1.0).is_err());
    }

    #[test]
    fn riccati_gap_identity() {
        // for s_i = √ε tan(√ε i): δ_i = (sin √ε / √ε) cos(√ε i)/cos(√ε(i+1)) − 1
        let eps = 1e-6f64;
        let r = eps.sqrt();
        let s: Vec<f64> = (0..1000).map(|i| r * (r * i as f64).tan()).collect();
        let rep = tunnel_bound_check(&s, &eps, 1.0, 1.0).unwrap();
        let expected = (0..999)
            .map(|i| ((r.sin() / r) * (r * i as f64).cos() / (r * (i + 1) as f64).cos() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!((rep.max_delta - expected).abs() < 1e-9);
        assert!(rep.max_relative_error_upto(1e9) < 1e-9);
        assert!((rep.b_bound - rep.n_bound).abs() < 1e-9 * rep.n_bound);
    }

    #[test]
    fn auto_l_rule() {
        assert_eq!(auto_l(1), 2);
        assert_eq!(auto_l(30), 15);
        assert_eq!(auto_l(31), 16);
    }
}
