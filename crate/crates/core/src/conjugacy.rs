//! The combinatorial conjugacy between two maps with the same rotation
//! number, the signature of a map, and the decay audits built on matched
//! two-bridges partitions.

use serde::Serialize;

use crate::decay::DecayReport;
use crate::error::{Error, Result};
use crate::maps::CircleLift;
use crate::numerics::Real;
use crate::partitions::{two_bridges_sequence, Partition, Provenance, TwoBridgesPartition};
use crate::rotation::CriticalOrbit;

/// Least level used by the decay fits.
pub const FIT_FROM_LEVEL: usize = 4;

/// Default band parameter `b`.
pub const DEFAULT_BAND: f64 = 0.5;

fn floor_for(bits: u32) -> f64 {
    2f64.powi(24 - bits as i32)
}

/// Representative in `[-1/2, 1/2)`.
fn signed<T: Real>(x: &T) -> T {
    x.clone() - x.int(x.round_i64())
}

fn within<T: Real>(x: &T, a: &T, b: &T) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    x >= lo && x <= hi
}

/// `e_n(c) = F^{q_n}(c) − p_n − c` for both marked points, `n <= levels`.
#[derive(Clone, Debug)]
pub struct Scales<T> {
    pub c0: Vec<T>,
    pub c1: Vec<T>,
    /// Internal position of `c1`.
    pub c1_point: T,
}

fn scales<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>, levels: usize) -> Result<Scales<T>> {
    orb.comb.require_level(levels)?;
    let c1 = orb
        .map
        .marked_points()
        .get(1)
        .cloned()
        .ok_or_else(|| Error::Precondition("map has no second marked point".into()))?;
    let c0 = (0..=levels).map(|n| orb.e(n).clone()).collect();
    let e1 = (0..=levels)
        .map(|n| orb.map.iterate_shifted(&c1, orb.q(n), orb.p(n) as i64) - c1.clone())
        .collect();
    Ok(Scales {
        c0,
        c1: e1,
        c1_point: c1,
    })
}

/// `h` on the endpoints of `P̂_n^f`, `n <= depth`, matched by provenance.
#[derive(Clone, Debug)]
pub struct Conjugacy<T> {
    pub depth: usize,
    pub f_levels: Vec<TwoBridgesPartition<T>>,
    pub g_levels: Vec<TwoBridgesPartition<T>>,
    /// External minus internal coordinates.
    pub f_shift: T,
    pub g_shift: T,
    pub f_scales: Scales<T>,
    pub g_scales: Scales<T>,
    pub bits: u32,
}

/// One matched endpoint, in external coordinates.
#[derive(Clone, Debug)]
pub struct MatchedPoint<T> {
    pub prov: Provenance,
    pub f: T,
    pub g: T,
}

impl<T: Real> Conjugacy<T> {
    pub fn f_partition(&self, n: usize) -> &Partition<T> {
        &self.f_levels[n].partition
    }

    pub fn g_partition(&self, n: usize) -> &Partition<T> {
        &self.g_levels[n].partition
    }

    pub fn matched(&self, n: usize) -> Vec<MatchedPoint<T>> {
        let (pf, pg) = (self.f_partition(n), self.g_partition(n));
        pf.endpoints()
            .iter()
            .zip(pg.endpoints())
            .map(|(a, b)| MatchedPoint {
                prov: a.prov,
                f: (a.value.clone() + self.f_shift.clone()).fract01(),
                g: (b.value.clone() + self.g_shift.clone()).fract01(),
            })
            .collect()
    }

    /// `h(x)` for external `x`, linear inside the atoms of `P̂_{depth}`.
    pub fn eval(&self, x: &T) -> T {
        let (pf, pg) = (self.f_partition(self.depth), self.g_partition(self.depth));
        let xi = (x.clone() - self.f_shift.clone()).fract01();
        let k = pf.locate(&xi);
        let a = &pf.endpoints()[k].value;
        let t = (xi - a.clone()).fract01() / pf.lengths()[k].clone();
        let y = pg.endpoints()[k].value.clone() + t * pg.lengths()[k].clone();
        (y + self.g_shift.clone()).fract01()
    }

    /// Largest `|g^i(h(c)) − h(f^i(c))|` over the endpoints of `P̂_{depth}`,
    /// recomputing `g^i` from the marked points.
    pub fn equivariance_residual<G: CircleLift<T>>(&self, g: &G) -> T {
        let marked = g.marked_points();
        let mut worst = T::from_i64_at(0, self.bits);
        for e in self.g_partition(self.depth).endpoints() {
            let c = match e.prov.base {
                crate::partitions::Base::C0 => marked[0].clone(),
                crate::partitions::Base::C1 => marked[1].clone(),
            };
            let i = e.prov.iterate;
            let d = if i >= 0 {
                g.iterate(&c, i as u64) - e.value.clone()
            } else {
                g.iterate(&e.value, i.unsigned_abs()) - c
            };
            worst = worst.max_of(signed(&d).abs());
        }
        worst
    }

    /// Label order is the same on both sides, so `h` is monotone on
    /// every level; this confirms the numeric values respect it.
    pub fn is_monotone(&self) -> bool {
        (0..=self.depth).all(|n| {
            self.f_partition(n).lengths().iter().all(|l| l.is_positive())
                && self.g_partition(n).lengths().iter().all(|l| l.is_positive())
        })
    }
}

/// Match `P̂_n^f` with `P̂_n^g` for `n <= depth`.
///
/// The partial quotients must agree through index `depth + 2`, and every
/// level must carry the same two-bridges data and endpoint words in the
/// same cyclic order.
pub fn build_conjugacy<T, F, G>(f: &CriticalOrbit<T, F>, g: &CriticalOrbit<T, G>, depth: usize) -> Result<Conjugacy<T>>
where
    T: Real,
    F: CircleLift<T>,
    G: CircleLift<T>,
{
    let need = depth + 2;
    let (qf, qg) = (&f.comb.cf.quotients, &g.comb.cf.quotients);
    if qf.len() < need || qg.len() < need {
        return Err(Error::Combinatorics(format!(
            "conjugacy to depth {depth} needs {need} partial quotients of both maps"
        )));
    }
    if let Some(k) = (0..need).find(|&k| qf[k] != qg[k]) {
        return Err(Error::Combinatorics(format!(
            "partial quotient a_{k}: {} for f, {} for g",
            qf[k], qg[k]
        )));
    }
    let f_levels = two_bridges_sequence(f, depth)?;
    let g_levels = two_bridges_sequence(g, depth)?;
    for n in 0..=depth {
        let (a, b) = (&f_levels[n], &g_levels[n]);
        let (ma, mb) = (&a.meta, &b.meta);
        if (ma.is_two_bridges_level, ma.r, ma.l) != (mb.is_two_bridges_level, mb.r, mb.l) {
            return Err(Error::Combinatorics(format!(
                "level {n}: two-bridges data (flag, r, l) = ({}, {:?}, {:?}) for f, ({}, {:?}, {:?}) for g",
                ma.is_two_bridges_level, ma.r, ma.l, mb.is_two_bridges_level, mb.r, mb.l
            )));
        }
        let (ea, eb) = (a.partition.endpoints(), b.partition.endpoints());
        if ea.len() != eb.len() {
            return Err(Error::Combinatorics(format!(
                "level {n}: {} endpoints for f, {} for g",
                ea.len(),
                eb.len()
            )));
        }
        if let Some(k) = (0..ea.len()).find(|&k| ea[k].prov != eb[k].prov) {
            return Err(Error::Combinatorics(format!(
                "level {n}: endpoint {k} is {} for f, {} for g",
                ea[k].prov, eb[k].prov
            )));
        }
    }
    let bits = f.precision().min(g.precision());
    let zero = T::from_i64_at(0, bits);
    Ok(Conjugacy {
        depth,
        f_scales: scales(f, depth + 1)?,
        g_scales: scales(g, depth + 1)?,
        f_shift: f.map.frame_shift().unwrap_or_else(|| zero.clone()),
        g_shift: g.map.frame_shift().unwrap_or(zero),
        f_levels,
        g_levels,
        bits,
    })
}

fn log_ratios<T: Real>(h: &Conjugacy<T>, n: usize) -> Vec<T> {
    h.f_partition(n)
        .lengths()
        .iter()
        .zip(h.g_partition(n).lengths())
        .map(|(a, b)| (b.clone() / a.clone()).ln())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub decay: DecayReport,
    /// `P̂_n` nests in `P̂_{n−1}`.
    pub refining: Vec<(usize, bool)>,
    /// Largest atom of `P̂_n^f`.
    pub max_length: Vec<(usize, f64)>,
}

/// `D_n`: the largest `|log(|h(I)|/|I|) − log(|h(I')|/|I'|)|` over atoms of
/// `P̂_n^f` that are adjacent or lie in one atom of `P̂_{n−1}^f`.
pub fn criterion_audit<T: Real>(h: &Conjugacy<T>, n_max: usize) -> Result<CriterionReport> {
    if n_max > h.depth {
        return Err(Error::InvalidArgument(format!("audit to {n_max} beyond conjugacy depth {}", h.depth)));
    }
    let mut values = Vec::new();
    let mut refining = Vec::new();
    let mut max_length = Vec::new();
    let half = T::from_i64_at(1, h.bits) / T::from_i64_at(2, h.bits);
    for n in 1..=n_max {
        let (pf, prev) = (h.f_partition(n), h.f_partition(n - 1));
        let r = log_ratios(h, n);
        let count = r.len();
        let mut d = T::from_i64_at(0, h.bits);
        for k in 0..count {
            d = d.max_of((r[k].clone() - r[(k + 1) % count].clone()).abs());
        }
        let mut groups: std::collections::BTreeMap<usize, (T, T)> = Default::default();
        for (k, atom) in pf.atoms().enumerate() {
            let mid = atom.start.value.clone() + atom.length.clone() * half.clone();
            let parent = prev.locate(&mid.fract01());
            let e = groups.entry(parent).or_insert_with(|| (r[k].clone(), r[k].clone()));
            e.0 = e.0.clone().min_of(r[k].clone());
            e.1 = e.1.clone().max_of(r[k].clone());
        }
        for (lo, hi) in groups.values() {
            d = d.max_of(hi.clone() - lo.clone());
        }
        values.push((n, d.to_f64()));
        refining.push((n, pf.nesting_in(prev).holds()));
        max_length.push((n, pf.max_length().to_f64()));
    }
    Ok(CriterionReport {
        decay: DecayReport::new("criterion_D", values, FIT_FROM_LEVEL, floor_for(h.bits)),
        refining,
        max_length,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapCell {
    pub n: usize,
    pub m: usize,
    /// `None` when no endpoint of `Ê_{n+1}` lies in `J_m`.
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndpointGapReport {
    pub band: f64,
    pub cells: Vec<GapCell>,
    /// For each `k = n + 1 − m`, the sequence over `n`.
    pub by_offset: Vec<(usize, DecayReport)>,
    /// `|B_{n,g}(𝔠_n^g) − B_{n,f}(𝔠_n^f)|`.
    pub free_critical: DecayReport,
}

/// `max |B_{m,g}(h(v)) − B_{m,f}(v)|` over `v ∈ Ê_{n+1} ∩ J_m(c_0)`,
/// `⌈(1−b)n⌉ <= m <= n+1`, with `B_m(x) = x / e_m`.
pub fn endpoint_gap_audit<T: Real>(h: &Conjugacy<T>, n_max: usize, band: f64) -> Result<EndpointGapReport> {
    if n_max + 1 > h.depth {
        return Err(Error::InvalidArgument(format!(
            "endpoint gaps to {n_max} need depth {}, conjugacy has {}",
            n_max + 1,
            h.depth
        )));
    }
    if !(0.0..=1.0).contains(&band) {
        return Err(Error::InvalidArgument(format!("band {band} outside [0, 1]")));
    }
    let (ef, eg) = (&h.f_scales.c0, &h.g_scales.c0);
    let mut cells = Vec::new();
    for n in 0..=n_max {
        let pf = h.f_partition(n + 1).endpoints();
        let pg = h.g_partition(n + 1).endpoints();
        let m_lo = ((1.0 - band) * n as f64).ceil() as usize;
        for m in m_lo..=n + 1 {
            let mut worst: Option<T> = None;
            let mut count = 0;
            for (a, b) in pf.iter().zip(pg) {
                let v = signed(&a.value);
                if !within(&v, &ef[m + 1], &ef[m]) {
                    continue;
                }
                let w = signed(&b.value);
                let gap = (w / eg[m].clone() - v / ef[m].clone()).abs();
                count += 1;
                worst = Some(worst.map_or(gap.clone(), |x| x.max_of(gap)));
            }
            cells.push(GapCell {
                n,
                m,
                value: worst.map(|x| x.to_f64()),
                count,
            });
        }
    }
    let floor = floor_for(h.bits);
    let max_k = cells.iter().map(|c| c.n + 1 - c.m).max().unwrap_or(0);
    let by_offset = (0..=max_k)
        .map(|k| {
            let seq: Vec<(usize, f64)> = cells
                .iter()
                .filter(|c| c.n + 1 - c.m == k)
                .filter_map(|c| c.value.map(|v| (c.n, v)))
                .collect();
            (k, DecayReport::new(format!("endpoint_gap_k{k}"), seq, FIT_FROM_LEVEL, floor))
        })
        .collect();
    let mut free = Vec::new();
    for n in 0..=h.depth {
        let (a, b) = (
            &h.f_levels[n].meta.free_critical_point,
            &h.g_levels[n].meta.free_critical_point,
        );
        if let (Some(a), Some(b)) = (a, b) {
            let gap = (b.lift.clone() / eg[n].clone() - a.lift.clone() / ef[n].clone()).abs();
            free.push((n, gap.to_f64()));
        }
    }
    Ok(EndpointGapReport {
        band,
        cells,
        by_offset,
        free_critical: DecayReport::new("free_critical_gap", free, FIT_FROM_LEVEL, floor),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FundamentalSeries {
    pub base: crate::partitions::Base,
    /// `|log(|h(I_n)| / |I_n|)|`.
    pub raw: DecayReport,
    /// Signed log ratio at the deepest level, used to recentre.
    pub limit: f64,
    /// `|log(|h(I_n)| / |I_n|) − ℓ̂|` below the deepest level.
    pub recentred: DecayReport,
}

fn fundamental_series<T: Real>(
    base: crate::partitions::Base,
    ef: &[T],
    eg: &[T],
    n_max: usize,
    floor: f64,
) -> FundamentalSeries {
    let logs: Vec<T> = (1..=n_max)
        .map(|n| (eg[n].abs() / ef[n].abs()).ln())
        .collect();
    let limit = logs.last().cloned();
    let raw = (1..=n_max).map(|n| (n, logs[n - 1].abs().to_f64())).collect();
    let recentred = match &limit {
        Some(l) => (1..n_max)
            .map(|n| (n, (logs[n - 1].clone() - l.clone()).abs().to_f64()))
            .collect(),
        None => Vec::new(),
    };
    FundamentalSeries {
        base,
        raw: DecayReport::new(format!("fundamental_ratio_{base:?}").to_lowercase(), raw, FIT_FROM_LEVEL, floor),
        limit: limit.map_or(0.0, |l| l.to_f64()),
        recentred: DecayReport::new(
            format!("fundamental_ratio_recentred_{base:?}").to_lowercase(),
            recentred,
            FIT_FROM_LEVEL,
            floor,
        ),
    }
}

/// `|log(|h(I_n(c_i))| / |I_n(c_i)|)|` for both marked points.
pub fn fundamental_ratio_audit<T: Real>(h: &Conjugacy<T>, n_max: usize) -> Result<[FundamentalSeries; 2]> {
    if n_max > h.depth + 1 {
        return Err(Error::InvalidArgument(format!("fundamental ratios to {n_max} beyond depth {}", h.depth + 1)));
    }
    let floor = floor_for(h.bits);
    Ok([
        fundamental_series(crate::partitions::Base::C0, &h.f_scales.c0, &h.g_scales.c0, n_max, floor),
        fundamental_series(crate::partitions::Base::C1, &h.f_scales.c1, &h.g_scales.c1, n_max, floor),
    ])
}

/// Per `n`, the largest recentred `|log(|h(I)|/|I|) − ℓ̂_i|` over atoms `I` of
/// `P̂_{n+1}` inside `J_{n−⌈bn⌉}(c_i)`.
pub fn interval_log_ratio_audit<T: Real>(h: &Conjugacy<T>, n_max: usize, band: f64) -> Result<DecayReport> {
    if n_max + 1 > h.depth {
        return Err(Error::InvalidArgument(format!(
            "interval ratios to {n_max} need depth {}, conjugacy has {}",
            n_max + 1,
            h.depth
        )));
    }
    let ell = fundamental_ratio_audit(h, h.depth + 1)?;
    let centres = [
        (T::from_i64_at(0, h.bits), T::from_i64_at(0, h.bits), &h.f_scales.c0, &h.g_scales.c0),
        (
            h.f_scales.c1_point.clone(),
            h.g_scales.c1_point.clone(),
            &h.f_scales.c1,
            &h.g_scales.c1,
        ),
    ];
    let mut values = Vec::new();
    for n in 1..=n_max {
        let m = n - (band * n as f64).ceil() as usize;
        let (pf, pg) = (h.f_partition(n + 1), h.g_partition(n + 1));
        let mut worst: Option<T> = None;
        for (i, (cf, _cg, ef, _eg)) in centres.iter().enumerate() {
            let l = T::from_f64_at(ell[i].limit, h.bits);
            for (a, b) in pf.atoms().zip(pg.atoms()) {
                let s = signed(&(a.start.value.clone() - cf.clone()));
                let e = s.clone() + a.length.clone();
                if !(within(&s, &ef[m + 1], &ef[m]) && within(&e, &ef[m + 1], &ef[m])) {
                    continue;
                }
                let v = ((b.length.clone() / a.length.clone()).ln() - l.clone()).abs();
                worst = Some(worst.map_or(v.clone(), |w| w.max_of(v)));
            }
        }
        if let Some(w) = worst {
            values.push((n, w.to_f64()));
        }
    }
    Ok(DecayReport::new("interval_log_ratio", values, FIT_FROM_LEVEL, floor_for(h.bits)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReturnMapReport {
    pub n: usize,
    pub m: usize,
    pub value: Option<f64>,
    pub count: usize,
}

/// Largest `|log(|g^{q_{m+1}}(h(I))| / |h(I)|) − log(|f^{q_{m+1}}(I)| / |I|)|`
/// over atoms of `P̂_{n+1}` in `I_m ∖ I_{m+2}`. The rescalings `B_m` cancel.
pub fn return_map_ratio_audit<T, F, G>(
    f: &CriticalOrbit<T, F>,
    g: &CriticalOrbit<T, G>,
    h: &Conjugacy<T>,
    n: usize,
    m: usize,
) -> Result<ReturnMapReport>
where
    T: Real,
    F: CircleLift<T>,
    G: CircleLift<T>,
{
    if n + 1 > h.depth || m + 2 > h.depth + 1 {
        return Err(Error::InvalidArgument(format!("(n, m) = ({n}, {m}) beyond conjugacy depth {}", h.depth)));
    }
    let ef = &h.f_scales.c0;
    let (q, p) = (f.q(m + 1), f.p(m + 1) as i64);
    let (pf, pg) = (h.f_partition(n + 1), h.g_partition(n + 1));
    let mut worst: Option<T> = None;
    let mut count = 0;
    for (a, b) in pf.atoms().zip(pg.atoms()) {
        let s = signed(&a.start.value);
        let e = s.clone() + a.length.clone();
        if !(within(&s, &ef[m + 2], &ef[m]) && within(&e, &ef[m + 2], &ef[m])) {
            continue;
        }
        let sg = signed(&b.start.value);
        let eg = sg.clone() + b.length.clone();
        let image = |map: &dyn Fn(&T) -> T, x: &T, y: &T| (map(y) - map(x)).abs();
        let fq = |x: &T| f.map.iterate_shifted(x, q, p);
        let gq = |x: &T| g.map.iterate_shifted(x, q, p);
        let lf = (image(&fq, &s, &e) / a.length.clone()).ln();
        let lg = (image(&gq, &sg, &eg) / b.length.clone()).ln();
        let v = (lg - lf).abs();
        count += 1;
        worst = Some(worst.map_or(v.clone(), |w| w.max_of(v)));
    }
    Ok(ReturnMapReport {
        n,
        m,
        value: worst.map(|w| w.to_f64()),
        count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeProfile {
    pub level: usize,
    /// `|h(I)| / |I|` per atom of `P̂_level^f`, counterclockwise from `c_0`.
    pub slopes: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Largest jump between adjacent slopes.
    pub oscillation: f64,
}

/// Difference quotients of `h` over the atoms of the deepest level.
pub fn derivative_profile<T: Real>(h: &Conjugacy<T>) -> DerivativeProfile {
    let n = h.depth;
    let slopes: Vec<f64> = h
        .f_partition(n)
        .lengths()
        .iter()
        .zip(h.g_partition(n).lengths())
        .map(|(a, b)| (b.clone() / a.clone()).to_f64())
        .collect();
    let count = slopes.len();
    let oscillation = (0..count)
        .map(|k| (slopes[k] - slopes[(k + 1) % count]).abs())
        .fold(0.0, f64::max);
    DerivativeProfile {
        level: n,
        min: slopes.iter().cloned().fold(f64::INFINITY, f64::min),
        max: slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        oscillation,
        slopes,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureReport {
    pub rho: Vec<u64>,
    pub n_critical: usize,
    pub d0: f64,
    pub d1: f64,
    /// `μ[c_0, c_1)` as a decimal string at working precision.
    pub delta0: String,
    pub delta1: String,
    pub delta0_f64: f64,
    pub delta1_f64: f64,
    /// `1/q_L`.
    pub error_bar: f64,
}

/// `(ρ; 2; d_0, d_1; δ_0, δ_1)`. `δ_0 = μ[c_0, c_1)` is read off the
/// rotation coordinates `{iρ}` of the two orbit points of `c_0` that
/// bracket `c_1`, with `ρ ≈ p_L/q_L`.
pub fn signature<T: Real, F: CircleLift<T>>(orb: &CriticalOrbit<T, F>) -> Result<SignatureReport> {
    let bits = orb.precision();
    let marked = orb.map.marked_points();
    let c1 = marked
        .get(1)
        .cloned()
        .ok_or_else(|| Error::Precondition("map has no second marked point".into()))?
        .fract01();
    let l = orb.comb.max_level();
    let (ql, pl) = (orb.q(l), orb.p(l));
    let rho = T::from_i64_at(pl as i64, bits) / T::from_i64_at(ql as i64, bits);
    let mut below: Option<(T, u64)> = None;
    let mut above: Option<(T, u64)> = None;
    for i in 0..orb.orbit_len() {
        let x = orb.point(i);
        if x <= c1 {
            if below.as_ref().is_none_or(|(b, _)| x > *b) {
                below = Some((x, i));
            }
        } else if above.as_ref().is_none_or(|(a, _)| x < *a) {
            above = Some((x, i));
        }
    }
    let coord = |i: u64| (rho.clone() * T::from_i64_at(i as i64, bits)).fract01();
    let lo = below.map_or_else(|| T::from_i64_at(0, bits), |(_, i)| coord(i));
    let hi = above.map_or_else(|| T::from_i64_at(1, bits), |(_, i)| {
        let c = coord(i);
        if c.is_zero() {
            T::from_i64_at(1, bits)
        } else {
            c
        }
    });
    let delta0 = (lo + hi) / T::from_i64_at(2, bits);
    let delta1 = T::from_i64_at(1, bits) - delta0.clone();
    let critical = orb.map.critical_set();
    let d = |k: usize| {
        if critical.len() > k {
            crate::maps::criticality_slope(&*orb.map, &marked[k])
        } else {
            1.0
        }
    };
    Ok(SignatureReport {
        rho: orb.comb.cf.quotients.clone(),
        n_critical: marked.len(),
        d0: d(0),
        d1: d(1),
        delta0: delta0.to_decimal(30),
        delta1: delta1.to_decimal(30),
        delta0_f64: delta0.to_f64(),
        delta1_f64: delta1.to_f64(),
        error_bar: 1.0 / ql as f64,
    })
}

/// Fraction of `f^i(c_0)`, `i < samples`, in `[c_0, c_1)`.
pub fn birkhoff_delta0<T: Real, F: CircleLift<T>>(f: &F, samples: u64) -> Result<f64> {
    let marked = f.marked_points();
    let c1 = marked
        .get(1)
        .cloned()
        .ok_or_else(|| Error::Precondition("map has no second marked point".into()))?
        .fract01();
    let mut x = marked[0].clone();
    let mut hits = 0u64;
    for _ in 0..samples {
        if x.fract01() < c1 {
            hits += 1;
        }
        x = f.iterate_reduced(&x, 1).0;
    }
    Ok(hits as f64 / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::RigidRotation;

    #[test]
    fn rotation_signature_is_lebesgue() {
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        let orb = CriticalOrbit::new(RigidRotation::with_marked(rho, 0.3), 12, 1 << 20).unwrap();
        let s = signature(&orb).unwrap();
        assert!((s.delta0_f64 - 0.3).abs() <= s.error_bar);
        assert!((s.delta0_f64 + s.delta1_f64 - 1.0).abs() < 1e-15);
        assert_eq!((s.d0, s.d1), (1.0, 1.0));
        let b = birkhoff_delta0(&RigidRotation::with_marked(rho, 0.3), 10 * orb.q(orb.comb.max_level())).unwrap();
        assert!((b - s.delta0_f64).abs() <= 3.0 * s.error_bar);
    }

    #[test]
    fn identity_conjugacy_of_rotation() {
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        let f = CriticalOrbit::new(RigidRotation::with_marked(rho, 0.3), 12, 1 << 20).unwrap();
        let g = CriticalOrbit::new(RigidRotation::with_marked(rho, 0.3), 12, 1 << 20).unwrap();
        let h = build_conjugacy(&f, &g, 6).unwrap();
        assert!(h.is_monotone());
        for n in 0..=6 {
            for p in h.matched(n) {
                assert_eq!(p.f, p.g);
            }
        }
        assert_eq!(h.eval(&0.123), 0.123);
        assert!(criterion_audit(&h, 6).unwrap().decay.all_zero());
        assert_eq!(derivative_profile(&h).oscillation, 0.0);
    }

    #[test]
    fn different_rotation_numbers_are_rejected() {
        let f = CriticalOrbit::new(RigidRotation::with_marked((5f64.sqrt() - 1.0) / 2.0, 0.3), 12, 1 << 20).unwrap();
        let g = CriticalOrbit::new(RigidRotation::with_marked(2f64.sqrt() - 1.0, 0.3), 12, 1 << 20).unwrap();
        match build_conjugacy(&f, &g, 4) {
            Err(Error::Combinatorics(msg)) => assert!(msg.contains("a_")),
            other => panic!("{other:?}"),
        }
    }
}
