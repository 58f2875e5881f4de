//! Stages of a run and the manifest that records them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use circle_renorm::conjugacy::{
    birkhoff_delta0, build_conjugacy, criterion_audit, derivative_profile, endpoint_gap_audit,
    fundamental_ratio_audit, interval_log_ratio_audit, return_map_ratio_audit, signature,
};
use circle_renorm::decay::DecayReport;
use circle_renorm::maps::{CircleLift, MapSpec};
use circle_renorm::numerics::Real;
use circle_renorm::partitions::{two_bridges_sequence, Partition};
use circle_renorm::renorm::{chi, m_controlled_check, pair_at_level, pseudo_distances, schwarzian_audit, DEFAULT_CHI_CAP};
use circle_renorm::rotation::{
    partial_quotients_by_returns, tune_parameter, ContinuedFraction, CriticalOrbit, TuneOptions,
};
use circle_renorm::tubular::{
    analyze_level, auto_l, tubular_set, CenterSide, Direction, ParabolicTrace, Regime, RenormalizedMap,
    TraceOptions, DEFAULT_TUBULAR_GRID,
};
use circle_renorm::{AdaptiveReal, Error, Map, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, Stage};
use crate::emit::{self, decimal, float, write_csv, write_json};

pub type Orbit = CriticalOrbit<AdaptiveReal, Map>;

/// Exit status for an error: 2 configuration, 3 budget or precision,
/// 4 combinatorics, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::PrecisionLoss(_)
        | Error::PrecisionBudget { .. }
        | Error::PrecisionTooLow { .. }
        | Error::Budget { .. }
        | Error::ChiCap { .. } => 3,
        Error::Combinatorics(_) | Error::RationalRotation { .. } | Error::Terminated { .. } => 4,
        _ => 1,
    }
}

/// A map with its parameter and closest-return data.
pub struct Subject {
    pub spec: MapSpec,
    pub a: AdaptiveReal,
    /// Depth confirmed by the tuner, if the parameter was tuned.
    pub verified_depth: Option<usize>,
    pub orb: Orbit,
}

/// Bisect the parameter of `spec` so its rotation number starts with
/// `target` followed by `tail` ones.
pub fn tune_subject(spec: &MapSpec, target: &ContinuedFraction, tail: usize, bits: u32, budget: u64) -> Result<Subject> {
    let tol = AdaptiveReal::exp2_at(-(bits as i32 - 112).max(32), bits);
    let opts = TuneOptions { bits, tail, budget };
    let tuned = tune_parameter(|a| spec.build_at(a), target, target.len(), &tol, &opts)?;
    let map = spec.build_at(tuned.a.clone())?;
    let orb = CriticalOrbit::from_parts(Arc::new(map), tuned.combinatorics, budget)?;
    Ok(Subject {
        spec: spec.clone(),
        a: tuned.a,
        verified_depth: Some(tuned.verified_depth),
        orb,
    })
}

/// Use the parameter in `spec` as given, measuring `levels` partial quotients.
pub fn measure_subject(spec: &MapSpec, levels: usize, bits: u32, budget: u64) -> Result<Subject> {
    let map = spec.build::<AdaptiveReal>(bits)?;
    let a = map.a().clone();
    let comb = partial_quotients_by_returns(&map, levels, budget)?;
    let orb = CriticalOrbit::from_parts(Arc::new(map), comb, budget)?;
    Ok(Subject {
        spec: spec.clone(),
        a,
        verified_depth: None,
        orb,
    })
}

fn subject_for(spec: &MapSpec, cfg: &RunConfig, bits: u32) -> Result<Subject> {
    let target = ContinuedFraction::new(cfg.target.clone())?;
    if cfg.tune {
        return tune_subject(spec, &target, cfg.tail, bits, cfg.budget);
    }
    let s = measure_subject(spec, target.len() + cfg.tail, bits, cfg.budget)?;
    let got = &s.orb.comb.cf.quotients;
    if let Some(k) = (0..target.len()).find(|&k| got.get(k) != target.quotients.get(k)) {
        return Err(Error::Combinatorics(format!(
            "map has a_{k} = {:?}, target {}",
            got.get(k),
            target.quotients[k]
        )));
    }
    Ok(s)
}

pub fn tune_json(s: &Subject) -> serde_json::Value {
    json!({
        "a": decimal(&s.a),
        "verified_depth": s.verified_depth,
        "quotients": s.orb.comb.cf.quotients,
        "bits": s.orb.precision(),
    })
}

/// `(level, metric, value)` rows for the partitions of `orb`.
pub fn partition_audit_rows<F: CircleLift<AdaptiveReal>>(
    orb: &CriticalOrbit<AdaptiveReal, F>,
    levels: usize,
    two_bridges: bool,
) -> Result<(Vec<serde_json::Value>, Vec<Vec<String>>)> {
    let bits = orb.precision();
    let seq = two_bridges_sequence(orb, levels)?;
    let mut json_levels = Vec::new();
    let mut rows = Vec::new();
    let mut prev: Option<&Partition<AdaptiveReal>> = None;
    for tb in &seq {
        let n = tb.level();
        let p = &tb.partition;
        let mut row = |metric: &str, value: String| rows.push(vec![n.to_string(), metric.to_string(), value]);
        row("atoms", p.atom_count().to_string());
        row("expected_atoms", (orb.q(n) + orb.q(n + 1)).to_string());
        row("coverage_defect", float(p.coverage_defect().to_f64()));
        row("max_length", float(p.max_length().to_f64()));
        row("two_bridges_level", u8::from(tb.meta.is_two_bridges_level).to_string());
        if let Some(c) = prev {
            row("nested", u8::from(p.nesting_in(c).holds()).to_string());
        }
        prev = Some(p);
        json_levels.push(if two_bridges {
            tb.to_json(emit::digits_for(bits))
        } else {
            p.to_json(emit::digits_for(bits))
        });
    }
    Ok((json_levels, rows))
}

pub const RENORM_HEADER: [&str; 7] = ["n", "s_n", "chi", "d0", "d1", "d2", "M_star"];

/// Rows `n, s_n, χ, d_0, d_1, d_2, M*` and the `d_r` sequences against `g`.
pub fn renorm_rows<F, G>(
    f: &CriticalOrbit<AdaptiveReal, F>,
    g: Option<&CriticalOrbit<AdaptiveReal, G>>,
    levels: std::ops::RangeInclusive<usize>,
    r: usize,
    grid: usize,
) -> Result<(Vec<Vec<String>>, Vec<DecayReport>)>
where
    F: CircleLift<AdaptiveReal> + 'static,
    G: CircleLift<AdaptiveReal> + 'static,
{
    if let Some(g) = g {
        let need = *levels.end() + 2;
        let (qf, qg) = (&f.comb.cf.quotients, &g.comb.cf.quotients);
        if let Some(k) = (0..need.min(qf.len()).min(qg.len())).find(|&k| qf[k] != qg[k]) {
            return Err(Error::Combinatorics(format!("partial quotients differ at index {k}: {} vs {}", qf[k], qg[k])));
        }
    }
    let bits = f.precision();
    let floor = 2f64.powi(24 - bits as i32);
    let mut rows = Vec::new();
    let mut seqs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); r + 1];
    for n in levels {
        let p = pair_at_level(f, n)?;
        let k = chi(&p.pair, DEFAULT_CHI_CAP)?;
        let control = m_controlled_check(&p, 0.0, grid, DEFAULT_CHI_CAP)?;
        let mut d = vec![String::new(); 3];
        if let Some(g) = g {
            let pg = pair_at_level(g, n)?;
            for (i, v) in pseudo_distances(&p, &pg, r, grid)?.iter().enumerate() {
                d[i] = float(v.to_f64());
                seqs[i].push((n, v.to_f64()));
            }
        }
        let mut row = vec![n.to_string(), decimal(&p.s), k.to_string()];
        row.extend(d);
        row.push(float(control.m_star));
        rows.push(row);
    }
    let reports = if g.is_some() {
        seqs.into_iter()
            .enumerate()
            .map(|(i, v)| DecayReport::new(format!("d{i}"), v, 4, floor))
            .collect()
    } else {
        Vec::new()
    };
    Ok((rows, reports))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFrom {
    /// Forward from the image of `f^{q_n}(c_0)`.
    Endpoint,
    /// Backward from the critical value.
    Value,
}

pub const TRACE_HEADER: [&str; 4] = ["direction", "i", "s_i", "regime"];

fn trace_rows(t: &ParabolicTrace<AdaptiveReal>) -> Vec<Vec<String>> {
    let dir = match t.direction {
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    };
    t.s.iter()
        .zip(&t.regimes)
        .enumerate()
        .map(|(i, (s, reg))| {
            let reg = match reg {
                Regime::Funnel => "funnel",
                Regime::Tunnel => "tunnel",
            };
            vec![dir.to_string(), i.to_string(), decimal(s), reg.to_string()]
        })
        .collect()
}

fn trace_json(t: &ParabolicTrace<AdaptiveReal>) -> serde_json::Value {
    json!({
        "length": t.s.len(),
        "i_c": t.i_c,
        "entry": t.entry,
        "exit": t.exit,
        "funnel_count": t.funnel_count(),
        "escaped": t.escaped,
    })
}

/// Tubular set at level `m` and, when a center exists, the chart and the
/// requested parabolic traces.
pub fn tubular_outputs<F: CircleLift<AdaptiveReal> + 'static>(
    orb: &CriticalOrbit<AdaptiveReal, F>,
    m: usize,
    l: Option<u64>,
    from: &[TraceFrom],
) -> Result<(serde_json::Value, Vec<Vec<String>>)> {
    let pair = pair_at_level(orb, m)?;
    let map = RenormalizedMap::from_pair(&pair);
    let l = l.unwrap_or_else(|| auto_l(orb.a(m + 1)));
    let set = tubular_set(&map, l, DEFAULT_TUBULAR_GRID)?;
    let centers: Vec<_> = set
        .centers
        .iter()
        .map(|c| {
            json!({
                "side": match c.side { CenterSide::Z => "Z", CenterSide::W => "W" },
                "point": decimal(&c.point),
                "d1_minus_1": float((c.d1.clone() - AdaptiveReal::exact(1)).to_f64()),
                "d2": float(c.d2.to_f64()),
            })
        })
        .collect();
    let mut summary = json!({
        "level": m,
        "a_next": orb.a(m + 1),
        "L": l,
        "components": set.components.iter().map(|(a, b)| vec![decimal(a), decimal(b)]).collect::<Vec<_>>(),
        "centers": centers,
        "chart": null,
    });
    let mut rows = Vec::new();
    if set.center(CenterSide::Z).is_some() {
        let an = analyze_level(orb, m, Some(l), DEFAULT_TUBULAR_GRID, &TraceOptions::default())?;
        summary["chart"] = json!({
            "eps": decimal(&an.chart.eps),
            "d2": decimal(&an.chart.d2),
            "residual_d1": float(an.chart.residual_d1.to_f64()),
            "residual_d2": float(an.chart.residual_d2.to_f64()),
            "forward": trace_json(&an.forward),
            "backward": trace_json(&an.backward),
        });
        for f in from {
            rows.extend(trace_rows(match f {
                TraceFrom::Endpoint => &an.forward,
                TraceFrom::Value => &an.backward,
            }));
        }
    }
    Ok((summary, rows))
}

/// Level in `1..=depth` with the largest next partial quotient.
pub fn widest_level<F: CircleLift<AdaptiveReal>>(orb: &CriticalOrbit<AdaptiveReal, F>, depth: usize) -> usize {
    (1..=depth).rev().max_by_key(|&m| orb.a(m + 1)).unwrap_or(1)
}

/// Conjugacy audits between `f` and `g`, written into `dir`.
pub fn conjugacy_outputs<F, G>(
    f: &CriticalOrbit<AdaptiveReal, F>,
    g: &CriticalOrbit<AdaptiveReal, G>,
    depth: usize,
    band: f64,
    svg: bool,
    dir: &Path,
) -> Result<Vec<PathBuf>>
where
    F: CircleLift<AdaptiveReal>,
    G: CircleLift<AdaptiveReal>,
{
    let h = build_conjugacy(f, g, depth)?;
    let mut files = Vec::new();
    let mut decays: Vec<DecayReport> = Vec::new();
    let mut summary = serde_json::Map::new();

    let crit = criterion_audit(&h, depth)?;
    let rows: Vec<Vec<String>> = crit
        .decay
        .values
        .iter()
        .zip(crit.refining.iter().zip(&crit.max_length))
        .map(|((n, v), ((_, nested), (_, len)))| {
            vec![n.to_string(), String::new(), float(*v), u8::from(*nested).to_string(), float(*len)]
        })
        .collect();
    files.push(dir.join("criterion.csv"));
    write_csv(files.last().unwrap(), &["n", "m", "value", "nested", "max_length"], &rows)?;
    decays.push(crit.decay);

    if depth >= 2 {
        let gaps = endpoint_gap_audit(&h, depth - 1, band)?;
        let rows: Vec<Vec<String>> = gaps
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.n.to_string(),
                    c.m.to_string(),
                    c.value.map(float).unwrap_or_default(),
                    c.count.to_string(),
                ]
            })
            .collect();
        files.push(dir.join("endpoint_gap.csv"));
        write_csv(files.last().unwrap(), &["n", "m", "value", "count"], &rows)?;
        decays.extend(gaps.by_offset.into_iter().map(|(_, r)| r));
        files.push(dir.join("free_critical_gap.csv"));
        write_csv(files.last().unwrap(), &["n", "m", "value"], &emit::decay_rows(&gaps.free_critical))?;
        decays.push(gaps.free_critical);

        let ilr = interval_log_ratio_audit(&h, depth - 1, band)?;
        files.push(dir.join("interval_log_ratio.csv"));
        write_csv(files.last().unwrap(), &["n", "m", "value"], &emit::decay_rows(&ilr))?;
        decays.push(ilr);

        let mut rows = Vec::new();
        let mut along: Vec<(usize, f64)> = Vec::new();
        for n in 2..depth {
            let lo = ((1.0 - band) * n as f64).ceil() as usize;
            for m in lo.max(1)..n {
                let rep = return_map_ratio_audit(f, g, &h, n, m)?;
                if let (Some(v), true) = (rep.value, m == lo.max(1)) {
                    along.push((n, v));
                }
                rows.push(vec![
                    n.to_string(),
                    m.to_string(),
                    rep.value.map(float).unwrap_or_default(),
                    rep.count.to_string(),
                ]);
            }
        }
        files.push(dir.join("return_map_ratio.csv"));
        write_csv(files.last().unwrap(), &["n", "m", "value", "count"], &rows)?;
        let floor = 2f64.powi(24 - h.bits as i32);
        decays.push(DecayReport::new("return_map_ratio_band_start", along, 4, floor));
    }

    let fund = fundamental_ratio_audit(&h, depth + 1)?;
    let mut rows = Vec::new();
    for s in &fund {
        let base = format!("{:?}", s.base).to_lowercase();
        for (n, raw) in &s.raw.values {
            let rec = s.recentred.value_at(*n).map(float).unwrap_or_default();
            rows.push(vec![n.to_string(), base.clone(), float(*raw), rec]);
        }
        summary.insert(format!("fundamental_ratio_limit_{base}"), json!(s.limit));
    }
    files.push(dir.join("fundamental_ratio.csv"));
    write_csv(files.last().unwrap(), &["n", "critical", "raw", "recentred"], &rows)?;
    for s in fund {
        decays.push(s.raw);
        decays.push(s.recentred);
    }

    let prof = derivative_profile(&h);
    let rows: Vec<Vec<String>> = prof
        .slopes
        .iter()
        .enumerate()
        .map(|(k, s)| vec![k.to_string(), float(*s)])
        .collect();
    files.push(dir.join("derivative_profile.csv"));
    write_csv(files.last().unwrap(), &["atom", "slope"], &rows)?;

    let mut sigs = Vec::new();
    for (name, sig, birk) in [
        ("f", signature(f)?, birkhoff_delta0(&*f.map, 10 * f.q(f.comb.max_level()))?),
        ("g", signature(g)?, birkhoff_delta0(&*g.map, 10 * g.q(g.comb.max_level()))?),
    ] {
        sigs.push(json!({"map": name, "signature": emit::to_json(&sig)?, "birkhoff_delta0": birk}));
    }
    files.push(dir.join("signature.json"));
    write_json(files.last().unwrap(), &sigs)?;

    for d in &decays {
        summary.insert(d.quantity.clone(), emit::fit_summary(d));
    }
    summary.insert("equivariance_residual".into(), json!(h.equivariance_residual(&*g.map).to_f64()));
    summary.insert("monotone".into(), json!(h.is_monotone()));
    summary.insert(
        "derivative_profile".into(),
        json!({"level": prof.level, "min": prof.min, "max": prof.max, "oscillation": prof.oscillation}),
    );
    summary.insert(
        "sequences".into(),
        serde_json::Value::Object(
            decays
                .iter()
                .map(|d| (d.quantity.clone(), json!(d.values)))
                .collect(),
        ),
    );
    files.push(dir.join("conjugacy_summary.json"));
    write_json(files.last().unwrap(), &summary)?;

    if svg {
        for d in decays.iter().filter(|d| !d.values.is_empty()) {
            files.push(dir.join(format!("{}.svg", d.quantity)));
            emit::emit_decay_plot(d, files.last().unwrap())?;
        }
    }
    Ok(files)
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: String,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrecisionEntry {
    pub level: usize,
    pub bits: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<StageRecord>,
    pub precision: Vec<PrecisionEntry>,
    pub files: Vec<FileEntry>,
    pub failure: Option<Failure>,
}

pub const MANIFEST: &str = "manifest.json";

impl RunManifest {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

fn inventory(dir: &Path, names: &BTreeSet<PathBuf>) -> Result<Vec<FileEntry>> {
    names
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            let rel = p.strip_prefix(dir).unwrap_or(p);
            Ok(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: emit::digest(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect()
}

struct Ctx {
    f: Option<Subject>,
    g: Option<Subject>,
}

fn run_stage(stage: Stage, cfg: &RunConfig, bits: u32, ctx: &mut Ctx, files: &mut BTreeSet<PathBuf>) -> Result<()> {
    let dir = &cfg.out;
    if ctx.f.is_none() {
        ctx.f = Some(subject_for(&cfg.f, cfg, bits)?);
    }
    let needs_g = matches!(stage, Stage::Conjugacy | Stage::Renorm | Stage::Tune);
    if needs_g && ctx.g.is_none() {
        if let Some(spec) = &cfg.g {
            ctx.g = Some(subject_for(spec, cfg, bits)?);
        }
    }
    let f = ctx.f.as_ref().expect("f prepared");
    let g = ctx.g.as_ref();
    match stage {
        Stage::Tune => {
            let path = dir.join("tune.json");
            let mut v = json!({"f": tune_json(f)});
            if let Some(g) = g {
                v["g"] = tune_json(g);
            }
            write_json(&path, &v)?;
            files.insert(path);
        }
        Stage::Partitions => {
            let (levels, rows) = partition_audit_rows(&f.orb, cfg.depth, true)?;
            let p = dir.join("partitions.json");
            write_json(&p, &levels)?;
            files.insert(p);
            let p = dir.join("partitions.csv");
            write_csv(&p, &["level", "metric", "value"], &rows)?;
            files.insert(p);
        }
        Stage::Renorm => {
            let (rows, reports) = renorm_rows(&f.orb, g.map(|g| &g.orb), 1..=cfg.depth, cfg.r, cfg.grid)?;
            let p = dir.join("renorm.csv");
            write_csv(&p, &RENORM_HEADER, &rows)?;
            files.insert(p);
            let schw = schwarzian_audit(&f.orb, 1..=cfg.depth, 64)?;
            let mut summary = serde_json::Map::new();
            summary.insert("schwarzian".into(), emit::to_json(&schw)?);
            for r in &reports {
                summary.insert(r.quantity.clone(), emit::fit_summary(r));
                if cfg.svg {
                    let p = dir.join(format!("renorm_{}.svg", r.quantity));
                    emit::emit_decay_plot(r, &p)?;
                    files.insert(p);
                }
            }
            let p = dir.join("renorm_summary.json");
            write_json(&p, &summary)?;
            files.insert(p);
        }
        Stage::Tubular => {
            let m = widest_level(&f.orb, cfg.depth);
            let (summary, rows) = tubular_outputs(&f.orb, m, None, &[TraceFrom::Endpoint, TraceFrom::Value])?;
            let p = dir.join("tubular.json");
            write_json(&p, &summary)?;
            files.insert(p);
            let p = dir.join("tubular.csv");
            write_csv(&p, &TRACE_HEADER, &rows)?;
            files.insert(p);
        }
        Stage::Conjugacy => {
            let g = g.ok_or_else(|| Error::Config("conjugacy audits need a map g".into()))?;
            let written = conjugacy_outputs(&f.orb, &g.orb, cfg.depth, cfg.band, cfg.svg, dir)?;
            files.extend(written);
        }
    }
    Ok(())
}

/// Execute the selected stages in order, writing artifacts and the
/// manifest into `cfg.out`. A failing stage halts the run; the manifest
/// still lists everything written before it.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let bits = cfg.bits()?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| Error::Config(format!("output directory {}: {e}", cfg.out.display())))?;
    let mut ctx = Ctx { f: None, g: None };
    let mut files = BTreeSet::new();
    let mut stages = Vec::new();
    let mut failure = None;
    for stage in Stage::ALL {
        if !cfg.wants(stage) {
            continue;
        }
        let t0 = Instant::now();
        let res = run_stage(stage, cfg, bits, &mut ctx, &mut files);
        let seconds = t0.elapsed().as_secs_f64();
        match res {
            Ok(()) => stages.push(StageRecord {
                stage: stage.name().into(),
                status: "ok".into(),
                seconds,
                error: None,
            }),
            Err(e) => {
                stages.push(StageRecord {
                    stage: stage.name().into(),
                    status: "error".into(),
                    seconds,
                    error: Some(e.to_string()),
                });
                failure = Some(Failure {
                    stage: stage.name().into(),
                    message: e.to_string(),
                    exit_code: exit_code(&e),
                });
                break;
            }
        }
    }
    let levels = ctx.f.as_ref().map_or(0, |f| f.orb.comb.max_level());
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        stages,
        precision: (0..=levels).map(|level| PrecisionEntry { level, bits }).collect(),
        files: inventory(&cfg.out, &files)?,
        failure,
    };
    write_json(&cfg.out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::PrecisionBudget { level: 1, required: 2, available: 1 }), 3);
        assert_eq!(
            exit_code(&Error::Budget { what: "x".into(), required: 2, budget: 1 }),
            3
        );
        assert_eq!(exit_code(&Error::Combinatorics("x".into())), 4);
        assert_eq!(exit_code(&Error::Degenerate("x".into())), 1);
    }

    #[test]
    fn empty_audit_list_writes_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_json(&format!(
            r#"{{"f": {{"family": "arnold2", "a": "0.6"}}, "target": [1, 1], "depth": 1, "out": {:?}}}"#,
            dir.path().join("out")
        ))
        .unwrap();
        let m = run(&cfg).unwrap();
        assert!(m.ok() && m.files.is_empty() && m.stages.is_empty());
        let names: Vec<_> = std::fs::read_dir(&cfg.out).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from(MANIFEST)]);
    }

    #[test]
    fn stage_failure_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        // a = 0.6 measured without tuning does not start with [5, 5].
        let cfg = RunConfig::from_json(&format!(
            r#"{{"f": {{"family": "arnold2", "a": "0.6"}}, "target": [5, 5], "depth": 1, "tune": false,
                 "audits": ["partitions"], "out": {:?}}}"#,
            dir.path().join("out")
        ))
        .unwrap();
        let m = run(&cfg).unwrap();
        let fail = m.failure.unwrap();
        assert_eq!((fail.stage.as_str(), fail.exit_code), ("partitions", 4));
        assert!(cfg.out.join(MANIFEST).exists());
    }
}
