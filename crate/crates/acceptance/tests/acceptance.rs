//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use circle_renorm::conjugacy::{
    build_conjugacy, criterion_audit, endpoint_gap_audit, fundamental_ratio_audit, signature,
};
use circle_renorm::maps::{iterate_with_jet, schwarzian, BiCriticalMap, CircleLift, MapSpec};
use circle_renorm::numerics::{CirclePoint, Real};
use circle_renorm::partitions::{classical_partition, two_bridges_sequence};
use circle_renorm::renorm::{
    branch_sup_difference, chi, convergence_probe, pair_at_level, renormalize, schwarzian_audit, DEFAULT_CHI_CAP,
};
use circle_renorm::rotation::{
    convergents, convergents_in, partial_quotients_by_returns, ContinuedFraction, CriticalOrbit, DEFAULT_BUDGET,
};
use circle_renorm::tubular::{
    analyze_level, model_orbit, riccati_crossing_time, tunnel_bound_check, CenterSide, TraceOptions,
    DEFAULT_TUBULAR_GRID,
};
use circle_renorm::AdaptiveReal;
use circle_renorm_cli::config::RunConfig;
use circle_renorm_cli::pipeline::{self, Subject, MANIFEST};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const P: u32 = 512;

type Outcome = Result<String, String>;

fn bound(e: i32) -> f64 {
    2f64.powi(e - P as i32)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(t: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if t <= limit {
        Ok(())
    } else {
        Err(format!("{what} took {t:.1?}, limit {limit:?}"))
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

struct Maps {
    golden: Option<Subject>,
    thirty: Option<Subject>,
}

fn arnold() -> MapSpec {
    MapSpec::arnold("0.6")
}

fn tune(target: &[u64]) -> Result<Subject, String> {
    let cf = ContinuedFraction::new(target.to_vec()).map_err(e)?;
    pipeline::tune_subject(&arnold(), &cf, 6, P, DEFAULT_BUDGET).map_err(e)
}

fn need<'a>(s: &'a Option<Subject>, name: &str) -> Result<&'a Subject, String> {
    s.as_ref().ok_or_else(|| format!("{name} map was not tuned"))
}

fn c1_continued_fractions() -> Outcome {
    let t0 = Instant::now();
    let t = convergents(&ContinuedFraction::new(vec![1; 12]).map_err(e)?);
    let fib = [1i128, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233];
    let q: Vec<i128> = (0..=12).map(|k| t.q(k)).collect();
    if q != fib {
        return Err(format!("q = {q:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..1000 {
        let len = rng.gen_range(1..=40);
        let quotients: Vec<u64> = (0..len).map(|_| rng.gen_range(1..=1000)).collect();
        let t = convergents_in::<BigInt>(&ContinuedFraction::new(quotients.clone()).map_err(e)?);
        for k in 1..t.len() {
            let det = t.p(k) * t.q(k - 1) - t.p(k - 1) * t.q(k);
            let sign = if k % 2 == 0 { -1 } else { 1 };
            if det != BigInt::from(sign) {
                return Err(format!("trial {trial}: det at k = {k} is {det} for {quotients:?}"));
            }
        }
    }
    within(t0.elapsed(), Duration::from_secs(1), "criterion")?;
    Ok(format!("q_12 = {}, 1000 determinants exact, {:.2?}", q[12], t0.elapsed()))
}

fn c2_tuning(maps: &mut Maps) -> Outcome {
    let t0 = Instant::now();
    let mut notes = Vec::new();
    for (target, slot) in [(vec![1u64; 12], &mut maps.golden), (vec![1, 1, 1, 30, 1, 1], &mut maps.thirty)] {
        let s = tune(&target)?;
        let map = BiCriticalMap::arnold_bicritical(s.a.clone()).map_err(e)?;
        let comb = partial_quotients_by_returns(&map, target.len(), DEFAULT_BUDGET).map_err(e)?;
        if comb.cf.quotients != target {
            return Err(format!("returns give {:?} for target {target:?}", comb.cf.quotients));
        }
        notes.push(format!("{target:?} at a = {:.12}", s.a.to_f64()));
        *slot = Some(s);
    }
    within(t0.elapsed(), Duration::from_secs(600), "tuning")?;
    Ok(format!("{}, {:.1?}", notes.join("; "), t0.elapsed()))
}

fn c3_partitions(maps: &Maps) -> Outcome {
    let t0 = Instant::now();
    let orb = &need(&maps.golden, "golden")?.orb;
    let tol = bound(12);
    let mut worst = 0f64;
    let mut prev = None;
    for n in 1..=12 {
        let p = classical_partition(orb, n).map_err(e)?;
        let expected = (orb.q(n) + orb.q(n + 1)) as usize;
        if p.atom_count() != expected {
            return Err(format!("level {n}: {} atoms, expected {expected}", p.atom_count()));
        }
        let d = p.coverage_defect().to_f64();
        worst = worst.max(d);
        if d >= tol {
            return Err(format!("level {n}: coverage defect {d:e}"));
        }
        if let Some(c) = &prev {
            if !p.nesting_in(c).holds() {
                return Err(format!("level {n} is not nested in level {}", n - 1));
            }
        }
        prev = Some(p);
    }
    let seq = two_bridges_sequence(orb, 12).map_err(e)?;
    for w in seq.windows(2).skip(1) {
        let (c, f) = (&w[0].partition, &w[1].partition);
        if !f.nesting_in(c).holds() {
            return Err(format!("two-bridges level {} is not nested", w[1].level()));
        }
    }
    within(t0.elapsed(), Duration::from_secs(300), "partitions")?;
    Ok(format!("max coverage defect {worst:e}, {:.1?}", t0.elapsed()))
}

fn c4_master_oracle(maps: &Maps) -> Outcome {
    let tol = bound(20);
    let mut worst = 0f64;
    for (name, s) in [("golden", &maps.golden), ("a=30", &maps.thirty)] {
        let orb = &need(s, name)?.orb;
        for n in 1..=8 {
            let p = pair_at_level(orb, n).map_err(e)?;
            let r = renormalize(&p, DEFAULT_CHI_CAP).map_err(e)?;
            let q = pair_at_level(orb, n + 1).map_err(e)?;
            let d = branch_sup_difference(&r.pair, &q.pair, 1024).to_f64();
            worst = worst.max(d);
            if !(d <= tol) {
                return Err(format!("{name}, n = {n}: sup difference {d:e} > {tol:e}"));
            }
        }
    }
    Ok(format!("max sup difference {worst:e} (bound {tol:e})"))
}

fn c5_chi(maps: &Maps) -> Outcome {
    let mut levels = 0;
    for (name, s) in [("golden", &maps.golden), ("a=30", &maps.thirty)] {
        let orb = &need(s, name)?.orb;
        for n in 1..orb.comb.max_level() - 1 {
            let p = pair_at_level(orb, n).map_err(e)?;
            let c = chi(&p.pair, DEFAULT_CHI_CAP).map_err(e)? as u64;
            if c != orb.a(n + 1) {
                return Err(format!("{name}, n = {n}: chi = {c}, a_{} = {}", n + 1, orb.a(n + 1)));
            }
            levels += 1;
        }
    }
    Ok(format!("{levels} levels agree, including chi = 30"))
}

fn c6_schwarzian(maps: &Maps) -> Outcome {
    let s = need(&maps.golden, "golden")?;
    let f = s.orb.map.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tol = bound(16);
    let mut worst = 0f64;
    for _ in 0..100 {
        let x = CirclePoint::new(AdaptiveReal::new(P, rng.gen::<f64>()));
        let (k, m) = (rng.gen_range(1..=13u64), rng.gen_range(1..=13u64));
        let inner = iterate_with_jet(&*f, &x, m).map_err(e)?;
        let outer = iterate_with_jet(&*f, &inner.value, k).map_err(e)?;
        let whole = iterate_with_jet(&*f, &x, k + m).map_err(e)?;
        let (so, si, sw) = (
            schwarzian(&outer).map_err(e)?,
            schwarzian(&inner).map_err(e)?,
            schwarzian(&whole).map_err(e)?,
        );
        let chain = so.clone() * inner.d1.clone() * inner.d1.clone() + si.clone();
        let scale = sw.abs().max_of(so.abs() * inner.d1.clone() * inner.d1.clone() + si.abs());
        let rel = ((sw - chain).abs() / scale).to_f64();
        worst = worst.max(rel);
    }
    if !(worst <= tol) {
        return Err(format!("composition residual {worst:e} > {tol:e}"));
    }
    let audit = schwarzian_audit(&s.orb, 1..=12, 64).map_err(e)?;
    match audit.n1 {
        Some(n1) if n1 <= 6 => Ok(format!("composition residual {worst:e}; negative from n1 = {n1}")),
        other => Err(format!("n1 = {other:?}, levels {:?}", audit.levels)),
    }
}

fn c7_funnel() -> Outcome {
    let t0 = Instant::now();
    let s = model_orbit(0.01f64, 10_000, |s| s - s * s);
    let mut worst = 0f64;
    for (i, x) in s.iter().enumerate().skip(100) {
        worst = worst.max((x * (i as f64 + 100.0) - 1.0).abs());
    }
    if worst > 0.05 {
        return Err(format!("max |s_i (i + 100) - 1| = {worst}"));
    }
    let s0 = AdaptiveReal::parse_at("0.01", P).ok_or("parse")?;
    let one = AdaptiveReal::from_i64_at(1, P);
    let m = model_orbit(s0.clone(), 10_000, |s| s.clone() / (one.clone() + s.clone()));
    let mut moebius = 0f64;
    for (i, x) in m.iter().enumerate() {
        let exact = s0.clone() / (one.clone() + s0.int(i as i64) * s0.clone());
        moebius = moebius.max((x.clone() - exact).abs().to_f64());
    }
    let tol = bound(40);
    if !(moebius <= tol) {
        return Err(format!("Möbius residual {moebius:e} > {tol:e}"));
    }
    within(t0.elapsed(), Duration::from_secs(1), "criterion")?;
    Ok(format!("funnel deviation {worst:.4}, Möbius residual {moebius:e}, {:.2?}", t0.elapsed()))
}

fn c8_tunnel() -> Outcome {
    let t0 = Instant::now();
    let eps = AdaptiveReal::parse_at("1e-6", P).ok_or("parse")?;
    let zero = AdaptiveReal::from_i64_at(0, P);
    let step = |s: &AdaptiveReal| eps.clone() + s.clone() + s.clone() * s.clone();
    let s = model_orbit(zero, 1600, step);
    let rep = tunnel_bound_check(&s, &eps, 1.0, 1.0).map_err(e)?;
    let rel = rep.max_relative_error_upto(0.8 * rep.n_bound);
    if !(rel <= 1e-2) {
        return Err(format!("relative error {rel:e} up to 0.8 N = {:.0}", 0.8 * rep.n_bound));
    }
    let mut notes = vec![format!("tan law {rel:.2e} up to i = {:.0}", 0.8 * rep.n_bound)];
    for x in ["1e-4", "1e-6"] {
        let eps = AdaptiveReal::parse_at(x, P).ok_or("parse")?;
        let half = AdaptiveReal::parse_at("0.5", P).ok_or("parse")?;
        let count = riccati_crossing_time(&eps, &half, 1 << 24).map_err(e)?;
        let dev = (count as f64 * eps.to_f64().sqrt() - std::f64::consts::PI).abs() / std::f64::consts::PI;
        if dev > 0.10 {
            return Err(format!("eps = {x}: crossing {count}, deviation {dev}"));
        }
        notes.push(format!("eps = {x}: crossing {count} ({:.2}%)", 100.0 * dev));
    }
    within(t0.elapsed(), Duration::from_secs(5), "criterion")?;
    Ok(format!("{}, {:.2?}", notes.join("; "), t0.elapsed()))
}

fn c9_tubular(maps: &Maps) -> Outcome {
    let orb = &need(&maps.thirty, "a=30")?.orb;
    let m = (0..orb.comb.max_level()).find(|&m| orb.a(m + 1) == 30).ok_or("no level with a_{m+1} = 30")?;
    let an = analyze_level(orb, m, None, DEFAULT_TUBULAR_GRID, &TraceOptions::default()).map_err(e)?;
    let c = an.set.center(CenterSide::Z).ok_or("no Z center")?;
    let d1 = (c.d1.clone() - c.d1.int(1)).abs().to_f64();
    let d2 = c.d2.to_f64();
    let (r1, r2) = (an.chart.residual_d1.to_f64(), an.chart.residual_d2.to_f64());
    check(
        d1 <= bound(24) && d2 < 0.0 && r1 <= bound(20) && r2 <= bound(20),
        format!("m = {m}, L = {}: |DF - 1| = {d1:e}, D2F = {d2:.4}, chart residuals {r1:e}, {r2:e}", an.l),
    )
}

fn zero_audits<F, G>(f: &CriticalOrbit<AdaptiveReal, F>, g: &CriticalOrbit<AdaptiveReal, G>, depth: usize) -> Result<(), String>
where
    F: CircleLift<AdaptiveReal> + 'static,
    G: CircleLift<AdaptiveReal> + 'static,
{
    let h = build_conjugacy(f, g, depth).map_err(e)?;
    let crit = criterion_audit(&h, depth).map_err(e)?;
    if !crit.decay.all_zero() {
        return Err(format!("criterion {:?}", crit.decay.values));
    }
    let gap = endpoint_gap_audit(&h, depth - 1, 0.5).map_err(e)?;
    if gap.cells.iter().any(|c| c.value.is_some_and(|v| v != 0.0))
        || !gap.free_critical.all_zero()
        || gap.by_offset.iter().any(|(_, r)| !r.all_zero())
    {
        return Err("endpoint gaps are not all zero".into());
    }
    for s in fundamental_ratio_audit(&h, depth).map_err(e)? {
        if !s.raw.all_zero() || !s.recentred.all_zero() {
            return Err(format!("fundamental ratio at {:?}: {:?}", s.base, s.raw.values));
        }
    }
    Ok(())
}

fn c10_zero_cases(maps: &Maps) -> Outcome {
    let s = need(&maps.golden, "golden")?;
    let depth = 10;
    zero_audits(&s.orb, &s.orb, depth).map_err(|m| format!("g = f: {m}"))?;
    let half = AdaptiveReal::parse_at("0.5", P).ok_or("parse")?;
    let shifted = BiCriticalMap::arnold_bicritical(s.a.clone()).map_err(e)?.with_shift(half);
    let comb = partial_quotients_by_returns(&shifted, depth + 3, DEFAULT_BUDGET).map_err(e)?;
    let g = CriticalOrbit::from_parts(Arc::new(shifted), comb, DEFAULT_BUDGET).map_err(e)?;
    zero_audits(&s.orb, &g, depth).map_err(|m| format!("half-turn conjugate: {m}"))?;
    Ok(format!("all audits exactly zero to depth {depth} for g = f and the half-turn conjugate"))
}

fn perturbed(coeffs: &[f64]) -> Result<Subject, String> {
    let cf = ContinuedFraction::new(vec![1; 12]).map_err(e)?;
    pipeline::tune_subject(&MapSpec::perturbed("0.6", coeffs), &cf, 6, P, DEFAULT_BUDGET).map_err(e)
}

fn c11_headline(maps: &Maps) -> Outcome {
    let t0 = Instant::now();
    let depth = 10;
    let f = need(&maps.golden, "golden")?;
    let g = perturbed(&[0.01])?;
    let h = build_conjugacy(&f.orb, &g.orb, depth).map_err(e)?;
    let crit = criterion_audit(&h, depth).map_err(e)?;
    let d = &crit.decay;
    let series: Vec<String> = d.values.iter().map(|(n, v)| format!("D_{n} = {v:.4e}")).collect();
    println!("    {}", series.join(", "));
    if let Some(fit) = &d.fit {
        println!("    fit: C = {:.4e}, lambda = {:.4}, rms = {:.3e}", fit.c, fit.lambda, fit.residual);
    }
    let (sf, sg) = (signature(&f.orb).map_err(e)?, signature(&g.orb).map_err(e)?);
    println!(
        "    signature: delta0(f) = {:.6}, delta0(g) = {:.6}, error bar {:.2e}",
        sf.delta0_f64, sg.delta0_f64, sg.error_bar
    );
    let probe = convergence_probe(&f.orb, &g.orb, 1..=depth, 2, 1024).map_err(e)?;
    let d2: Vec<String> = probe.distance.values.iter().map(|(n, v)| format!("{n}: {v:.3e}")).collect();
    println!("    d2 probe: {}", d2.join(", "));
    let same = perturbed(&[0.0, 0.01])?;
    let hs = build_conjugacy(&f.orb, &same.orb, depth).map_err(e)?;
    let cs = criterion_audit(&hs, depth).map_err(e)?;
    println!(
        "    info, same-signature variant coeffs [0, 0.01]: D_4 = {:.4e}, D_10 = {:.4e}",
        cs.decay.value_at(4).unwrap_or(f64::NAN),
        cs.decay.value_at(depth).unwrap_or(f64::NAN)
    );
    let (d4, d10) = (d.value_at(4).unwrap_or(f64::NAN), d.value_at(depth).unwrap_or(f64::NAN));
    within(t0.elapsed(), Duration::from_secs(1800), "criterion")?;
    check(
        d.all_finite() && d.fit.is_some() && d10 < d4,
        format!(
            "finite {}, fit {}, D_4 = {d4:.4e}, D_10 = {d10:.4e}, {:.1?}",
            d.all_finite(),
            d.fit.is_some(),
            t0.elapsed()
        ),
    )
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden_demo.json")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        out.insert(name, std::fs::read(entry.path()).unwrap_or_default());
    }
    out
}

fn c12_determinism() -> Outcome {
    let base = RunConfig::load(&demo_config()).map_err(e)?;
    let mut runs = Vec::new();
    let mut manifests = Vec::new();
    let tmp = tempfile::tempdir().map_err(e)?;
    for k in 0..2 {
        let mut cfg = base.clone();
        cfg.out = tmp.path().join(format!("run{k}"));
        let m = pipeline::run(&cfg).map_err(e)?;
        if let Some(f) = &m.failure {
            return Err(format!("run {k}: stage {} failed: {}", f.stage, f.message));
        }
        manifests.push(serde_json::to_string(&m.files).map_err(e)?);
        runs.push(files(&cfg.out));
    }
    let data = |m: &BTreeMap<String, Vec<u8>>| -> Vec<String> {
        m.keys().filter(|k| k.ends_with(".csv") || k.ends_with(".json")).cloned().collect()
    };
    let names = data(&runs[0]);
    if names != data(&runs[1]) {
        return Err("the two runs wrote different file sets".into());
    }
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| n.as_str() != MANIFEST && runs[0][*n] != runs[1][*n])
        .collect();
    if !differing.is_empty() {
        return Err(format!("differing outputs: {differing:?}"));
    }
    check(
        manifests[0] == manifests[1],
        format!(
            "{} CSV/JSON outputs byte-identical; manifest inventories equal (manifest itself carries timings)",
            names.len() - 1
        ),
    )
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let mut maps = Maps { golden: None, thirty: None };
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = t0.elapsed();
        match res {
            Ok(d) => println!("PASS {id:>2} {name}: {d} [{took:.1?}]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {d} [{took:.1?}]");
            }
        }
    };
    report(1, "continued fractions", &mut c1_continued_fractions);
    report(2, "tuning", &mut || c2_tuning(&mut maps));
    report(3, "partition validity", &mut || c3_partitions(&maps));
    report(4, "renormalization master oracle", &mut || c4_master_oracle(&maps));
    report(5, "chi consistency", &mut || c5_chi(&maps));
    report(6, "schwarzian", &mut || c6_schwarzian(&maps));
    report(7, "funnel law", &mut c7_funnel);
    report(8, "tunnel law", &mut c8_tunnel);
    report(9, "tubular centers", &mut || c9_tubular(&maps));
    report(10, "conjugacy zero cases", &mut || c10_zero_cases(&maps));
    report(11, "headline measurement", &mut || c11_headline(&maps));
    report(12, "determinism", &mut c12_determinism);
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
