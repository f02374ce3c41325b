//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fractal_avoid::analysis::brute::tuple_conflicts;
use fractal_avoid::analysis::verify::parse_patterns;
use fractal_avoid::analysis::{
    cmd_construct, cmd_demo_calibration, cmd_demo_isosceles, cmd_demo_sumset, cmd_dimension, cmd_verify, DemoKind,
    DemoSpec, Overrides,
};
use fractal_avoid::avoider::{
    avoid_single_scale, collect_conflicts, compute_intermediate_scale, random_select, verify_properties,
};
use fractal_avoid::builder::{build, BuildConfig, ConstructionTrace};
use fractal_avoid::measure::{build_measure, frostman_scan, MeasureTree};
use fractal_avoid::oracle::Budget;
use fractal_avoid::oracle::CantorProduct;
use fractal_avoid::{CubeSet, DyadicScale};
use fractal_avoid_testkit::{mean_and_se, meets_lower_bound, random_instance, read_config, Instance};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn lemma_instances() -> Vec<Instance> {
    (0..200u64)
        .map(|i| {
            let d = [1, 2][(i % 2) as usize];
            let n = [2, 3][((i / 2) % 2) as usize];
            let gap = 3 + ((i / 4) % 4) as u32;
            random_instance(1000 + i, d, n, 1, gap)
        })
        .collect()
}

fn reference_trace(seed: u64) -> ConstructionTrace {
    let mut config = BuildConfig::from_json(&read_config("reference.json")).unwrap();
    config.seed = seed;
    build(&config).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let budget = Budget::default();
    let (mut successes, mut exhaustive_f, mut exhaustive_u, mut disagreements) = (0, 0, 0, 0);
    let mut failures = Vec::new();
    for (i, inst) in lemma_instances().iter().enumerate() {
        let view = inst.view();
        let res = match avoid_single_scale(&view, 7 + i as u64, 0, 64, &budget) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        let r = res.r();
        let report = verify_properties(&view, &res.f, r).unwrap();
        if !report.all_pass() {
            failures.push(format!("instance {i}: {report:?}"));
            continue;
        }
        successes += 1;
        let hit = |t: &[u64]| inst.g.contains(t);
        if res.f.len() <= 200 {
            exhaustive_f += 1;
            let scan = collect_conflicts(&res.f, &inst.g, inst.d, inst.n).len() as u64;
            if tuple_conflicts(&res.f, inst.n, hit) != scan || scan != 0 {
                disagreements += 1;
            }
        }
        // the accepted draw before pruning
        let u = random_select(&view, r, res.seed, res.attempts as u64 - 1, &budget).unwrap();
        if u.len() <= 200 {
            exhaustive_u += 1;
            let scan = collect_conflicts(&u, &inst.g, inst.d, inst.n).len() as u64;
            if tuple_conflicts(&u, inst.n, hit) != scan || scan != res.conflicts {
                disagreements += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && disagreements == 0 && exhaustive_f > 0 && within(elapsed, 60),
        format!(
            "{successes}/200 succeeded with all properties; tuple oracle agreed on {exhaustive_f} F and {exhaustive_u} U \
             sets, {disagreements} disagreements; {:.1}s{}",
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut bad = Vec::new();
    for (i, inst) in lemma_instances().iter().enumerate() {
        let r = compute_intermediate_scale(&inst.view()).unwrap();
        let m = r.exponent() as i64;
        let ordered = inst.l.exponent() as i64 <= m && m <= inst.s.exponent() as i64;
        let at_least = meets_lower_bound(inst, m);
        let minimal = !meets_lower_bound(inst, m + 1);
        if !(ordered && at_least && minimal) {
            bad.push(format!(
                "instance {i}: r = 2^-{m}, ordered {ordered}, r >= R {at_least}, r/2 < R {minimal}"
            ));
        }
    }
    check(
        bad.is_empty(),
        format!(
            "200 instances, {} violations{}",
            bad.len(),
            bad.first().map(|b| format!("; {b}")).unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let d = 1;
    let l = DyadicScale::unit();
    let s = DyadicScale::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pairs = std::collections::BTreeSet::new();
    while pairs.len() < 1 << 13 {
        let (a, b) = (rng.gen_range(0..256u64), rng.gen_range(0..256u64));
        if a != b {
            pairs.insert([a, b]);
        }
    }
    let inst = Instance {
        d,
        n: 2,
        l,
        s,
        e: CubeSet::full(1, l, 1).unwrap(),
        g: CubeSet::from_indices(2, s, pairs).unwrap(),
    };
    let view = inst.view();
    let budget = Budget::default();
    let r = compute_intermediate_scale(&view).unwrap();
    let probes: Vec<u64> = (0..20).map(|_| rng.gen_range(0..256)).collect();
    let draws = 2000u64;
    let mut hits = vec![0u64; probes.len()];
    let mut conflicts = Vec::with_capacity(draws as usize);
    for t in 0..draws {
        let u = random_select(&view, r, 99, t, &budget).unwrap();
        for (h, &j) in hits.iter_mut().zip(&probes) {
            *h += u.contains(&[j]) as u64;
        }
        conflicts.push(collect_conflicts(&u, &inst.g, 1, 2).len() as f64);
    }
    let p = (s.exponent() as f64 - r.exponent() as f64).exp2().recip();
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let worst = hits
        .iter()
        .map(|&h| ((h as f64 / draws as f64) - p).abs() / se)
        .fold(0.0, f64::max);
    let (mean, mean_se) = mean_and_se(&conflicts);
    let half = (r.exponent() - l.exponent()) as f64 * d as f64;
    let bound = 0.5 * half.exp2();
    let elapsed = start.elapsed();
    check(
        worst <= 3.0 && mean <= bound + 3.0 * mean_se && within(elapsed, 30),
        format!(
            "r = 2^-{}, Pr(J in U) worst deviation {worst:.2} SE from {p:.5}; mean #K {mean:.3} vs {bound} + 3 x {mean_se:.3}; {:.1}s",
            r.exponent(),
            elapsed.as_secs_f64()
        ),
    )
}

fn ancestor_counts(x: &CubeSet, coarser: u32) -> HashMap<Vec<u64>, u64> {
    let shift = x.scale().exponent() - coarser;
    let mut out = HashMap::new();
    for c in x.iter() {
        *out.entry(c.iter().map(|a| a >> shift).collect()).or_insert(0) += 1;
    }
    out
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let text = read_config("reference.json");
    let trace = build(&BuildConfig::from_json(&text).unwrap()).unwrap();
    let (d, n, alpha) = (trace.d, trace.n, trace.alpha);
    let mut problems = Vec::new();
    for k in 1..=trace.levels.len() {
        let x = trace.level(k);
        let prev = trace.level(k - 1);
        let (l_prev, r, l) = (trace.l_exp(k - 1), trace.r_exp(k), trace.l_exp(k));
        let eps = trace.schedule[k - 1].epsilon;
        let per_parent = ancestor_counts(&x, l_prev);
        let nested = per_parent.keys().all(|p| prev.contains(p));
        let need = BigUint::one() << ((r - l_prev) as usize * d);
        let many = prev
            .iter()
            .all(|p| BigUint::from(2 * per_parent.get(p).copied().unwrap_or(0)) >= need);
        let spread = ancestor_counts(&x, r).values().all(|&c| c == 1);
        let growth = BigUint::from(2 * x.len()) >= BigUint::from(prev.len()) * &need;
        let exponent = ((d * n) as f64 - alpha - eps) / (d * (n - 1)) as f64;
        let r_bound = -(r as f64) <= 2.0 - l as f64 * exponent;
        let cert = &trace.certificates[k - 1];
        if !(nested && many && spread && growth && r_bound && cert.passes()) {
            problems.push(format!(
                "level {k}: nested {nested}, many {many}, spread {spread}, growth {growth}, r bound {r_bound}, certificate {}",
                cert.passes()
            ));
        }
    }
    let patterns = parse_patterns(&text).unwrap();
    let verified = cmd_verify(&trace, &patterns, &Budget::default(), 200).unwrap();
    let elapsed = start.elapsed();
    check(
        trace.levels.len() >= 2
            && trace.stopped.is_none()
            && problems.is_empty()
            && verified.clean
            && within(elapsed, 300),
        format!(
            "{} levels, scales {:?}, independent verify clean {}; {:.1}s{}",
            trace.levels.len(),
            trace.schedule.iter().map(|e| (e.l_exp, e.r_exp)).collect::<Vec<_>>(),
            verified.clean,
            elapsed.as_secs_f64(),
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Verdict {
    let trace = reference_trace(42);
    let tree = build_measure(&trace).unwrap();
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let mut problems = Vec::new();
    for (k, lvl) in tree.levels.iter().enumerate() {
        let total = lvl.masses.iter().fold(BigRational::zero(), |a, m| a + m);
        if total != one {
            problems.push(format!("level {k} sums to {total}"));
        }
        if k == 0 {
            continue;
        }
        let prev = &tree.levels[k - 1];
        let shift = lvl.scale().exponent() - prev.scale().exponent();
        let mut sums: HashMap<Vec<u64>, BigRational> = HashMap::new();
        for (c, m) in lvl.cubes.iter().zip(&lvl.masses) {
            let p: Vec<u64> = c.iter().map(|a| a >> shift).collect();
            let e = sums.entry(p).or_insert_with(BigRational::zero);
            *e = &*e + m;
        }
        for (p, m) in prev.cubes.iter().zip(&prev.masses) {
            let got = sums.get(p).cloned().unwrap_or_else(BigRational::zero);
            if &got != m {
                problems.push(format!("level {k}: children of {p:?} carry {got}, parent {m}"));
            }
        }
        let up = BigRational::from_integer(BigInt::from(
            BigUint::one() << ((trace.r_exp(k) - prev.scale().exponent()) as usize * tree.d),
        ));
        if let Some(m) = lvl.masses.iter().find(|m| *m * &up > two) {
            problems.push(format!("level {k}: mass {m} exceeds 2 (r/l)^d"));
        }
    }
    check(
        problems.is_empty(),
        format!(
            "{} levels checked exactly{}",
            tree.levels.len(),
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn log2_big(x: &BigInt) -> f64 {
    let shift = x.bits().saturating_sub(60);
    ((x >> shift).to_f64().unwrap()).log2() + shift as f64
}

/// Largest mass at each scale from the finest level alone.
fn max_mass_by_scale(tree: &MeasureTree) -> Vec<BigRational> {
    let finest = tree.levels.last().unwrap();
    let f = finest.scale().exponent();
    (0..=f)
        .map(|j| {
            let mut sums: HashMap<Vec<u64>, BigRational> = HashMap::new();
            for (c, m) in finest.cubes.iter().zip(&finest.masses) {
                let e = sums
                    .entry(c.iter().map(|a| a >> (f - j)).collect())
                    .or_insert_with(BigRational::zero);
                *e = &*e + m;
            }
            sums.into_values().max().unwrap()
        })
        .collect()
}

fn criterion_6() -> Verdict {
    let epsilon = 0.05;
    let mut constants = Vec::new();
    let mut problems = Vec::new();
    for seed in 42..47 {
        let trace = reference_trace(seed);
        let tree = build_measure(&trace).unwrap();
        let report = frostman_scan(&tree, &trace, epsilon).unwrap();
        let beta = trace.target_dimension();
        let maxes = max_mass_by_scale(&tree);
        let own = maxes
            .iter()
            .enumerate()
            .map(|(j, m)| (log2_big(m.numer()) - log2_big(m.denom()) + j as f64 * (beta - epsilon)).exp2())
            .fold(0.0, f64::max);
        if report.rows.len() != maxes.len() || (own - report.constant).abs() > 1e-9 * own {
            problems.push(format!(
                "seed {seed}: scan constant {} vs recomputed {own}",
                report.constant
            ));
        }
        if !own.is_finite() || trace.levels.len() < 2 {
            problems.push(format!("seed {seed}: constant {own}, {} levels", trace.levels.len()));
        }
        constants.push(own);
    }
    let (lo, hi) = constants
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    check(
        problems.is_empty() && hi <= 2.0 * lo,
        format!(
            "constants over seeds 42..46: {}; spread {:.3}x{}",
            constants
                .iter()
                .map(|c| format!("{c:.2}"))
                .collect::<Vec<_>>()
                .join(", "),
            hi / lo,
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn criterion_7a() -> Verdict {
    let report = cmd_dimension(&reference_trace(42));
    let slope = report.slope.unwrap_or(f64::NAN);
    check(
        (report.target - 1.0).abs() < 1e-12 && (slope - 1.0).abs() <= 0.2,
        format!("reference slope {slope:.4}, target {:.4}, tolerance 0.2", report.target),
    )
}

fn criterion_7b() -> Verdict {
    let (_, spec) = DemoSpec::from_json(&read_config("calibration.json"), None, None).unwrap();
    // the pattern dimension from its generation rule: 4^k squares of side 3^-k
    let generated = (4f64).ln() / (3f64).ln();
    let alpha_ok = (spec.config.alpha - generated).abs() < 1e-12
        && (CantorProduct::natural_dimension(3, 2, 2) - generated).abs() < 1e-12;
    let (_, report) = cmd_demo_calibration(&spec).unwrap();
    let slope = report.dimension.slope.unwrap_or(f64::NAN);
    let target = 2.0 - generated;
    check(
        alpha_ok && (report.dimension.target - target).abs() < 1e-12 && (slope - target).abs() <= 0.2,
        format!("calibration slope {slope:.4}, target {target:.4}, tolerance 0.2"),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let (kind, spec) = DemoSpec::from_json(&read_config("sumset.json"), None, None).unwrap();
    assert_eq!(kind, DemoKind::Sumset);
    let (_, r) = cmd_demo_sumset(&spec).unwrap();
    let both = r.scan.off_diagonal_checked > 0 && r.scan.diagonal_checked > 0 && r.diagonal_branch_applies;
    let elapsed = start.elapsed();
    check(
        r.clean && both && r.scan.off_diagonal_hits == 0 && r.scan.diagonal_hits == 0 && within(elapsed, 120),
        format!(
            "{} cubes at 2^-{}; {} off-diagonal and {} diagonal pairs, {} + {} hits, {} half-cell hits; {:.1}s",
            r.cubes,
            r.final_exponent,
            r.scan.off_diagonal_checked,
            r.scan.diagonal_checked,
            r.scan.off_diagonal_hits,
            r.scan.diagonal_hits,
            r.halves_hit,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let text = read_config("isosceles.json");
    let mut details = Vec::new();
    let mut ok = true;
    for curve in ["zero", "identity"] {
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["config"]["patterns"][0]["curve"]["name"] = Value::from(curve);
        let (_, spec) = DemoSpec::from_json(&v.to_string(), None, None).unwrap();
        let (_, r) = cmd_demo_isosceles(&spec).unwrap();
        if curve == "zero" {
            for s in &r.scans {
                ok &= s.leading <= 2.2 && s.consistent && !s.partial && s.exponents == (4..=9).collect::<Vec<_>>();
                details.push(format!("scan {:?} leading {:.3}", s.curve.name, s.leading));
            }
            ok &= r.scans.len() == 2;
        }
        ok &= r.clean && r.certified && r.triples.violations == 0 && r.triples.checked > 0;
        details.push(format!(
            "X for {curve}: {} cubes at 2^-{}, {} triples, {} violations",
            r.cubes, r.final_exponent, r.triples.checked, r.triples.violations
        ));
    }
    let elapsed = start.elapsed();
    check(
        ok && within(elapsed, 600),
        format!("{}; {:.1}s", details.join("; "), elapsed.as_secs_f64()),
    )
}

fn criterion_10() -> Verdict {
    let text = read_config("reference.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_construct(&text, &Overrides::default(), a.path()).unwrap();
    let rb = cmd_construct(&text, &Overrides::default(), b.path()).unwrap();
    let same_file =
        |name: &str| std::fs::read(a.path().join(name)).unwrap() == std::fs::read(b.path().join(name)).unwrap();
    let files = ["trace.json", "measure.json", "certificates.json"]
        .iter()
        .all(|f| same_file(f));
    let hashes = ra.manifest.fingerprint() == rb.manifest.fingerprint();
    check(
        files && hashes,
        format!("trace/measure/certificates identical {files}, manifest hashes identical {hashes}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7a", criterion_7a),
        ("7b", criterion_7b),
        ("8", criterion_8),
        ("9", criterion_9),
        ("10", criterion_10),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("criterion {id}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL ({detail})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
