//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::panic;
use std::time::{Duration, Instant};

use common::{brute_force_optimum, norm, pipeline, random_polynomial_problem, random_small_lp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tiltstab::cq::{analyze_cq, SamplingParams};
use tiltstab::fixtures;
use tiltstab::model::{check_derivatives, evaluate_stationary_data, parse_problem, sample_box, Tolerances};
use tiltstab::numerics::{rank, solve_lp};
use tiltstab::oracle::{estimate_tilt_modulus, OracleConfig};
use tiltstab::report::{self, AnalysisOptions, AnalysisRecord};
use tiltstab::tilt::{critical_cone, graphical_derivative_member, tilt_verdict, TiltOptions, Verdict};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn roundtrip(r: &AnalysisRecord) -> Result<(), String> {
    let back = report::parse(&report::serialize(r)).map_err(|e| e.to_string())?;
    ensure(&back == r, format!("record for {} does not round-trip", r.problem.name))
}

const PAPER_VERTICES: [[f64; 7]; 8] = [
    [3.0 / 8.0, 5.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 6.0, 0.0, 0.0, 5.0 / 12.0, 0.0, 0.0, 5.0 / 12.0],
    [1.0, 0.0, 0.0, 0.0, 5.0 / 4.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0, 5.0 / 4.0, 0.0],
    [0.0, 1.0 / 2.0, 1.0 / 4.0, 0.0, 0.0, 0.0, -1.0 / 4.0],
    [0.0, 0.0, 1.0 / 8.0, 3.0 / 8.0, 0.0, 0.0, 1.0 / 4.0],
    [0.0, 0.0, 1.0 / 2.0, 0.0, 3.0 / 4.0, 0.0, -1.0 / 2.0],
    [0.0, 0.0, 1.0 / 2.0, 0.0, 0.0, 3.0 / 4.0, -1.0 / 2.0],
];

fn criterion_1() -> Check {
    let start = Instant::now();
    let p = fixtures::nlp1();
    let rec = report::analyze(&p, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
    ensure(rec.stationarity.stationary, "not stationary")?;
    let cq = rec.cq.as_ref().ok_or("no CQ report")?;
    let w = cq.crcq.witness().ok_or("CRCQ did not fail")?;
    ensure(w.family.contains(&4) && w.family.contains(&5), format!("witness family {:?}", w.family))?;
    ensure(w.base_rank == 1 && w.other_rank == 2, "witness ranks are not 1 and 2")?;
    for radius in [1e-2, 0.1, 0.2] {
        let opts = AnalysisOptions {
            cq_radius: radius,
            ..AnalysisOptions::default()
        };
        let r = report::analyze(&p, &opts).map_err(|e| e.to_string())?;
        ensure(r.cq.unwrap().rcrcq.holds(), format!("RCRCQ fails at radius {radius}"))?;
    }
    let mu = rec.multipliers.as_ref().ok_or("no multiplier summary")?;
    ensure(mu.support_union == vec![0, 1, 2, 3, 4, 5], format!("I+ = {:?}", mu.support_union))?;

    let pl = pipeline(p.clone());
    let lt = pl.poly.support_union().unwrap().full_support.clone();
    let cone = critical_cone(&pl.sd, &pl.poly, &lt).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..100 {
        let mut v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        if k % 2 == 0 {
            v[..3].iter_mut().for_each(|x| *x = 0.0);
        } else if k % 5 == 1 {
            // one nonzero leading coordinate, just off the line
            let j = k % 3;
            v[..3].iter_mut().for_each(|x| *x = 0.0);
            v[j] = 1e-3;
        }
        let on_line = v[..3].iter().all(|&x| x == 0.0);
        ensure(cone.contains(&v) == on_line, format!("cone membership wrong at {v:?}"))?;
    }
    let t = rec.tilt.as_ref().ok_or("no tilt report")?;
    ensure(t.verdict == Verdict::TiltStable, format!("verdict {:?}", t.verdict))?;
    let bound = t.tilt_bound.ok_or("no bound")?;
    ensure((bound - 1.0).abs() <= 1e-9, format!("bound {bound}"))?;
    roundtrip(&rec)?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("bound {bound}, witness {:?}, {elapsed:.2?}", w.family))
}

fn criterion_2() -> Check {
    let pl = pipeline(fixtures::nlp1());
    let vs = pl.poly.enumerate_vertices().map_err(|e| e.to_string())?;
    ensure(vs.len() == 8, format!("{} vertices", vs.len()))?;
    for pv in PAPER_VERTICES {
        let hit = vs
            .iter()
            .filter(|v| v.iter().zip(pv).all(|(a, b)| (a - b).abs() <= 1e-8))
            .count();
        ensure(hit == 1, format!("reference vertex {pv:?} matched {hit} times"))?;
    }
    let eq = pl.sd.equality_indices();
    for v in vs {
        let mut rows = eq.clone();
        rows.extend(pl.poly.positive_support(v));
        rows.sort_unstable();
        rows.dedup();
        let sub = pl.sd.con_grads.select_rows(&rows);
        ensure(rank(&sub, 1e-8) == rows.len(), format!("dependent family at {v:?}"))?;
    }
    Ok("8 vertices match, all with independent active families".into())
}

fn criterion_3() -> Check {
    let pl = pipeline(fixtures::nlp2());
    let t = tilt_verdict(&pl.sd, &pl.poly, &pl.cq, &TiltOptions::default()).map_err(|e| e.to_string())?;
    ensure(t.verdict == Verdict::NotTiltStable, format!("verdict {:?}", t.verdict))?;
    let w = t.failure_direction.as_ref().ok_or("no failure direction")?;
    let cos = w[3].abs() / norm(w);
    ensure(cos >= 1.0 - 1e-8, format!("|cos| = {cos}"))?;
    let qf = pl.sd.lagrangian_hessian(&t.lambda_used).quad_form(w);
    ensure(qf.abs() <= 1e-9, format!("quadratic form {qf}"))?;
    ensure(t.failure_quadratic_form.map(f64::abs) <= Some(1e-9), "reported form differs")?;
    Ok(format!("|cos| = {cos}, <w, H w> = {qf:e}"))
}

fn criterion_4() -> Check {
    let pl = pipeline(fixtures::nlp1());
    let vs = pl.poly.enumerate_vertices().map_err(|e| e.to_string())?.to_vec();
    let lt = pl.poly.support_union().unwrap().full_support.clone();
    let rh = tiltstab::tilt::reduced_hessian(&pl.sd, &pl.poly, 1e-8).map_err(|e| e.to_string())?;
    let basis: Vec<Vec<f64>> = (0..rh.basis.cols()).map(|k| rh.basis.col(k)).collect();
    let mut pairs = 0;
    let mut worst = 0.0_f64;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            pairs += 1;
            let (h1, h2) = (pl.sd.lagrangian_hessian(&vs[i]), pl.sd.lagrangian_hessian(&vs[j]));
            for w in &basis {
                worst = worst.max((h1.quad_form(w) - h2.quad_form(w)).abs());
            }
        }
    }
    ensure(pairs == 28, format!("{pairs} pairs"))?;
    ensure(worst <= 1e-8, format!("forms differ by {worst:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut yes, mut no) = (0, 0);
    let mut choices = vs.clone();
    choices.push(lt);
    for k in 0..50 {
        let mut w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        if k % 3 != 0 {
            w[..3].iter_mut().for_each(|x| *x = 0.0);
        }
        let base = pl.sd.constraint_curvature(&choices[k % choices.len()]).matvec(&w);
        let mut z: Vec<f64> = base.iter().map(|b| b + rng.random_range(-1.0..1.0)).collect();
        if k % 2 == 0 {
            z[3] = base[3];
        }
        let verdicts: Vec<bool> = choices
            .iter()
            .map(|l| graphical_derivative_member(&pl.sd, &pl.poly, l, &w, &z))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure(verdicts.iter().all(|&v| v == verdicts[0]), format!("verdicts differ at probe {k}"))?;
        if verdicts[0] {
            yes += 1;
        } else {
            no += 1;
        }
    }
    ensure(yes > 0 && no > 0, "probes were all one-sided")?;
    Ok(format!("max form gap {worst:e} over 28 pairs; 50 probes ({yes} in, {no} out) agree"))
}

fn criterion_5() -> Check {
    let mut detail = Vec::new();
    for (name, p, lo, hi, expected) in [
        ("quadratic", fixtures::quadratic(), 0.4, 0.6, 0.5),
        ("nlp1", fixtures::nlp1(), 0.75, 1.25, 1.0),
    ] {
        let start = Instant::now();
        let opts = AnalysisOptions {
            oracle: Some(OracleConfig::default()),
            ..AnalysisOptions::default()
        };
        let rec = report::analyze(&p, &opts).map_err(|e| e.to_string())?;
        let bound = rec.tilt.as_ref().and_then(|t| t.tilt_bound).ok_or("no bound")?;
        if name == "quadratic" {
            ensure(bound == expected, format!("quadratic bound {bound}"))?;
        } else {
            ensure((bound - expected).abs() <= 1e-9, format!("{name} bound {bound}"))?;
        }
        let est = rec.oracle.as_ref().ok_or("no oracle report")?.lipschitz_estimate;
        ensure((lo..=hi).contains(&est), format!("{name} estimate {est}"))?;
        roundtrip(&rec)?;
        let elapsed = start.elapsed();
        ensure(elapsed < Duration::from_secs(60), format!("{name} took {elapsed:?}"))?;
        detail.push(format!("{name} bound {bound} est {est:.6} ({elapsed:.2?})"));
    }
    Ok(detail.join("; "))
}

fn criterion_6() -> Check {
    let p = fixtures::nlp2();
    let x = p.point().unwrap().to_vec();
    let mut ests = Vec::new();
    for delta in [1e-2, 1e-3, 1e-4] {
        let cfg = OracleConfig {
            delta,
            ..OracleConfig::default()
        };
        let r = estimate_tilt_modulus(&p, &x, &cfg, None).map_err(|e| e.to_string())?;
        ests.push(r.lipschitz_estimate);
    }
    ensure(ests.windows(2).all(|w| w[1] > w[0]), format!("not increasing: {ests:?}"))?;
    ensure(ests[2] > 5.0 * ests[0], format!("growth too small: {ests:?}"))?;
    Ok(format!("estimates {:.3} < {:.3} < {:.3}", ests[0], ests[1], ests[2]))
}

fn criterion_7() -> Check {
    let mut worst = 0.0_f64;
    for p in fixtures::ALL.iter().map(|(name, src)| tiltstab::model::parse_problem_named(src, name).unwrap()) {
        let pts = sample_box(p.point().unwrap(), 0.5, 20, 7);
        let chk = check_derivatives(&p, &pts, 1e-5);
        ensure(chk.points_checked == 20, format!("{}: {} points evaluated", p.name(), chk.points_checked))?;
        worst = worst.max(chk.max_gradient_rel_err).max(chk.max_hessian_rel_err);
    }
    ensure(worst <= 1e-6, format!("derivative error {worst:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut lp_gap = 0.0_f64;
    for _ in 0..100 {
        let lp = random_small_lp(&mut rng);
        let brute = brute_force_optimum(&lp).ok_or("brute force found no vertex")?;
        let got = solve_lp(&lp.to_program()).map_err(|e| e.to_string())?;
        let v = got.value().ok_or_else(|| format!("simplex returned {got:?} for {lp:?}"))?;
        lp_gap = lp_gap.max((v - brute).abs());
    }
    ensure(lp_gap <= 1e-8, format!("LP value gap {lp_gap:e}"))?;

    let mut records = 0;
    for k in 0..100 {
        let text = random_polynomial_problem(&mut rng);
        let p = parse_problem(&text).map_err(|e| format!("{e}\n{text}"))?;
        let sd = evaluate_stationary_data(&p, p.point().unwrap(), Tolerances::default()).map_err(|e| e.to_string())?;
        let cq = analyze_cq(&p, &sd, &SamplingParams::default(), 1e-9).map_err(|e| e.to_string())?;
        if cq.licq {
            ensure(cq.mfcq.holds && cq.crcq.holds(), format!("LICQ without MFCQ/CRCQ on problem {k}:\n{text}"))?;
        }
        if cq.crcq.holds() {
            ensure(cq.rcrcq.holds(), format!("CRCQ without RCRCQ on problem {k}:\n{text}"))?;
        }
        let rec = report::analyze(&p, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
        roundtrip(&rec)?;
        records += 1;
    }
    for (name, src) in fixtures::ALL {
        let p = tiltstab::model::parse_problem_named(src, name).unwrap();
        roundtrip(&report::analyze(&p, &AnalysisOptions::default()).map_err(|e| e.to_string())?)?;
        records += 1;
    }
    Ok(format!(
        "derivative err {worst:.1e}, LP gap {lp_gap:.1e}, 100 CQ diagrams, {records} records round-trip"
    ))
}

fn criterion_8() -> Check {
    let pl = pipeline(fixtures::nlp1());
    let mut worst = 0.0_f64;
    for v in pl.poly.enumerate_vertices().map_err(|e| e.to_string())? {
        let c = pl.poly.support_gradient_combination(v).map_err(|e| e.to_string())?;
        worst = worst.max(c.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    }
    ensure(worst <= 1e-8, format!("combination norm {worst:e}"))?;
    Ok(format!("max |combination| = {worst:e} over 8 vertices"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("nlp1 reproduction", criterion_1),
        ("extreme multipliers", criterion_2),
        ("nlp2 reproduction", criterion_3),
        ("multiplier independence", criterion_4),
        ("oracle agreement", criterion_5),
        ("oracle divergence", criterion_6),
        ("property suites", criterion_7),
        ("support combination", criterion_8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(d) => println!("criterion {} ({name}): PASS  {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL  {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
