mod common;

use common::pipeline;
use tiltstab::fixtures;
use tiltstab::oracle::{estimate_tilt_modulus, solve_tilted, OracleConfig, SolveStatus};
use tiltstab::tilt::{tilt_verdict, TiltOptions};

#[test]
fn nlp1_tilt_along_the_free_coordinate() {
    let p = fixtures::nlp1();
    let s = solve_tilted(&p, &[0.0; 4], &[0.0, 0.0, 0.0, 1e-3], &OracleConfig::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Converged);
    let expected = [0.0, 0.0, 0.0, 1e-3];
    for (a, b) in s.point.iter().zip(expected) {
        assert!((a - b).abs() < 1e-6, "{:?}", s.point);
    }
    assert!(s.feasibility_residual <= 1e-6 && s.stationarity_residual <= 1e-6);
}

#[test]
fn reports_are_deterministic() {
    let cfg = OracleConfig {
        seed: 17,
        ..OracleConfig::default()
    };
    for p in [fixtures::nlp1(), fixtures::nlp2()] {
        let x = p.point().unwrap().to_vec();
        let a = estimate_tilt_modulus(&p, &x, &cfg, None).unwrap();
        let b = estimate_tilt_modulus(&p, &x, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kind, "empirical");
        assert_eq!(a.tilts[0].tilt, vec![0.0; 4]);
        assert!(a.untilted_matches_reference, "{}: {}", p.name(), a.untilted_deviation);
    }
}

#[test]
fn shrinking_the_tilt_radius_keeps_stable_estimates() {
    for p in [fixtures::nlp1(), fixtures::quadratic()] {
        let pl = pipeline(p.clone());
        let t = tilt_verdict(&pl.sd, &pl.poly, &pl.cq, &TiltOptions::default()).unwrap();
        let bound = t.tilt_bound.unwrap();
        let x = p.point().unwrap().to_vec();
        let mut prev = None;
        for delta in [1e-2, 1e-3, 1e-4] {
            let cfg = OracleConfig {
                delta,
                ..OracleConfig::default()
            };
            let r = estimate_tilt_modulus(&p, &x, &cfg, Some(&t)).unwrap();
            assert!(r.agreement.unwrap().agrees, "{} at delta {delta}", p.name());
            assert!(r.empirical_single_valued && r.all_converged);
            if let Some(e) = prev {
                assert!(r.lipschitz_estimate <= e + 0.25 * f64::max(bound, 0.1));
            }
            prev = Some(r.lipschitz_estimate);
        }
    }
}

#[test]
fn nlp2_minimizers_follow_the_cube_root() {
    // x4⁴/12 - v4 x4 is minimized at (3 v4)^(1/3) while that stays inside the ball
    let p = fixtures::nlp2();
    let cfg = OracleConfig::default();
    for v4 in [1e-6, 1e-5] {
        let s = solve_tilted(&p, &[0.0; 4], &[0.0, 0.0, 0.0, v4], &cfg).unwrap();
        let expected = (3.0 * v4).cbrt();
        assert!((s.point[3] - expected).abs() < 1e-4 * expected.max(1.0), "{v4}: {:?}", s.point);
    }
    let s = solve_tilted(&p, &[0.0; 4], &[0.0, 0.0, 0.0, 1e-3], &cfg).unwrap();
    assert!((s.point[3] - cfg.gamma).abs() < 1e-6, "{:?}", s.point);
}

#[test]
fn agreement_absent_without_a_stable_verdict() {
    let p = fixtures::nlp2();
    let pl = pipeline(p.clone());
    let t = tilt_verdict(&pl.sd, &pl.poly, &pl.cq, &TiltOptions::default()).unwrap();
    let r = estimate_tilt_modulus(&p, &[0.0; 4], &OracleConfig::default(), Some(&t)).unwrap();
    assert!(r.agreement.is_none());
    assert!(r.lipschitz_estimate > 10.0);
}
