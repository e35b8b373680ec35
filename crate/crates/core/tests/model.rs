mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tiltstab::fixtures;
use tiltstab::model::{
    check_derivatives, evaluate_stationary_data, parse_problem, sample_box, EvaluationError, Expr, Func,
    ParseErrorKind, Problem, Tolerances,
};

const NAMES: [&str; 3] = ["x1", "x2", "x3"];

fn names() -> Vec<String> {
    NAMES.iter().map(|s| s.to_string()).collect()
}

fn expr(allow_div: bool) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::constant),
        (1i32..=4).prop_map(|k| Expr::constant(k as f64)),
        (0usize..3).prop_map(Expr::var),
    ];
    leaf.prop_recursive(4, 24, 2, move |inner| {
        let basic = prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), 0i32..=3).prop_map(|(a, n)| Expr::pow(a, n)),
            (inner.clone(), prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp)])
                .prop_map(|(a, f)| Expr::call(f, a)),
        ];
        if allow_div {
            prop_oneof![
                4 => basic,
                1 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, b)),
                1 => (inner.clone(), -2i32..0).prop_map(|(a, n)| Expr::pow(a, n)),
                1 => inner.prop_map(|a| Expr::call(Func::Log, a)),
            ]
            .boxed()
        } else {
            basic.boxed()
        }
    })
}

fn problem_with_objective(e: &Expr) -> String {
    format!(
        "var x1 x2 x3\nmin {}\nst x1 <= 0\npoint 0 0 0\n",
        e.display(&names())
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_parse_roundtrip(e in expr(true)) {
        let text = problem_with_objective(&e);
        prop_assume!(!text.contains("inf") && !text.contains("NaN"));
        let p = parse_problem(&text).map_err(|err| TestCaseError::fail(format!("{err}\n{text}")))?;
        prop_assert_eq!(p.objective(), &e, "{}", text);
        let again = parse_problem(&p.to_string()).unwrap();
        prop_assert_eq!(again.objective(), p.objective());
    }

    #[test]
    fn symbolic_matches_finite_differences(e in expr(false), seed in 0u64..1000) {
        let text = problem_with_objective(&e);
        prop_assume!(!text.contains("inf") && !text.contains("NaN"));
        let p = parse_problem(&text).unwrap();
        let pts = sample_box(&[0.0; 3], 0.5, 5, seed);
        let chk = check_derivatives(&p, &pts, 1e-5);
        let scale = pts
            .iter()
            .filter_map(|x| p.objective_value(x).ok())
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(chk.max_gradient_rel_err <= 1e-6 * scale, "{} grad {:e}", text, chk.max_gradient_rel_err);
        prop_assert!(chk.max_hessian_rel_err <= 1e-5 * scale, "{} hess {:e}", text, chk.max_hessian_rel_err);
    }

    #[test]
    fn mixed_partials_commute(e in expr(false), x in prop::array::uniform3(-1.0f64..1.0)) {
        for i in 0..3 {
            for j in 0..3 {
                let a = e.differentiate(i).differentiate(j).eval(&x);
                let b = e.differentiate(j).differentiate(i).eval(&x);
                if let (Ok(a), Ok(b)) = (a, b) {
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
                }
            }
        }
    }
}

#[test]
fn fixture_derivatives_match_finite_differences() {
    for (name, src) in fixtures::ALL {
        let p = tiltstab::model::parse_problem_named(src, name).unwrap();
        let pts = sample_box(p.point().unwrap(), 0.5, 20, 3);
        let chk = check_derivatives(&p, &pts, 1e-5);
        assert_eq!(chk.points_checked, 20);
        assert!(chk.max_gradient_rel_err <= 1e-6, "{name}: {chk:?}");
        assert!(chk.max_hessian_rel_err <= 1e-6, "{name}: {chk:?}");
    }
}

#[test]
fn random_problem_hessians_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let p = parse_problem(&common::random_polynomial_problem(&mut rng)).unwrap();
        let x: Vec<f64> = sample_box(&vec![0.0; p.n()], 1.0, 1, 9).remove(0);
        let h = p.objective_hessian(&x).unwrap();
        assert_eq!(h.asymmetry(), 0.0);
        for i in 0..p.num_constraints() {
            assert_eq!(p.constraint_hessian(i, &x).unwrap().asymmetry(), 0.0);
        }
    }
}

#[test]
fn nlp1_stationary_data() {
    let p = fixtures::nlp1();
    assert_eq!((p.n(), p.num_eq(), p.num_ineq()), (4, 1, 6));
    let sd = evaluate_stationary_data(&p, &[0.0; 4], Tolerances::default()).unwrap();
    assert_eq!(sd.obj_grad, vec![0.25, 0.0, 1.0, 0.0]);
    assert_eq!(sd.active_ineq, vec![0, 1, 2, 3, 4, 5]);
    assert_eq!(sd.con_grads.row(6), &[-1.0, 1.0, 0.0, 0.0]);
    assert_eq!(sd.con_grads.row(4), &[-1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn parse_errors_carry_locations() {
    let err = parse_problem("var x\nmin x\nst x <= 0\npoint 0 1").unwrap_err();
    assert_eq!(err.line, 4);
    let err = parse_problem("var x\nmin x + y\nst x <= 0").unwrap_err();
    assert_eq!((err.line, err.kind.clone()), (2, ParseErrorKind::UnknownIdentifier("y".into())));
    assert_eq!(parse_problem("var x\nmin x").unwrap_err().kind, ParseErrorKind::NoConstraints);
}

#[test]
fn infeasible_point_names_the_constraint() {
    let p: Problem = parse_problem("var x\nmin x\nst -x <= 0\nst x - 1 <= 0\npoint 2").unwrap();
    match evaluate_stationary_data(&p, &[2.0], Tolerances::default()) {
        Err(EvaluationError::Infeasible { constraint, violation }) => {
            assert_eq!(constraint, 1);
            assert!((violation - 1.0).abs() < 1e-15);
        }
        other => panic!("{other:?}"),
    }
}
