//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use itertools::Itertools;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tiltstab::cq::{analyze_cq, CqReport, SamplingParams};
use tiltstab::model::{evaluate_stationary_data, parse_problem, ConstraintKind, Expr, Problem, StationaryData, Tolerances};
use tiltstab::multipliers::{MultiplierOptions, MultiplierPolyhedron};
use tiltstab::numerics::{rank, Sense, VarBound};
use tiltstab::{LinearProgram, Matrix};

pub struct Pipeline {
    pub problem: Problem,
    pub sd: StationaryData,
    pub poly: MultiplierPolyhedron,
    pub cq: CqReport,
}

pub fn pipeline(problem: Problem) -> Pipeline {
    let x = problem.point().expect("fixture declares a point").to_vec();
    let sd = evaluate_stationary_data(&problem, &x, Tolerances::default()).unwrap();
    let poly = MultiplierPolyhedron::for_stationarity(&sd, MultiplierOptions::default()).unwrap();
    let cq = analyze_cq(&problem, &sd, &SamplingParams::default(), 1e-9).unwrap();
    Pipeline { problem, sd, poly, cq }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `max/min c·x  s.t.  Ax = b, x >= 0`, with a row of ones so the feasible
/// set is a polytope, and `b = A x0` for some `x0 >= 0` so it is nonempty.
#[derive(Debug, Clone)]
pub struct SmallLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub sense: Sense,
}

impl SmallLp {
    pub fn to_program(&self) -> LinearProgram {
        let n = self.c.len();
        LinearProgram {
            objective: self.c.clone(),
            a: Matrix::from_rows(&self.a, n),
            b: self.b.clone(),
            bounds: vec![VarBound::NonNegative; n],
            sense: self.sense,
        }
    }
}

pub fn random_small_lp(rng: &mut ChaCha8Rng) -> SmallLp {
    let n = rng.random_range(2..=6);
    let m = rng.random_range(1..=4.min(n));
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0..=4) as f64 / 2.0).collect();
    let mut a = vec![vec![1.0; n]];
    for _ in 1..m {
        a.push((0..n).map(|_| rng.random_range(-3..=3) as f64).collect());
    }
    let b = a.iter().map(|r| dot(r, &x0)).collect();
    let c = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
    let sense = if rng.random::<bool>() { Sense::Maximize } else { Sense::Minimize };
    SmallLp { a, b, c, sense }
}

fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let k = r.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = m[row][col] / m[col][col];
                #[allow(clippy::needless_range_loop)]
                for j in col..k {
                    m[row][j] -= f * m[col][j];
                }
                r[row] -= f * r[col];
            }
        }
    }
    Some((0..k).map(|i| r[i] / m[i][i]).collect())
}

/// Optimal value by enumerating every basic feasible solution.
pub fn brute_force_optimum(lp: &SmallLp) -> Option<f64> {
    let n = lp.c.len();
    // keep a maximal independent set of rows; b = A x0 keeps them consistent
    let mut rows: Vec<usize> = Vec::new();
    for i in 0..lp.a.len() {
        let mut trial = rows.clone();
        trial.push(i);
        let sub: Vec<Vec<f64>> = trial.iter().map(|&r| lp.a[r].clone()).collect();
        if rank(&Matrix::from_rows(&sub, n), 1e-10) == trial.len() {
            rows = trial;
        }
    }
    let m = rows.len();
    let mut best: Option<f64> = None;
    for basis in (0..n).combinations(m) {
        let sq: Vec<Vec<f64>> = rows.iter().map(|&r| basis.iter().map(|&j| lp.a[r][j]).collect()).collect();
        let rhs: Vec<f64> = rows.iter().map(|&r| lp.b[r]).collect();
        let Some(xb) = solve_square(sq, rhs) else { continue };
        if xb.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let val: f64 = basis.iter().zip(&xb).map(|(&j, &v)| lp.c[j] * v).sum();
        best = Some(match (best, lp.sense) {
            (None, _) => val,
            (Some(b), Sense::Maximize) => b.max(val),
            (Some(b), Sense::Minimize) => b.min(val),
        });
    }
    best
}

fn linear_part(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        let c = rng.random_range(-2..=2);
        if c != 0 {
            s.push_str(&format!(" + {c}*x{}", i + 1));
        }
    }
    s
}

fn quadratic_part(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        for j in i..n {
            if rng.random_range(0..3) == 0 {
                let c = rng.random_range(-1..=1);
                if c != 0 {
                    s.push_str(&format!(" + {c}*x{}*x{}", i + 1, j + 1));
                }
            }
        }
    }
    s
}

/// Small polynomial program with the origin feasible, biased toward
/// degenerate gradient families (zero rows, duplicates, opposing pairs).
pub fn random_polynomial_problem(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    let vars: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut text = format!("var {}\n", vars.join(" "));
    text.push_str(&format!("min 0{}{}\n", linear_part(rng, n), quadratic_part(rng, n)));
    let k = rng.random_range(1..=4);
    let mut exprs: Vec<String> = Vec::new();
    for _ in 0..k {
        let e = if !exprs.is_empty() && rng.random_range(0..5) == 0 {
            let prev = exprs[rng.random_range(0..exprs.len())].clone();
            if rng.random::<bool>() { prev } else { format!("-({prev})") }
        } else {
            format!("0{}{}", linear_part(rng, n), quadratic_part(rng, n))
        };
        exprs.push(e.clone());
        match rng.random_range(0..4) {
            0 => text.push_str(&format!("eq {e} = 0\n")),
            1 => text.push_str(&format!("st {e} - 1 <= 0\n")),
            _ => text.push_str(&format!("st {e} <= 0\n")),
        }
    }
    text.push_str(&format!("point {}\n", vec!["0"; n].join(" ")));
    text
}

/// Random constraints with the objective `-Σ λ_i q_i + ½‖x‖²`, which makes the
/// origin stationary with multiplier `λ`.
pub fn random_stationary(rng: &mut ChaCha8Rng) -> Pipeline {
    let p = parse_problem(&random_polynomial_problem(rng)).unwrap();
    let sd = evaluate_stationary_data(&p, p.point().unwrap(), Tolerances::default()).unwrap();
    let mut obj = Expr::constant(0.0);
    for i in 0..p.n() {
        obj = Expr::add(obj, Expr::mul(Expr::constant(0.5), Expr::pow(Expr::var(i), 2)));
    }
    for (i, c) in p.constraints().iter().enumerate() {
        let lam = match c.kind {
            ConstraintKind::Equality => rng.random_range(-2..=2) as f64,
            ConstraintKind::Inequality if sd.is_active(i) => rng.random_range(0..=2) as f64,
            ConstraintKind::Inequality => 0.0,
        };
        obj = Expr::sub(obj, Expr::mul(Expr::constant(lam), c.expr.clone()));
    }
    pipeline(p.with_objective(obj).unwrap())
}

