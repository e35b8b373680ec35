use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{EvalError, Expr};
use crate::{Matrix, Vector};

pub const DEFAULT_TOL_FEAS: f64 = 1e-8;
pub const DEFAULT_TOL_ACTIVE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `q_i(x) = 0`
    Equality,
    /// `q_i(x) <= 0`
    Inequality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("problem has no constraints (E ∪ I is empty)")]
    NoConstraints,
    #[error("expression references variable {index} but only {n} are declared")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    PointArity { got: usize, expected: usize },
    #[error("problem has no `point` declaration")]
    MissingPoint,
}

#[derive(Debug, Clone)]
struct Derivatives {
    grad: Vec<Expr>,
    /// Upper triangle, `hess[i][j - i]` holds the `(i, j)` entry for `j >= i`.
    hess: Vec<Vec<Expr>>,
}

impl Derivatives {
    fn of(e: &Expr, n: usize) -> Self {
        let grad = e.gradient(n);
        let hess = (0..n)
            .map(|i| (i..n).map(|j| grad[i].differentiate(j)).collect())
            .collect();
        Self { grad, hess }
    }

    fn gradient_at(&self, x: &[f64]) -> Result<Vector, EvalError> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    fn hessian_at(&self, x: &[f64]) -> Result<Matrix, EvalError> {
        let n = self.grad.len();
        let mut h = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.hess[i][j - i].eval(x)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }
}

/// Smooth nonlinear program `min phi(x)` subject to `q_i(x) = 0` / `q_i(x) <= 0`.
///
/// Constraints are kept in file order; a constraint's position in that order
/// is its index everywhere in the crate (0-based in the API, printed 1-based as
/// `q1`, `q2`, ...). Symbolic gradients and Hessians are built once here.
#[derive(Debug, Clone)]
pub struct Problem {
    name: String,
    variables: Vec<String>,
    objective: Expr,
    constraints: Vec<Constraint>,
    point: Option<Vec<f64>>,
    obj_derivs: Derivatives,
    con_derivs: Vec<Derivatives>,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<String>,
        objective: Expr,
        constraints: Vec<Constraint>,
        point: Option<Vec<f64>>,
    ) -> Result<Self, ProblemError> {
        let n = variables.len();
        if constraints.is_empty() {
            return Err(ProblemError::NoConstraints);
        }
        for e in std::iter::once(&objective).chain(constraints.iter().map(|c| &c.expr)) {
            if let Some(index) = e.max_var().filter(|&i| i >= n) {
                return Err(ProblemError::VariableOutOfRange { index, n });
            }
        }
        if let Some(p) = &point {
            if p.len() != n {
                return Err(ProblemError::PointArity {
                    got: p.len(),
                    expected: n,
                });
            }
        }
        let obj_derivs = Derivatives::of(&objective, n);
        let con_derivs = constraints.iter().map(|c| Derivatives::of(&c.expr, n)).collect();
        Ok(Self {
            name: name.into(),
            variables,
            objective,
            constraints,
            point,
            obj_derivs,
            con_derivs,
        })
    }

    /// Same constraints and point with a replaced objective.
    pub fn with_objective(&self, objective: Expr) -> Result<Self, ProblemError> {
        Self::new(
            self.name.clone(),
            self.variables.clone(),
            objective,
            self.constraints.clone(),
            self.point.clone(),
        )
    }

    pub fn with_point(&self, point: Vec<f64>) -> Result<Self, ProblemError> {
        Self::new(
            self.name.clone(),
            self.variables.clone(),
            self.objective.clone(),
            self.constraints.clone(),
            Some(point),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn kinds(&self) -> Vec<ConstraintKind> {
        self.constraints.iter().map(|c| c.kind).collect()
    }

    /// `l1 = |E|`
    pub fn num_eq(&self) -> usize {
        self.equality_indices().len()
    }

    /// `l2 = |I|`
    pub fn num_ineq(&self) -> usize {
        self.inequality_indices().len()
    }

    pub fn equality_indices(&self) -> Vec<usize> {
        self.indices_of(ConstraintKind::Equality)
    }

    pub fn inequality_indices(&self) -> Vec<usize> {
        self.indices_of(ConstraintKind::Inequality)
    }

    fn indices_of(&self, kind: ConstraintKind) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn point(&self) -> Option<&[f64]> {
        self.point.as_deref()
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.objective.eval(x)
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Result<Vector, EvalError> {
        self.obj_derivs.gradient_at(x)
    }

    pub fn objective_hessian(&self, x: &[f64]) -> Result<Matrix, EvalError> {
        self.obj_derivs.hessian_at(x)
    }

    pub fn constraint_values(&self, x: &[f64]) -> Result<Vector, EvalError> {
        self.constraints.iter().map(|c| c.expr.eval(x)).collect()
    }

    pub fn constraint_gradient(&self, i: usize, x: &[f64]) -> Result<Vector, EvalError> {
        self.con_derivs[i].gradient_at(x)
    }

    pub fn constraint_hessian(&self, i: usize, x: &[f64]) -> Result<Matrix, EvalError> {
        self.con_derivs[i].hessian_at(x)
    }

    /// `l x n` matrix with rows `grad q_i(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix, EvalError> {
        let rows = (0..self.num_constraints())
            .map(|i| self.constraint_gradient(i, x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_rows(&rows, self.n()))
    }

    /// Largest constraint violation at `x` and the constraint attaining it.
    pub fn max_violation(&self, x: &[f64]) -> Result<(usize, f64), EvalError> {
        let vals = self.constraint_values(x)?;
        let mut worst = (0, 0.0);
        for (i, (c, v)) in self.constraints.iter().zip(&vals).enumerate() {
            let viol = match c.kind {
                ConstraintKind::Equality => v.abs(),
                ConstraintKind::Inequality => v.max(0.0),
            };
            if viol > worst.1 {
                worst = (i, viol);
            }
        }
        Ok(worst)
    }
}

/// Prints the problem in the input file format.
impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "var {}", self.variables.join(" "))?;
        writeln!(f, "min {}", self.objective.display(&self.variables))?;
        for c in &self.constraints {
            match c.kind {
                ConstraintKind::Inequality => {
                    writeln!(f, "st {} <= 0", c.expr.display(&self.variables))?
                }
                ConstraintKind::Equality => writeln!(f, "eq {} = 0", c.expr.display(&self.variables))?,
            }
        }
        if let Some(p) = &self.point {
            let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(f, "point {}", coords.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub active: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: DEFAULT_TOL_FEAS,
            active: DEFAULT_TOL_ACTIVE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("point is infeasible: constraint q{} violated by {violation:e}", constraint + 1)]
    Infeasible { constraint: usize, violation: f64 },
    #[error("evaluation failed: {0}")]
    Domain(#[from] EvalError),
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

/// First- and second-order data of a problem evaluated at a feasible point.
#[derive(Debug, Clone)]
pub struct StationaryData {
    pub point: Vector,
    pub obj_grad: Vector,
    pub obj_hess: Matrix,
    pub con_vals: Vector,
    /// Rows are `grad q_i(x)`.
    pub con_grads: Matrix,
    pub con_hess: Vec<Matrix>,
    pub kinds: Vec<ConstraintKind>,
    /// Active inequality indices `I(x)`, ascending.
    pub active_ineq: Vec<usize>,
}

impl StationaryData {
    pub fn n(&self) -> usize {
        self.point.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.kinds.len()
    }

    pub fn equality_indices(&self) -> Vec<usize> {
        (0..self.kinds.len())
            .filter(|&i| self.kinds[i] == ConstraintKind::Equality)
            .collect()
    }

    pub fn is_equality(&self, i: usize) -> bool {
        self.kinds[i] == ConstraintKind::Equality
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.is_equality(i) || self.active_ineq.binary_search(&i).is_ok()
    }

    /// `E ∪ I(x)`, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.kinds.len()).filter(|&i| self.is_active(i)).collect()
    }

    /// `sum_i lambda_i grad^2 q_i(x)`
    pub fn constraint_curvature(&self, lambda: &[f64]) -> Matrix {
        let n = self.n();
        let mut h = Matrix::zeros(n, n);
        for (hi, &l) in self.con_hess.iter().zip(lambda) {
            if l != 0.0 {
                h = h.add(&hi.scale(l));
            }
        }
        h
    }

    /// `grad^2_x L(x, lambda) = grad^2 phi(x) + sum_i lambda_i grad^2 q_i(x)`
    pub fn lagrangian_hessian(&self, lambda: &[f64]) -> Matrix {
        self.obj_hess.add(&self.constraint_curvature(lambda))
    }
}

/// Evaluates all derivative data at `x`, enforcing feasibility.
pub fn evaluate_stationary_data(
    p: &Problem,
    x: &[f64],
    tol: Tolerances,
) -> Result<StationaryData, EvaluationError> {
    if x.len() != p.n() {
        return Err(EvaluationError::Dimension {
            got: x.len(),
            expected: p.n(),
        });
    }
    let (constraint, violation) = p.max_violation(x)?;
    if violation > tol.feas {
        return Err(EvaluationError::Infeasible {
            constraint,
            violation,
        });
    }
    let con_vals = p.constraint_values(x)?;
    let kinds = p.kinds();
    let active_ineq = (0..kinds.len())
        .filter(|&i| kinds[i] == ConstraintKind::Inequality && con_vals[i].abs() <= tol.active)
        .collect();
    let con_hess = (0..p.num_constraints())
        .map(|i| p.constraint_hessian(i, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StationaryData {
        point: x.to_vec(),
        obj_grad: p.objective_gradient(x)?,
        obj_hess: p.objective_hessian(x)?,
        con_vals,
        con_grads: p.jacobian(x)?,
        con_hess,
        kinds,
        active_ineq,
    })
}

/// Worst symbolic-vs-finite-difference disagreement over a set of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub points_checked: usize,
    pub max_gradient_rel_err: f64,
    pub max_hessian_rel_err: f64,
}

fn rel_err(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}

/// Compares symbolic gradients and Hessians of every function in the problem
/// against central differences with step `h`. Points where evaluation fails
/// are skipped.
pub fn check_derivatives(p: &Problem, points: &[Vector], h: f64) -> DerivativeCheck {
    let n = p.n();
    let mut out = DerivativeCheck {
        points_checked: 0,
        max_gradient_rel_err: 0.0,
        max_hessian_rel_err: 0.0,
    };
    let value = |f: Option<usize>, x: &[f64]| match f {
        None => p.objective_value(x),
        Some(i) => p.constraints[i].expr.eval(x),
    };
    let grad = |f: Option<usize>, x: &[f64]| match f {
        None => p.objective_gradient(x),
        Some(i) => p.constraint_gradient(i, x),
    };
    let hess = |f: Option<usize>, x: &[f64]| match f {
        None => p.objective_hessian(x),
        Some(i) => p.constraint_hessian(i, x),
    };
    let funcs: Vec<Option<usize>> = std::iter::once(None)
        .chain((0..p.num_constraints()).map(Some))
        .collect();

    'points: for x in points {
        let mut g_err: f64 = 0.0;
        let mut h_err: f64 = 0.0;
        for &f in &funcs {
            let (Ok(g), Ok(hm)) = (grad(f, x), hess(f, x)) else {
                continue 'points;
            };
            for k in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let (Ok(fp), Ok(fm)) = (value(f, &xp), value(f, &xm)) else {
                    continue 'points;
                };
                g_err = g_err.max(rel_err(g[k], (fp - fm) / (2.0 * h)));
                let (Ok(gp), Ok(gm)) = (grad(f, &xp), grad(f, &xm)) else {
                    continue 'points;
                };
                for j in 0..n {
                    h_err = h_err.max(rel_err(hm[(j, k)], (gp[j] - gm[j]) / (2.0 * h)));
                }
            }
        }
        out.points_checked += 1;
        out.max_gradient_rel_err = out.max_gradient_rel_err.max(g_err);
        out.max_hessian_rel_err = out.max_hessian_rel_err.max(h_err);
    }
    out
}

/// `count` seeded points uniform in the box `center ± half_width`.
pub fn sample_box(center: &[f64], half_width: f64, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            center
                .iter()
                .map(|c| c + rng.random_range(-half_width..=half_width))
                .collect()
        })
        .collect()
}
