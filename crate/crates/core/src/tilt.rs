//! Critical cone, normal-cone graphical derivative and the pointbased
//! tilt-stability verdict.
//!
//! Under RCRCQ a stationary point `x̄` is tilt-stable iff the Lagrangian
//! Hessian `∇²ₓL(x̄, λ)` is positive definite on
//! `S = {w : <∇q_i(x̄), w> = 0, i in E ∪ I+}` for some (equivalently every)
//! multiplier `λ`, and the exact bound is `sup_{w in S} ‖w‖² / <w, ∇²ₓL w>`,
//! i.e. `1 / λ_min(Bᵀ ∇²ₓL B)` for an orthonormal basis `B` of `S`
//! (`0` when `S = {0}`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cq::CqReport;
use crate::model::StationaryData;
use crate::multipliers::{MultiplierError, MultiplierPolyhedron};
use crate::numerics::{dot, norm2 as norm, null_space_orthonormal, solve_lp, sym_eig_min, NumericsError, VarBound};
use crate::{LinearProgram, Matrix, Vector};

/// Inner-product tolerance for cone sign checks, relative to `max(1, ‖v‖)`.
pub const TOL_CONE: f64 = 1e-8;
/// Non-positive `λ_min` within this band of zero is flagged as marginal.
pub const MARGINAL_BAND: f64 = 1e-6;
/// Agreement threshold for the reduced Hessian across multipliers.
pub const TOL_MULTIPLIER_INDEPENDENCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TiltError {
    #[error("point is not stationary (multiplier set is empty)")]
    NotStationary,
    #[error("vector is not a multiplier for this point (violation {0:e})")]
    NotMultiplier(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Multipliers(#[from] MultiplierError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltOptions {
    /// `λ_min` must exceed this for a tilt-stable verdict.
    pub tol_pos: f64,
    pub tol_rank: f64,
}

impl Default for TiltOptions {
    fn default() -> Self {
        Self {
            tol_pos: crate::multipliers::DEFAULT_TOL_POS,
            tol_rank: crate::numerics::DEFAULT_TOL_RANK,
        }
    }
}

/// `K(x, x*) = {v : <∇q_i, v> = 0 (i in E ∪ I+(λ)), <∇q_i, v> <= 0 (i in I(x) \ I+(λ))}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCone {
    pub equality_rows: Vec<usize>,
    pub inequality_rows: Vec<usize>,
    gradients: Matrix,
    pub base_point: Vector,
    pub lambda: Vector,
}

impl CriticalCone {
    fn tol(v: &[f64]) -> f64 {
        TOL_CONE * norm(v).max(1.0)
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        self.gradients.row(i)
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        let tol = Self::tol(v);
        self.equality_rows
            .iter()
            .all(|&i| dot(self.gradient(i), v).abs() <= tol)
            && self
                .inequality_rows
                .iter()
                .all(|&i| dot(self.gradient(i), v) <= tol)
    }

    /// `y ∈ N_K(w)`; false whenever `w ∉ K`.
    pub fn normal_cone_contains(&self, w: &[f64], y: &[f64]) -> Result<bool, TiltError> {
        if !self.contains(w) {
            return Ok(false);
        }
        let tol = Self::tol(w);
        let mut cols: Vec<(usize, VarBound)> =
            self.equality_rows.iter().map(|&i| (i, VarBound::Free)).collect();
        cols.extend(
            self.inequality_rows
                .iter()
                .filter(|&&i| dot(self.gradient(i), w) >= -tol)
                .map(|&i| (i, VarBound::NonNegative)),
        );
        let n = y.len();
        let mut a = Matrix::zeros(n, cols.len());
        for (c, &(i, _)) in cols.iter().enumerate() {
            for r in 0..n {
                a[(r, c)] = self.gradients[(i, r)];
            }
        }
        let lp = LinearProgram::feasibility(a, y.to_vec(), cols.iter().map(|c| c.1).collect());
        Ok(solve_lp(&lp)?.is_optimal())
    }
}

fn require_member(poly: &MultiplierPolyhedron, lambda: &[f64]) -> Result<(), TiltError> {
    if poly.is_empty() {
        return Err(TiltError::NotStationary);
    }
    let v = poly.violation(lambda);
    if v > crate::multipliers::TOL_MEMBER {
        return Err(TiltError::NotMultiplier(v));
    }
    Ok(())
}

/// The critical cone in the representation induced by the multiplier `lambda`.
pub fn critical_cone(
    sd: &StationaryData,
    poly: &MultiplierPolyhedron,
    lambda: &[f64],
) -> Result<CriticalCone, TiltError> {
    require_member(poly, lambda)?;
    let support = poly.positive_support(lambda);
    let mut equality_rows = sd.equality_indices();
    equality_rows.extend(&support);
    equality_rows.sort_unstable();
    let inequality_rows = sd
        .active_ineq
        .iter()
        .copied()
        .filter(|i| !support.contains(i))
        .collect();
    Ok(CriticalCone {
        equality_rows,
        inequality_rows,
        gradients: sd.con_grads.clone(),
        base_point: sd.point.clone(),
        lambda: lambda.to_vec(),
    })
}

/// `z ∈ DN_Γ(x, x*)(w) = ∇²<λ, q>(x) w + N_K(w)`.
pub fn graphical_derivative_member(
    sd: &StationaryData,
    poly: &MultiplierPolyhedron,
    lambda: &[f64],
    w: &[f64],
    z: &[f64],
) -> Result<bool, TiltError> {
    if w.len() != sd.n() || z.len() != sd.n() {
        return Err(TiltError::Dimension(format!(
            "w has {}, z has {} entries, expected {}",
            w.len(),
            z.len(),
            sd.n()
        )));
    }
    let cone = critical_cone(sd, poly, lambda)?;
    let hw = sd.constraint_curvature(lambda).matvec(w);
    let residual: Vector = z.iter().zip(&hw).map(|(a, b)| a - b).collect();
    cone.normal_cone_contains(w, &residual)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedHessian {
    /// `Bᵀ ∇²ₓL(x̄, λ) B`
    pub matrix: Matrix,
    /// Orthonormal basis of `{w : <∇q_i, w> = 0, i in E ∪ I+}` as columns.
    pub basis: Matrix,
    pub lambda: Vector,
}

fn project(basis: &Matrix, h: &Matrix) -> Matrix {
    let r = basis.transpose().matmul(&h.matmul(basis));
    r.add(&r.transpose()).scale(0.5)
}

/// Lagrangian Hessian at the full-support multiplier, reduced to the
/// subspace cut out by `E ∪ I+`.
pub fn reduced_hessian(
    sd: &StationaryData,
    poly: &MultiplierPolyhedron,
    tol_rank: f64,
) -> Result<ReducedHessian, TiltError> {
    if poly.is_empty() {
        return Err(TiltError::NotStationary);
    }
    let su = poly.support_union()?;
    let mut rows = sd.equality_indices();
    rows.extend(&su.indices);
    rows.sort_unstable();
    let basis = null_space_orthonormal(&sd.con_grads.select_rows(&rows), tol_rank);
    let lambda = su.full_support.clone();
    let matrix = project(&basis, &sd.lagrangian_hessian(&lambda));
    Ok(ReducedHessian {
        matrix,
        basis,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TiltStable,
    NotTiltStable,
    /// RCRCQ failed; the second-order test carries no guarantee.
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::TiltStable => "tilt-stable",
            Verdict::NotTiltStable => "not tilt-stable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltReport {
    pub stationary: bool,
    pub verdict: Verdict,
    /// Exact bound of tilt stability; present iff the verdict is tilt-stable.
    pub tilt_bound: Option<f64>,
    /// Smallest eigenvalue of the reduced Hessian (`None` for a trivial subspace).
    pub lambda_min: Option<f64>,
    pub reduced_hessian: Matrix,
    pub subspace_basis: Matrix,
    pub lambda_used: Vector,
    /// Unit `w` in the subspace with `<w, ∇²ₓL w> <= tol_pos`.
    pub failure_direction: Option<Vector>,
    pub failure_quadratic_form: Option<f64>,
    /// Non-positive `λ_min` within `MARGINAL_BAND` of zero.
    pub marginal: bool,
    /// Largest entrywise deviation of the reduced Hessian over the vertices of `Λ`.
    pub multiplier_spread: Option<f64>,
    pub multiplier_independent: Option<bool>,
    /// RCRCQ grade the verdict is conditional on.
    pub rcrcq: String,
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() + 1e-14 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Pointbased tilt-stability verdict with the exact bound.
pub fn tilt_verdict(
    sd: &StationaryData,
    poly: &MultiplierPolyhedron,
    cq: &CqReport,
    opts: &TiltOptions,
) -> Result<TiltReport, TiltError> {
    let rh = reduced_hessian(sd, poly, opts.tol_rank)?;
    let rcrcq_holds = cq.rcrcq.holds();
    let k = rh.basis.cols();

    let (lambda_min, direction) = if k == 0 {
        (None, None)
    } else {
        let (l, ev) = sym_eig_min(&rh.matrix)?;
        let mut w = rh.basis.matvec(&ev);
        let nw = norm(&w);
        w.iter_mut().for_each(|x| *x /= nw);
        normalize_sign(&mut w);
        (Some(l), Some(w))
    };
    let positive = lambda_min.is_none_or(|l| l > opts.tol_pos);
    let verdict = match (rcrcq_holds, positive) {
        (false, _) => Verdict::Inconclusive,
        (true, true) => Verdict::TiltStable,
        (true, false) => Verdict::NotTiltStable,
    };
    let tilt_bound = (verdict == Verdict::TiltStable).then(|| lambda_min.map_or(0.0, |l| 1.0 / l));
    let (failure_direction, failure_quadratic_form) = if verdict == Verdict::NotTiltStable {
        let w = direction.expect("nontrivial subspace");
        let q = sd.lagrangian_hessian(&rh.lambda).quad_form(&w);
        (Some(w), Some(q))
    } else {
        (None, None)
    };
    let marginal = !positive && lambda_min.is_some_and(|l| l.abs() <= MARGINAL_BAND);

    let spread = match poly.enumerate_vertices() {
        Ok(vs) if !vs.is_empty() && k > 0 => Some(
            vs.iter()
                .map(|v| {
                    let other = project(&rh.basis, &sd.lagrangian_hessian(v));
                    other
                        .as_slice()
                        .iter()
                        .zip(rh.matrix.as_slice())
                        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .fold(0.0_f64, f64::max),
        ),
        Ok(vs) if !vs.is_empty() => Some(0.0),
        _ => None,
    };
    let scale = rh.matrix.max_abs().max(1.0);
    Ok(TiltReport {
        stationary: true,
        verdict,
        tilt_bound,
        lambda_min,
        reduced_hessian: rh.matrix,
        subspace_basis: rh.basis,
        lambda_used: rh.lambda,
        failure_direction,
        failure_quadratic_form,
        marginal,
        multiplier_independent: spread.map(|s| s <= TOL_MULTIPLIER_INDEPENDENCE * scale),
        multiplier_spread: spread,
        rcrcq: cq.rcrcq.label().to_string(),
    })
}
