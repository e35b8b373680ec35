//! The Lagrange multiplier polyhedron
//! `Λ(x, x*) = {λ : ∇q(x)ᵀλ = x*, λ_i >= 0 and λ_i q_i(x) = 0 for i in I}`
//! and the queries the tilt analysis needs: nonemptiness, the support union
//! `I+(x, x*)` with a full-support member, a bounded-norm member, extreme
//! points, and directional (curvature-maximizing) multipliers.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ConstraintKind, StationaryData};
use crate::numerics::{lstsq, rank, solve_lp, NumericsError, Sense, VarBound};
use crate::{LinearProgram, LpResult, Matrix, Vector};

pub const DEFAULT_TOL_POS: f64 = 1e-9;
pub const DEFAULT_MAX_VERTEX_CONSTRAINTS: usize = 12;
pub const DEFAULT_GAMMA: f64 = 1e3;
/// Tolerance for `λ ∈ Λ` and for vertex deduplication.
pub const TOL_MEMBER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierOptions {
    /// Threshold for `λ_i > 0`.
    pub tol_pos: f64,
    pub tol_rank: f64,
    /// Vertex enumeration is refused above this many constraints.
    pub max_vertex_constraints: usize,
}

impl Default for MultiplierOptions {
    fn default() -> Self {
        Self {
            tol_pos: DEFAULT_TOL_POS,
            tol_rank: crate::numerics::DEFAULT_TOL_RANK,
            max_vertex_constraints: DEFAULT_MAX_VERTEX_CONSTRAINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiplierError {
    #[error("multiplier set is empty")]
    Empty,
    #[error("vertex enumeration refused: {constraints} constraints exceeds the cap of {max}")]
    VertexGuard { constraints: usize, max: usize },
    #[error("vector is not a multiplier (violation {0:e})")]
    NotMember(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `I+(x, x*)` together with one multiplier whose positive support is all of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportUnion {
    pub indices: Vec<usize>,
    pub full_support: Vector,
}

/// Optimal value and optimal face of `max Σ λ_i <v, ∇²q_i v>` over `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalMultipliers {
    /// `None` when the objective is unbounded on `Λ`.
    pub value: Option<f64>,
    pub maximizer: Option<Vector>,
    /// Vertices of `Λ` attaining the value (empty if vertices are unavailable).
    pub face_vertices: Vec<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Free,
    NonNegative,
    Zero,
}

#[derive(Debug, Clone)]
pub struct MultiplierPolyhedron {
    jacobian: Matrix,
    target: Vector,
    kinds: Vec<ConstraintKind>,
    slots: Vec<Slot>,
    opts: MultiplierOptions,
    member: Option<Vector>,
    support: Option<SupportUnion>,
    vertices: Option<Vec<Vector>>,
}

impl MultiplierPolyhedron {
    /// Builds `Λ(x, x*)` from data at `x`; all cached queries are computed here.
    pub fn build(
        sd: &StationaryData,
        target: &[f64],
        opts: MultiplierOptions,
    ) -> Result<Self, MultiplierError> {
        if target.len() != sd.n() {
            return Err(NumericsError::Dimension(format!(
                "target has {} entries, expected {}",
                target.len(),
                sd.n()
            ))
            .into());
        }
        let slots = (0..sd.num_constraints())
            .map(|i| {
                if sd.is_equality(i) {
                    Slot::Free
                } else if sd.is_active(i) {
                    Slot::NonNegative
                } else {
                    Slot::Zero
                }
            })
            .collect();
        let mut poly = Self {
            jacobian: sd.con_grads.clone(),
            target: target.to_vec(),
            kinds: sd.kinds.clone(),
            slots,
            opts,
            member: None,
            support: None,
            vertices: None,
        };
        let feas = poly.optimize(&vec![0.0; poly.len()], Sense::Minimize)?;
        poly.member = feas.point().map(<[f64]>::to_vec);
        if poly.member.is_some() {
            poly.support = Some(poly.compute_support()?);
            if poly.len() <= opts.max_vertex_constraints {
                poly.vertices = Some(poly.compute_vertices());
            }
        }
        Ok(poly)
    }

    /// `Λ(x, -∇φ(x))`, the multipliers certifying stationarity.
    pub fn for_stationarity(sd: &StationaryData, opts: MultiplierOptions) -> Result<Self, MultiplierError> {
        let target: Vector = sd.obj_grad.iter().map(|g| -g).collect();
        Self::build(sd, &target, opts)
    }

    /// Number of constraints `l`.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_none()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn jacobian(&self) -> &Matrix {
        &self.jacobian
    }

    pub fn options(&self) -> MultiplierOptions {
        self.opts
    }

    pub fn is_equality(&self, i: usize) -> bool {
        self.kinds[i] == ConstraintKind::Equality
    }

    /// Any member of the polyhedron.
    pub fn member(&self) -> Option<&[f64]> {
        self.member.as_deref()
    }

    /// `I+(λ) = {i in I : λ_i > tol_pos}`
    pub fn positive_support(&self, lambda: &[f64]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.is_equality(i) && lambda[i] > self.opts.tol_pos)
            .collect()
    }

    /// Worst violation of the membership conditions.
    pub fn violation(&self, lambda: &[f64]) -> f64 {
        if lambda.len() != self.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (i, &l) in lambda.iter().enumerate() {
            worst = worst.max(match self.slots[i] {
                Slot::Free => 0.0,
                Slot::NonNegative => (-l).max(0.0),
                Slot::Zero => l.abs(),
            });
        }
        let r = self.jacobian.tr_matvec(lambda);
        let scale = self.target.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (ri, ti) in r.iter().zip(&self.target) {
            worst = worst.max((ri - ti).abs() / scale);
        }
        worst
    }

    pub fn contains(&self, lambda: &[f64]) -> bool {
        self.violation(lambda) <= TOL_MEMBER
    }

    /// Solves `opt Σ c_i λ_i` over `Λ`; `cap` adds `λ_cap.0 <= cap.1`.
    fn optimize_capped(
        &self,
        c: &[f64],
        sense: Sense,
        cap: Option<(usize, f64)>,
    ) -> Result<LpResult, MultiplierError> {
        let vars: Vec<usize> = (0..self.len()).filter(|&i| self.slots[i] != Slot::Zero).collect();
        let n = self.jacobian.cols();
        let k = vars.len() + usize::from(cap.is_some());
        let rows = n + usize::from(cap.is_some());
        let mut a = Matrix::zeros(rows, k);
        for (col, &i) in vars.iter().enumerate() {
            for r in 0..n {
                a[(r, col)] = self.jacobian[(i, r)];
            }
        }
        let mut b = self.target.clone();
        let mut bounds: Vec<VarBound> = vars
            .iter()
            .map(|&i| match self.slots[i] {
                Slot::Free => VarBound::Free,
                _ => VarBound::NonNegative,
            })
            .collect();
        let mut objective: Vector = vars.iter().map(|&i| c[i]).collect();
        if let Some((idx, ub)) = cap {
            let col = vars.iter().position(|&i| i == idx).expect("capped index is a variable");
            a[(n, col)] = 1.0;
            a[(n, k - 1)] = 1.0;
            b.push(ub);
            bounds.push(VarBound::NonNegative);
            objective.push(0.0);
        }
        let lp = LinearProgram {
            objective,
            a,
            b,
            bounds,
            sense,
        };
        Ok(match solve_lp(&lp)? {
            LpResult::Optimal { value, point } => {
                let mut full = vec![0.0; self.len()];
                for (col, &i) in vars.iter().enumerate() {
                    full[i] = point[col];
                }
                LpResult::Optimal { value, point: full }
            }
            other => other,
        })
    }

    fn optimize(&self, c: &[f64], sense: Sense) -> Result<LpResult, MultiplierError> {
        self.optimize_capped(c, sense, None)
    }

    fn compute_support(&self) -> Result<SupportUnion, MultiplierError> {
        let mut indices = Vec::new();
        let mut maximizers = Vec::new();
        for i in (0..self.len()).filter(|&i| self.slots[i] == Slot::NonNegative) {
            let mut c = vec![0.0; self.len()];
            c[i] = 1.0;
            let res = match self.optimize(&c, Sense::Maximize)? {
                LpResult::Unbounded => {
                    // the cap must leave Λ nonempty, so offset it from a known member
                    let cap = self.member.as_ref().map_or(0.0, |m| m[i]) + 1.0;
                    self.optimize_capped(&c, Sense::Maximize, Some((i, cap)))?
                }
                r => r,
            };
            if let LpResult::Optimal { value, point } = res {
                if value > self.opts.tol_pos {
                    indices.push(i);
                    maximizers.push(point);
                }
            }
        }
        // convex combination of per-index maximizers: every λ_i, i in I+, stays positive
        let full_support = if maximizers.is_empty() {
            self.member.clone().expect("nonempty")
        } else {
            let w = 1.0 / maximizers.len() as f64;
            (0..self.len())
                .map(|j| maximizers.iter().map(|m| m[j]).sum::<f64>() * w)
                .collect()
        };
        Ok(SupportUnion {
            indices,
            full_support,
        })
    }

    /// `I+(x, x*)` and a multiplier `λ̃` with `I+(λ̃) = I+(x, x*)`.
    pub fn support_union(&self) -> Result<&SupportUnion, MultiplierError> {
        self.support.as_ref().ok_or(MultiplierError::Empty)
    }

    /// Minimizes `‖λ‖₁` over `Λ` and accepts the minimizer when
    /// `‖λ‖₂ <= gamma ‖x*‖₂`.
    pub fn bounded_multiplier(&self, gamma: f64) -> Result<Option<Vector>, MultiplierError> {
        if self.is_empty() {
            return Err(MultiplierError::Empty);
        }
        // split free components so the objective is |λ_i|
        let vars: Vec<usize> = (0..self.len()).filter(|&i| self.slots[i] != Slot::Zero).collect();
        let n = self.jacobian.cols();
        let mut cols: Vec<(usize, f64)> = Vec::new();
        for &i in &vars {
            cols.push((i, 1.0));
            if self.slots[i] == Slot::Free {
                cols.push((i, -1.0));
            }
        }
        let mut a = Matrix::zeros(n, cols.len());
        for (col, &(i, s)) in cols.iter().enumerate() {
            for r in 0..n {
                a[(r, col)] = s * self.jacobian[(i, r)];
            }
        }
        let lp = LinearProgram {
            objective: vec![1.0; cols.len()],
            a,
            b: self.target.clone(),
            bounds: vec![VarBound::NonNegative; cols.len()],
            sense: Sense::Minimize,
        };
        let Some(point) = solve_lp(&lp)?.point().map(<[f64]>::to_vec) else {
            return Err(MultiplierError::Empty);
        };
        let mut lambda = vec![0.0; self.len()];
        for (&(i, s), v) in cols.iter().zip(point) {
            lambda[i] += s * v;
        }
        let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = gamma * self.target.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((norm <= bound + TOL_MEMBER).then_some(lambda))
    }

    fn compute_vertices(&self) -> Vec<Vector> {
        let n = self.jacobian.cols();
        let eq: Vec<usize> = (0..self.len()).filter(|&i| self.slots[i] == Slot::Free).collect();
        let ineq: Vec<usize> = (0..self.len())
            .filter(|&i| self.slots[i] == Slot::NonNegative)
            .collect();
        let tol_rank = self.opts.tol_rank;
        // a dependent equality block gives Λ a lineality space: no extreme points
        if rank(&self.jacobian.select_rows(&eq), tol_rank) < eq.len() {
            return Vec::new();
        }
        let scale = self.target.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut out: Vec<Vector> = Vec::new();
        let max_k = n.saturating_sub(eq.len()).min(ineq.len());
        for k in 0..=max_k {
            for subset in ineq.iter().copied().combinations(k) {
                let rows: Vec<usize> = eq.iter().copied().chain(subset).sorted().collect();
                let m = self.jacobian.select_rows(&rows);
                if rank(&m, tol_rank) < rows.len() {
                    continue;
                }
                let coef = lstsq(&m.transpose(), &self.target, tol_rank);
                let mut lambda = vec![0.0; self.len()];
                for (&i, &c) in rows.iter().zip(&coef) {
                    lambda[i] = if c.abs() <= self.opts.tol_pos * scale { 0.0 } else { c };
                }
                if !self.contains(&lambda) {
                    continue;
                }
                for (i, l) in lambda.iter_mut().enumerate() {
                    if self.slots[i] == Slot::NonNegative {
                        *l = l.max(0.0);
                    }
                }
                let dup = out.iter().any(|v| {
                    v.iter()
                        .zip(&lambda)
                        .all(|(a, b)| (a - b).abs() <= TOL_MEMBER)
                });
                if !dup {
                    out.push(lambda);
                }
            }
        }
        out
    }

    /// Extreme points of `Λ`: members whose gradient family
    /// `{∇q_i : i in E ∪ I+(λ)}` is linearly independent.
    pub fn enumerate_vertices(&self) -> Result<&[Vector], MultiplierError> {
        if self.is_empty() {
            return Err(MultiplierError::Empty);
        }
        self.vertices.as_deref().ok_or(MultiplierError::VertexGuard {
            constraints: self.len(),
            max: self.opts.max_vertex_constraints,
        })
    }

    /// Multipliers maximizing the curvature term `<v, ∇²<λ, q>(x) v>`.
    pub fn directional_multipliers(
        &self,
        sd: &StationaryData,
        v: &[f64],
    ) -> Result<DirectionalMultipliers, MultiplierError> {
        if self.is_empty() {
            return Err(MultiplierError::Empty);
        }
        let c: Vector = sd.con_hess.iter().map(|h| h.quad_form(v)).collect();
        let score = |l: &[f64]| c.iter().zip(l).map(|(a, b)| a * b).sum::<f64>();
        match self.optimize(&c, Sense::Maximize)? {
            LpResult::Optimal { value, point } => {
                let tol = TOL_MEMBER * value.abs().max(1.0);
                let face_vertices = self
                    .vertices
                    .as_ref()
                    .map(|vs| vs.iter().filter(|l| score(l) >= value - tol).cloned().collect())
                    .unwrap_or_default();
                Ok(DirectionalMultipliers {
                    value: Some(value),
                    maximizer: Some(point),
                    face_vertices,
                })
            }
            LpResult::Unbounded => Ok(DirectionalMultipliers {
                value: None,
                maximizer: None,
                face_vertices: Vec::new(),
            }),
            LpResult::Infeasible => Err(MultiplierError::Empty),
        }
    }

    /// `Σ_{i in I+ \ I+(λ)} λ̃_i ∇q_i + Σ_{i in E ∪ I+(λ)} (λ̃_i - λ_i) ∇q_i`
    /// for the full-support `λ̃`; vanishes for every member `λ`.
    pub fn support_gradient_combination(&self, lambda: &[f64]) -> Result<Vector, MultiplierError> {
        let su = self.support_union()?;
        let own = self.positive_support(lambda);
        let mut out = vec![0.0; self.jacobian.cols()];
        #[allow(clippy::needless_range_loop)]
        for i in 0..self.len() {
            let coef = if self.is_equality(i) || own.contains(&i) {
                su.full_support[i] - lambda[i]
            } else if su.indices.contains(&i) {
                su.full_support[i]
            } else {
                continue;
            };
            for (o, g) in out.iter_mut().zip(self.jacobian.row(i)) {
                *o += coef * g;
            }
        }
        Ok(out)
    }
}
