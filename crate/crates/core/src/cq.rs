//! Constraint qualifications at a feasible point.
//!
//! LICQ and MFCQ are decided exactly (rank test and a certificate LP).
//! CRCQ and RCRCQ quantify over a neighborhood and have no finite decision
//! procedure for general smooth data, so they are graded: `HoldsSampled` is
//! evidence from rank comparisons at sample points, `FailsWithWitness` is a
//! proof of failure carrying a family and a point where its rank differs.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Problem, StationaryData};
use crate::numerics::{rank, solve_lp, NumericsError, Sense, VarBound};
use crate::{LinearProgram, Matrix, Vector};

pub const DEFAULT_RADIUS: f64 = 1e-2;
pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_MAX_ACTIVE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
    pub tol_rank: f64,
    /// Largest `|I(x)|` for which subset families are enumerated.
    pub max_active: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            count: DEFAULT_SAMPLES,
            seed: 0,
            tol_rank: crate::numerics::DEFAULT_TOL_RANK,
            max_active: DEFAULT_MAX_ACTIVE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CqError {
    #[error("{active} active inequalities exceeds the subset-enumeration cap of {max}")]
    SubsetGuard { active: usize, max: usize },
    #[error("invalid sampling parameters: {0}")]
    InvalidSampling(String),
    #[error("index {0} is not an active constraint")]
    NotActive(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankWitness {
    /// Constraint indices of the family whose rank changed.
    pub family: Vec<usize>,
    pub base_point: Vector,
    pub base_rank: usize,
    pub other_point: Vector,
    pub other_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RankVerdict {
    HoldsSampled { families: usize, points: usize },
    FailsWithWitness(RankWitness),
}

impl RankVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, RankVerdict::HoldsSampled { .. })
    }

    pub fn witness(&self) -> Option<&RankWitness> {
        match self {
            RankVerdict::FailsWithWitness(w) => Some(w),
            RankVerdict::HoldsSampled { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RankVerdict::HoldsSampled { .. } => "holds-sampled",
            RankVerdict::FailsWithWitness(_) => "fails-with-witness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcqResult {
    pub holds: bool,
    /// Direction `v` with `<∇q_i, v> = 0` on `E` and `< 0` on `I(x)`.
    pub certificate: Option<Vector>,
    /// Optimal `t` of the certificate LP.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub licq: bool,
    pub mfcq: MfcqResult,
    pub crcq: RankVerdict,
    pub rcrcq: RankVerdict,
    /// MSCQ follows from RCRCQ; reported, never tested directly.
    pub mscq_implied: bool,
    pub sampling: SamplingParams,
}

/// `{∇q_i(x) : i in E ∪ I(x)}` linearly independent.
pub fn check_licq(sd: &StationaryData, tol_rank: f64) -> bool {
    let active = sd.active_indices();
    rank(&sd.con_grads.select_rows(&active), tol_rank) == active.len()
}

/// MFCQ via `max t  s.t. <g_i,v> = 0 (E), <g_i,v> <= -t (I(x)), ‖v‖∞ <= 1, t <= 1`.
pub fn check_mfcq(sd: &StationaryData, tol_rank: f64, tol_pos: f64) -> Result<MfcqResult, CqError> {
    let n = sd.n();
    let eq = sd.equality_indices();
    let ineq = sd.active_ineq.clone();
    let eq_independent = rank(&sd.con_grads.select_rows(&eq), tol_rank) == eq.len();

    // columns: v (n, free), t (free), s (|ineq|), p (n), r (n), u (1)
    let (iv, it, is_, ip, ir, iu) = (0, n, n + 1, n + 1 + ineq.len(), 2 * n + 1 + ineq.len(), 3 * n + 1 + ineq.len());
    let ncols = iu + 1;
    let nrows = eq.len() + ineq.len() + 2 * n + 1;
    let mut a = Matrix::zeros(nrows, ncols);
    let mut b = vec![0.0; nrows];
    let mut r = 0;
    for &i in &eq {
        for j in 0..n {
            a[(r, iv + j)] = sd.con_grads[(i, j)];
        }
        r += 1;
    }
    for (k, &i) in ineq.iter().enumerate() {
        for j in 0..n {
            a[(r, iv + j)] = sd.con_grads[(i, j)];
        }
        a[(r, it)] = 1.0;
        a[(r, is_ + k)] = 1.0;
        r += 1;
    }
    for j in 0..n {
        a[(r, iv + j)] = 1.0;
        a[(r, ip + j)] = 1.0;
        b[r] = 1.0;
        r += 1;
        a[(r, iv + j)] = -1.0;
        a[(r, ir + j)] = 1.0;
        b[r] = 1.0;
        r += 1;
    }
    a[(r, it)] = 1.0;
    a[(r, iu)] = 1.0;
    b[r] = 1.0;

    let mut bounds = vec![VarBound::NonNegative; ncols];
    for bd in bounds.iter_mut().take(n + 1) {
        *bd = VarBound::Free;
    }
    let mut objective = vec![0.0; ncols];
    objective[it] = 1.0;
    let lp = LinearProgram {
        objective,
        a,
        b,
        bounds,
        sense: Sense::Maximize,
    };
    let res = solve_lp(&lp)?;
    let (margin, v) = match res.point() {
        Some(pt) => (pt[it], Some(pt[..n].to_vec())),
        None => (0.0, None),
    };
    let holds = eq_independent && margin > tol_pos;
    Ok(MfcqResult {
        holds,
        certificate: if holds { v } else { None },
        margin,
    })
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Deterministic points in the closed ball `B_radius(center)`.
///
/// Even slots take a randomly shifted Halton sequence mapped radially from the
/// cube onto the ball, odd slots take seeded uniform ball samples. The
/// sequence for `count = k` is a prefix of the one for any larger count.
pub fn sample_ball(center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vector> {
    let n = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(count);
    let mut halton_index = 1u64;
    for k in 0..count {
        let y: Vector = if k % 2 == 0 {
            let y: Vector = (0..n)
                .map(|d| {
                    let base = PRIMES[d % PRIMES.len()] + 2 * (d / PRIMES.len()) as u64 * 131;
                    let u = (radical_inverse(halton_index, base) + shift[d]).fract();
                    2.0 * u - 1.0
                })
                .collect();
            halton_index += 1;
            let linf = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let l2 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if l2 > 0.0 {
                y.iter().map(|v| v * linf / l2).collect()
            } else {
                y
            }
        } else {
            let dir: Vector = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = rng.random::<f64>().powf(1.0 / n as f64);
            dir.iter().map(|v| v * r / norm).collect()
        };
        out.push(center.iter().zip(&y).map(|(c, d)| c + radius * d).collect());
    }
    out
}

/// Rank of the selected Jacobian rows after normalizing each nonzero row.
fn family_rank(jac: &Matrix, family: &[usize], tol_rank: f64) -> usize {
    let mut m = jac.select_rows(family);
    for i in 0..m.rows() {
        let norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in m.row_mut(i) {
                *v /= norm;
            }
        }
    }
    rank(&m, tol_rank)
}

/// Compares the rank of each family at `x` against its rank at sample points
/// of `B_radius(x)`. Points where the constraint data cannot be evaluated are
/// skipped.
pub fn check_rank_constancy(
    p: &Problem,
    sd: &StationaryData,
    families: &[Vec<usize>],
    params: &SamplingParams,
) -> Result<RankVerdict, CqError> {
    if params.radius.is_nan() || params.radius <= 0.0 {
        return Err(CqError::InvalidSampling(format!("radius {} must be positive", params.radius)));
    }
    if params.count < 2 {
        return Err(CqError::InvalidSampling(format!("count {} must be at least 2", params.count)));
    }
    let base: Vec<usize> = families
        .iter()
        .map(|f| family_rank(&sd.con_grads, f, params.tol_rank))
        .collect();
    let mut used = 0;
    for x in sample_ball(&sd.point, params.radius, params.count, params.seed) {
        let Ok(jac) = p.jacobian(&x) else {
            continue;
        };
        used += 1;
        for (f, &r0) in families.iter().zip(&base) {
            let r = family_rank(&jac, f, params.tol_rank);
            if r != r0 {
                return Ok(RankVerdict::FailsWithWitness(RankWitness {
                    family: f.clone(),
                    base_point: sd.point.clone(),
                    base_rank: r0,
                    other_point: x,
                    other_rank: r,
                }));
            }
        }
    }
    Ok(RankVerdict::HoldsSampled {
        families: families.len(),
        points: used,
    })
}

fn ordered_families(mut fams: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    fams.retain(|f| !f.is_empty());
    for f in fams.iter_mut() {
        f.sort_unstable();
    }
    fams.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    fams.dedup();
    fams
}

fn guard(sd: &StationaryData, max_active: usize) -> Result<(), CqError> {
    if sd.active_ineq.len() > max_active {
        return Err(CqError::SubsetGuard {
            active: sd.active_ineq.len(),
            max: max_active,
        });
    }
    Ok(())
}

/// `{E ∪ J : J ⊆ I(x)}`, smallest families first.
pub fn rcrcq_families(sd: &StationaryData, max_active: usize) -> Result<Vec<Vec<usize>>, CqError> {
    guard(sd, max_active)?;
    let eq = sd.equality_indices();
    Ok(ordered_families(
        sd.active_ineq
            .iter()
            .copied()
            .powerset()
            .map(|j| eq.iter().copied().chain(j).collect())
            .collect(),
    ))
}

/// `{K ∪ J : K ⊆ E, J ⊆ I(x)}`, smallest families first.
pub fn crcq_families(sd: &StationaryData, max_active: usize) -> Result<Vec<Vec<usize>>, CqError> {
    guard(sd, max_active)?;
    Ok(ordered_families(sd.active_indices().into_iter().powerset().collect()))
}

pub fn check_crcq(p: &Problem, sd: &StationaryData, params: &SamplingParams) -> Result<RankVerdict, CqError> {
    check_rank_constancy(p, sd, &crcq_families(sd, params.max_active)?, params)
}

pub fn check_rcrcq(p: &Problem, sd: &StationaryData, params: &SamplingParams) -> Result<RankVerdict, CqError> {
    check_rank_constancy(p, sd, &rcrcq_families(sd, params.max_active)?, params)
}

/// 2-regularity of `g = (q_i)_{i in indices}` at `x` in direction `v`:
/// for every `p` the system `∇g u + [∇²g v, w] = p`, `∇g w = 0` is solvable,
/// i.e. `[[∇g, ∇²g v], [0, ∇g]]` has rank `|indices| + rank ∇g`.
pub fn check_2regular(
    sd: &StationaryData,
    indices: &[usize],
    v: &[f64],
    tol_rank: f64,
) -> Result<bool, CqError> {
    if let Some(&i) = indices.iter().find(|&&i| i >= sd.num_constraints() || !sd.is_active(i)) {
        return Err(CqError::NotActive(i));
    }
    let n = sd.n();
    let m = indices.len();
    let jac = sd.con_grads.select_rows(indices);
    let mut stacked = Matrix::zeros(2 * m, 2 * n);
    for (r, &i) in indices.iter().enumerate() {
        let hv = sd.con_hess[i].matvec(v);
        for j in 0..n {
            stacked[(r, j)] = jac[(r, j)];
            stacked[(r, n + j)] = hv[j];
            stacked[(m + r, n + j)] = jac[(r, j)];
        }
    }
    Ok(rank(&stacked, tol_rank) == m + rank(&jac, tol_rank))
}

/// Full CQ lattice at the point.
pub fn analyze_cq(
    p: &Problem,
    sd: &StationaryData,
    params: &SamplingParams,
    tol_pos: f64,
) -> Result<CqReport, CqError> {
    let licq = check_licq(sd, params.tol_rank);
    let mfcq = check_mfcq(sd, params.tol_rank, tol_pos)?;
    let crcq = check_crcq(p, sd, params)?;
    let rcrcq = check_rcrcq(p, sd, params)?;
    Ok(CqReport {
        licq,
        mfcq,
        mscq_implied: rcrcq.holds(),
        crcq,
        rcrcq,
        sampling: *params,
    })
}
