//! Brute-force evidence for tilt stability.
//!
//! For sampled tilts `v` with `‖v‖ <= δ` the oracle minimizes
//! `φ(x) - <v, x>` over `Γ ∩ B_γ(x̄)` by a quadratic-penalty continuation and
//! multistart, then reports how the minimizers move with `v`. The output is
//! empirical and independent of the second-order test in [`crate::tilt`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ConstraintKind, EvalError, Problem};
use crate::numerics::{dot, norm2, sym_eig};
use crate::tilt::{TiltReport, Verdict};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error("reference point has {got} coordinates, problem has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("evaluation failed at the reference point: {0}")]
    Evaluation(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub initial: f64,
    pub growth: f64,
    pub rounds: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 10.0,
            growth: 10.0,
            rounds: 6,
        }
    }
}

impl PenaltySchedule {
    pub fn final_weight(&self) -> f64 {
        self.initial * self.growth.powi(self.rounds.saturating_sub(1) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Localization radius of `B_γ(x̄)`.
    pub gamma: f64,
    /// Largest tilt norm.
    pub delta: f64,
    pub n_tilts: usize,
    pub n_starts: usize,
    pub penalty: PenaltySchedule,
    pub tol_feas: f64,
    pub tol_stationarity: f64,
    /// Newton iterations stop once the step is below this (relative to `max(1, ‖x‖)`).
    pub tol_step: f64,
    pub max_iter: usize,
    pub tol_cluster: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            delta: 1e-3,
            n_tilts: 24,
            n_starts: 8,
            penalty: PenaltySchedule::default(),
            tol_feas: 1e-6,
            tol_stationarity: 1e-6,
            tol_step: 1e-13,
            max_iter: 500,
            tol_cluster: 1e-4,
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidConfig(m.to_string()));
        if !(self.delta > 0.0 && self.gamma > self.delta && self.gamma.is_finite()) {
            return bad("need gamma > delta > 0");
        }
        if self.n_tilts == 0 || self.n_starts == 0 || self.penalty.rounds == 0 || self.max_iter == 0 {
            return bad("counts must be at least 1");
        }
        if !(self.penalty.initial > 0.0 && self.penalty.growth >= 1.0) {
            return bad("penalty weight must be positive and non-decreasing");
        }
        if !(self.tol_feas > 0.0 && self.tol_stationarity > 0.0 && self.tol_cluster > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedSolution {
    pub tilt: Vector,
    pub point: Vector,
    /// `φ(x) - <v, x>` at `point`.
    pub value: f64,
    pub feasibility_residual: f64,
    pub stationarity_residual: f64,
    pub status: SolveStatus,
    /// Diameter of the multistart minimizers that tie for the best value.
    pub cluster_diameter: f64,
    pub starts_in_cluster: usize,
}

/// Extra weight on the ball penalty so the final projection moves the iterate
/// by much less than the stationarity tolerance.
const BALL_WEIGHT: f64 = 1e3;

struct Penalized<'a> {
    p: &'a Problem,
    center: &'a [f64],
    tilt: &'a [f64],
    gamma: f64,
    mu: f64,
}

impl Penalized<'_> {
    fn excess(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        (r2 - self.gamma * self.gamma).max(0.0)
    }

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut f = self.p.objective_value(x)? - dot(self.tilt, x);
        for (c, q) in self.p.constraints().iter().zip(self.p.constraint_values(x)?) {
            let r = match c.kind {
                ConstraintKind::Equality => q,
                ConstraintKind::Inequality => q.max(0.0),
            };
            f += self.mu * r * r;
        }
        let b = self.excess(x);
        Ok(f + BALL_WEIGHT * self.mu * b * b)
    }

    fn gradient_hessian(&self, x: &[f64], ball: bool) -> Result<(Vector, Matrix), EvalError> {
        let n = x.len();
        let mut g = self.p.objective_gradient(x)?;
        g.iter_mut().zip(self.tilt).for_each(|(a, v)| *a -= v);
        let mut h = self.p.objective_hessian(x)?;
        let qs = self.p.constraint_values(x)?;
        for (i, c) in self.p.constraints().iter().enumerate() {
            let q = qs[i];
            if c.kind == ConstraintKind::Inequality && q <= 0.0 {
                continue;
            }
            let gi = self.p.constraint_gradient(i, x)?;
            let hi = self.p.constraint_hessian(i, x)?;
            let two_mu = 2.0 * self.mu;
            for r in 0..n {
                g[r] += two_mu * q * gi[r];
                for s in 0..n {
                    h[(r, s)] += two_mu * (gi[r] * gi[s] + q * hi[(r, s)]);
                }
            }
        }
        let b = self.excess(x);
        if ball && b > 0.0 {
            let d: Vector = x.iter().zip(self.center).map(|(a, c)| 2.0 * (a - c)).collect();
            let two_mu = 2.0 * BALL_WEIGHT * self.mu;
            for r in 0..n {
                g[r] += two_mu * b * d[r];
                h[(r, r)] += two_mu * b * 2.0;
                for s in 0..n {
                    h[(r, s)] += two_mu * d[r] * d[s];
                }
            }
        }
        Ok((g, h))
    }

    fn project(&self, x: &mut [f64]) {
        let r = x
            .iter()
            .zip(self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        if r > self.gamma {
            let s = self.gamma / r;
            x.iter_mut().zip(self.center).for_each(|(a, c)| *a = c + (*a - c) * s);
        }
    }

    /// `‖x - P(x - ∇)‖_∞` with the ball as a hard constraint.
    fn projected_residual(&self, x: &[f64]) -> Result<f64, EvalError> {
        let (g, _) = self.gradient_hessian(x, false)?;
        let mut y: Vector = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        self.project(&mut y);
        Ok(x.iter().zip(&y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Newton direction with eigenvalues replaced by their absolute values.
fn newton_direction(g: &[f64], h: &Matrix) -> Option<Vector> {
    let eig = sym_eig(h).ok()?;
    let top = eig.values.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let floor = 1e-14 * top.max(1.0);
    let n = g.len();
    let mut d = vec![0.0; n];
    for k in 0..n {
        let u = eig.vectors.col(k);
        let c = dot(&u, g) / eig.values[k].abs().max(floor);
        d.iter_mut().zip(&u).for_each(|(di, ui)| *di -= c * ui);
    }
    d.iter().all(|v| v.is_finite()).then_some(d)
}

fn backtrack(f: &Penalized, x: &[f64], fx: f64, g: &[f64], d: &[f64]) -> Option<Vector> {
    let slope = dot(g, d);
    if slope >= 0.0 {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let y: Vector = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        if let Ok(fy) = f.value(&y) {
            if fy <= fx + 1e-4 * t * slope {
                return Some(y);
            }
        }
        t *= 0.5;
    }
    None
}

fn minimize(f: &Penalized, mut x: Vector, cfg: &OracleConfig) -> Vector {
    for _ in 0..cfg.max_iter {
        let Ok(fx) = f.value(&x) else { break };
        let Ok((g, h)) = f.gradient_hessian(&x, true) else { break };
        if norm2(&g) == 0.0 {
            break;
        }
        let next = newton_direction(&g, &h)
            .and_then(|d| backtrack(f, &x, fx, &g, &d))
            .or_else(|| {
                let d: Vector = g.iter().map(|v| -v).collect();
                backtrack(f, &x, fx, &g, &d)
            });
        let Some(y) = next else { break };
        let step = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = y;
        if step <= cfg.tol_step * norm2(&x).max(1.0) {
            break;
        }
    }
    x
}

fn check_point(p: &Problem, x: &[f64]) -> Result<(), OracleError> {
    if x.len() != p.n() {
        return Err(OracleError::Dimension {
            expected: p.n(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `x̄` followed by seeded uniform points in `B_{γ/2}(x̄)`.
fn starts(xbar: &[f64], cfg: &OracleConfig) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![xbar.to_vec()];
    out.extend((1..cfg.n_starts).map(|_| uniform_ball(&mut rng, xbar, cfg.gamma / 2.0)));
    out
}

fn uniform_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vector {
    let n = center.len();
    let mut d: Vector = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let nd = norm2(&d).max(f64::MIN_POSITIVE);
    let r: f64 = radius * rand::Rng::random::<f64>(rng).powf(1.0 / n as f64);
    d.iter_mut().zip(center).for_each(|(a, c)| *a = c + *a * r / nd);
    d
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimizer of `φ - <v, ·>` over `Γ ∩ B_γ(x̄)`, best over all starts.
pub fn solve_tilted(
    p: &Problem,
    xbar: &[f64],
    v: &[f64],
    cfg: &OracleConfig,
) -> Result<TiltedSolution, OracleError> {
    cfg.validate()?;
    check_point(p, xbar)?;
    check_point(p, v)?;
    p.objective_value(xbar)?;

    let mut results: Vec<(Vector, f64)> = Vec::with_capacity(cfg.n_starts);
    let mut last = None;
    for x0 in starts(xbar, cfg) {
        let mut x = x0;
        let mut mu = cfg.penalty.initial;
        let mut f = None;
        for _ in 0..cfg.penalty.rounds {
            let pen = Penalized {
                p,
                center: xbar,
                tilt: v,
                gamma: cfg.gamma,
                mu,
            };
            x = minimize(&pen, x, cfg);
            f = Some(pen);
            mu *= cfg.penalty.growth;
        }
        let pen = f.expect("at least one round");
        pen.project(&mut x);
        if let Ok(val) = pen.value(&x) {
            results.push((x, val));
        }
        last = Some(pen.mu);
    }
    let mu = last.unwrap_or(cfg.penalty.final_weight());
    let pen = Penalized {
        p,
        center: xbar,
        tilt: v,
        gamma: cfg.gamma,
        mu,
    };

    let best = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .ok_or(OracleError::Evaluation(EvalError::NonFinite))?;
    let best_val = results[best].1;
    let tie = 1e-10 * best_val.abs().max(1.0);
    let cluster: Vec<&Vector> = results
        .iter()
        .filter(|(_, f)| *f <= best_val + tie)
        .map(|(x, _)| x)
        .collect();
    let mut diameter = 0.0_f64;
    for (i, a) in cluster.iter().enumerate() {
        for b in &cluster[i + 1..] {
            diameter = diameter.max(distance(a, b));
        }
    }

    let point = results[best].0.clone();
    let feas = p.max_violation(&point)?.1;
    let stat = pen.projected_residual(&point)?;
    let status = if feas <= cfg.tol_feas && stat <= cfg.tol_stationarity {
        SolveStatus::Converged
    } else {
        SolveStatus::NotConverged
    };
    Ok(TiltedSolution {
        tilt: v.to_vec(),
        value: p.objective_value(&point)? - dot(v, &point),
        point,
        feasibility_residual: feas,
        stationarity_residual: stat,
        status,
        cluster_diameter: diameter,
        starts_in_cluster: cluster.len(),
    })
}

/// Comparison of the oracle estimate with a pointbased bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub tilt_bound: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Always `"empirical"`: the oracle samples, it does not prove.
    pub kind: String,
    pub config: OracleConfig,
    pub tilts: Vec<TiltedSolution>,
    pub empirical_single_valued: bool,
    pub max_cluster_diameter: f64,
    pub lipschitz_estimate: f64,
    pub pairs_used: usize,
    /// Distance of the untilted minimizer from `x̄`.
    pub untilted_deviation: f64,
    /// The untilted minimizer matches `x̄` within `UNTILTED_MATCH`.
    pub untilted_matches_reference: bool,
    pub all_converged: bool,
    pub agreement: Option<Agreement>,
}

pub const UNTILTED_MATCH: f64 = 1e-5;

/// `0`, then `±δ e_j`, then seeded uniform tilts in `B_δ(0)`, `n_tilts` in total.
pub fn tilt_samples(n: usize, cfg: &OracleConfig) -> Vec<Vector> {
    let mut out = vec![vec![0.0; n]];
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[j] = s * cfg.delta;
            out.push(v);
        }
    }
    out.truncate(cfg.n_tilts);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let zero = vec![0.0; n];
    while out.len() < cfg.n_tilts {
        out.push(uniform_ball(&mut rng, &zero, cfg.delta));
    }
    out
}

/// Samples tilted minimizers around `x̄` and estimates the Lipschitz modulus
/// of `v ↦ M_γ(v)` from pairs with `‖v - v'‖ >= δ/10`.
pub fn estimate_tilt_modulus(
    p: &Problem,
    xbar: &[f64],
    cfg: &OracleConfig,
    tilt: Option<&TiltReport>,
) -> Result<OracleReport, OracleError> {
    cfg.validate()?;
    check_point(p, xbar)?;
    let tilts = tilt_samples(p.n(), cfg)
        .iter()
        .map(|v| solve_tilted(p, xbar, v, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let min_sep = cfg.delta / 10.0;
    let mut estimate = 0.0_f64;
    let mut pairs = 0;
    for (i, a) in tilts.iter().enumerate() {
        for b in &tilts[i + 1..] {
            let dv = distance(&a.tilt, &b.tilt);
            if dv >= min_sep {
                pairs += 1;
                estimate = estimate.max(distance(&a.point, &b.point) / dv);
            }
        }
    }
    let max_cluster = tilts.iter().fold(0.0_f64, |m, t| m.max(t.cluster_diameter));
    let untilted_deviation = distance(&tilts[0].point, xbar);
    let agreement = tilt
        .filter(|t| t.verdict == Verdict::TiltStable)
        .and_then(|t| t.tilt_bound)
        .map(|b| {
            let tolerance = 0.25 * b.max(0.1);
            let difference = (estimate - b).abs();
            Agreement {
                tilt_bound: b,
                difference,
                tolerance,
                agrees: difference <= tolerance,
            }
        });
    Ok(OracleReport {
        kind: "empirical".to_string(),
        config: *cfg,
        empirical_single_valued: max_cluster <= cfg.tol_cluster,
        max_cluster_diameter: max_cluster,
        lipschitz_estimate: estimate,
        pairs_used: pairs,
        untilted_matches_reference: untilted_deviation <= UNTILTED_MATCH,
        untilted_deviation,
        all_converged: tilts.iter().all(|t| t.status == SolveStatus::Converged),
        agreement,
        tilts,
    })
}
