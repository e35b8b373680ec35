//! The analysis pipeline and its record: problem metadata, stationarity,
//! constraint qualifications, multipliers, the tilt verdict and optional
//! oracle evidence, plus the parameters that reproduce all of it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cq::{analyze_cq, CqError, CqReport, RankVerdict, SamplingParams};
use crate::model::{evaluate_stationary_data, EvaluationError, Problem, Tolerances};
use crate::multipliers::{MultiplierError, MultiplierOptions, MultiplierPolyhedron};
use crate::oracle::{estimate_tilt_modulus, OracleConfig, OracleError, OracleReport};
use crate::tilt::{tilt_verdict, TiltError, TiltOptions, TiltReport, Verdict};
use crate::Vector;

pub const TOOL_NAME: &str = "tiltstab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every knob of the pipeline. Echoed verbatim into the record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tol_feas: f64,
    pub tol_active: f64,
    pub tol_rank: f64,
    pub tol_pos: f64,
    pub cq_radius: f64,
    pub cq_samples: usize,
    pub seed: u64,
    pub max_active: usize,
    pub max_vertex_constraints: usize,
    /// Modulus used to certify a bounded multiplier.
    pub mscq_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let s = SamplingParams::default();
        let m = MultiplierOptions::default();
        let t = Tolerances::default();
        Self {
            tol_feas: t.feas,
            tol_active: t.active,
            tol_rank: s.tol_rank,
            tol_pos: m.tol_pos,
            cq_radius: s.radius,
            cq_samples: s.count,
            seed: s.seed,
            max_active: s.max_active,
            max_vertex_constraints: m.max_vertex_constraints,
            mscq_gamma: crate::multipliers::DEFAULT_GAMMA,
            oracle: None,
        }
    }
}

impl AnalysisOptions {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            feas: self.tol_feas,
            active: self.tol_active,
        }
    }

    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            radius: self.cq_radius,
            count: self.cq_samples,
            seed: self.seed,
            tol_rank: self.tol_rank,
            max_active: self.max_active,
        }
    }

    pub fn multipliers(&self) -> MultiplierOptions {
        MultiplierOptions {
            tol_pos: self.tol_pos,
            tol_rank: self.tol_rank,
            max_vertex_constraints: self.max_vertex_constraints,
        }
    }

    pub fn tilt(&self) -> TiltOptions {
        TiltOptions {
            tol_pos: self.tol_pos,
            tol_rank: self.tol_rank,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("model: problem has no `point` declaration")]
    MissingPoint,
    #[error("model: {0}")]
    Model(EvaluationError),
    #[error("cq: {0}")]
    Cq(#[from] CqError),
    #[error("multipliers: {0}")]
    Multipliers(#[from] MultiplierError),
    #[error("tilt: {0}")]
    Tilt(#[from] TiltError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Error)]
#[error("malformed record: {0}")]
pub struct RecordError(#[from] serde_json::Error);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub n: usize,
    pub variables: Vec<String>,
    pub num_equalities: usize,
    pub num_inequalities: usize,
    pub point: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub feasible: bool,
    pub max_violation: f64,
    /// Most violated constraint when infeasible.
    pub violated_constraint: Option<usize>,
    pub stationary: bool,
    pub active_inequalities: Vec<usize>,
    pub objective_gradient: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSummary {
    pub nonempty: bool,
    /// `I+`: indices positive for some multiplier.
    pub support_union: Vec<usize>,
    pub full_support: Option<Vector>,
    pub vertex_count: Option<usize>,
    pub vertices: Option<Vec<Vector>>,
    pub bounded_multiplier: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub tool: String,
    pub version: String,
    pub problem: ProblemMeta,
    pub parameters: AnalysisOptions,
    pub stationarity: Stationarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cq: Option<CqReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<MultiplierSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<TiltReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// What the record concludes, in the order the pipeline can stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Infeasible,
    NotStationary,
    Verdict(Verdict),
}

impl AnalysisRecord {
    pub fn outcome(&self) -> Outcome {
        if !self.stationarity.feasible {
            Outcome::Infeasible
        } else if let Some(t) = &self.tilt {
            Outcome::Verdict(t.verdict)
        } else {
            Outcome::NotStationary
        }
    }

    /// `0` for a definite verdict, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.outcome() {
            Outcome::Verdict(Verdict::TiltStable | Verdict::NotTiltStable) => 0,
            _ => 2,
        }
    }
}

/// Runs model → cq → multipliers → tilt (→ oracle) at the problem's point.
pub fn analyze(p: &Problem, opts: &AnalysisOptions) -> Result<AnalysisRecord, AnalysisError> {
    let x = p.point().ok_or(AnalysisError::MissingPoint)?.to_vec();
    let mut record = AnalysisRecord {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        problem: ProblemMeta {
            name: p.name().to_string(),
            n: p.n(),
            variables: p.variables().to_vec(),
            num_equalities: p.num_eq(),
            num_inequalities: p.num_ineq(),
            point: x.clone(),
        },
        parameters: *opts,
        stationarity: Stationarity {
            feasible: false,
            max_violation: 0.0,
            violated_constraint: None,
            stationary: false,
            active_inequalities: Vec::new(),
            objective_gradient: None,
        },
        cq: None,
        multipliers: None,
        tilt: None,
        oracle: None,
        notes: Vec::new(),
    };

    let sd = match evaluate_stationary_data(p, &x, opts.tolerances()) {
        Ok(sd) => sd,
        Err(EvaluationError::Infeasible {
            constraint,
            violation,
        }) => {
            record.stationarity.max_violation = violation;
            record.stationarity.violated_constraint = Some(constraint);
            record.notes.push("point violates the constraints; analysis stopped".into());
            return Ok(record);
        }
        Err(e) => return Err(AnalysisError::Model(e)),
    };
    record.stationarity.feasible = true;
    record.stationarity.max_violation = p.max_violation(&x).map_or(0.0, |v| v.1);
    record.stationarity.active_inequalities = sd.active_ineq.clone();
    record.stationarity.objective_gradient = Some(sd.obj_grad.clone());

    let cq = analyze_cq(p, &sd, &opts.sampling(), opts.tol_pos)?;
    let poly = MultiplierPolyhedron::for_stationarity(&sd, opts.multipliers())?;
    if poly.is_empty() {
        record.multipliers = Some(MultiplierSummary {
            nonempty: false,
            support_union: Vec::new(),
            full_support: None,
            vertex_count: None,
            vertices: None,
            bounded_multiplier: None,
        });
        record.cq = Some(cq);
        record.notes.push("no multiplier satisfies the KKT system; point is not stationary".into());
        return Ok(record);
    }
    record.stationarity.stationary = true;

    let su = poly.support_union()?;
    let vertices = match poly.enumerate_vertices() {
        Ok(v) => Some(v.to_vec()),
        Err(MultiplierError::VertexGuard { constraints, max }) => {
            record.notes.push(format!(
                "vertex enumeration skipped: {constraints} constraints exceed the cap of {max}"
            ));
            None
        }
        Err(e) => return Err(e.into()),
    };
    record.multipliers = Some(MultiplierSummary {
        nonempty: true,
        support_union: su.indices.clone(),
        full_support: Some(su.full_support.clone()),
        vertex_count: vertices.as_ref().map(Vec::len),
        vertices,
        bounded_multiplier: poly.bounded_multiplier(opts.mscq_gamma)?,
    });

    let tilt = tilt_verdict(&sd, &poly, &cq, &opts.tilt())?;
    if tilt.verdict == Verdict::Inconclusive {
        record
            .notes
            .push("RCRCQ fails at the point; the second-order test is reported as a diagnostic only".into());
    }
    if tilt.marginal {
        record.notes.push("smallest reduced eigenvalue is within 1e-6 of zero".into());
    }
    if let Some(cfg) = &opts.oracle {
        let oracle = estimate_tilt_modulus(p, &x, cfg, Some(&tilt))?;
        if oracle.agreement.is_some_and(|a| !a.agrees) {
            record.notes.push("oracle estimate disagrees with the pointbased bound".into());
        }
        record.oracle = Some(oracle);
    }
    record.cq = Some(cq);
    record.tilt = Some(tilt);
    Ok(record)
}

/// JSON text of the record. Floats use the shortest representation that
/// parses back to the same bits.
pub fn serialize(r: &AnalysisRecord) -> String {
    serde_json::to_string_pretty(r).expect("records contain only finite values and string keys")
}

pub fn parse(text: &str) -> Result<AnalysisRecord, RecordError> {
    Ok(serde_json::from_str(text)?)
}

fn index_set(ix: &[usize]) -> String {
    let parts: Vec<String> = ix.iter().map(|i| format!("q{}", i + 1)).collect();
    format!("{{{}}}", parts.join(", "))
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn rank_line(name: &str, v: &RankVerdict) -> String {
    match v {
        RankVerdict::HoldsSampled { families, points } => {
            format!("{name}: holds-sampled ({families} families, {points} points)")
        }
        RankVerdict::FailsWithWitness(w) => format!(
            "{name}: fails-with-witness (family {} has rank {} at the point, {} at {})",
            index_set(&w.family),
            w.base_rank,
            w.other_rank,
            vector(&w.other_point)
        ),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// One line per constraint qualification.
pub fn cq_summary(cq: &CqReport) -> String {
    let holds = |b: bool| if b { "holds" } else { "fails" };
    let mut s = format!("LICQ: {}\n", holds(cq.licq));
    let _ = match &cq.mfcq.certificate {
        Some(v) if cq.mfcq.holds => writeln!(s, "MFCQ: holds (direction {})", vector(v)),
        _ => writeln!(s, "MFCQ: fails"),
    };
    let _ = writeln!(s, "{}", rank_line("CRCQ", &cq.crcq));
    let _ = writeln!(s, "{}", rank_line("RCRCQ", &cq.rcrcq));
    s
}

/// Human-readable summary. Constraints are numbered from 1 (`q1`, `q2`, ...).
pub fn summary(r: &AnalysisRecord) -> String {
    let mut s = String::new();
    let m = &r.problem;
    let _ = writeln!(
        s,
        "problem {}: {} variables, {} equality and {} inequality constraints",
        m.name, m.n, m.num_equalities, m.num_inequalities
    );
    let _ = writeln!(s, "point: {}", vector(&m.point));
    let st = &r.stationarity;
    if !st.feasible {
        let _ = writeln!(
            s,
            "feasible: no (q{} violated by {:e})",
            st.violated_constraint.map_or(0, |i| i + 1),
            st.max_violation
        );
    } else {
        let _ = writeln!(
            s,
            "feasible: yes; stationary: {}; active inequalities {}",
            yes_no(st.stationary),
            index_set(&st.active_inequalities)
        );
    }
    if let Some(cq) = &r.cq {
        s.push_str(&cq_summary(cq));
    }
    if let Some(mu) = &r.multipliers {
        if mu.nonempty {
            let _ = write!(s, "multipliers: I+ = {}", index_set(&mu.support_union));
            match mu.vertex_count {
                Some(k) => {
                    let _ = writeln!(s, ", {k} {}", if k == 1 { "vertex" } else { "vertices" });
                }
                None => s.push('\n'),
            }
        } else {
            let _ = writeln!(s, "multipliers: none");
        }
    }
    match (&r.tilt, r.outcome()) {
        (Some(t), _) => {
            let detail = match t.verdict {
                Verdict::TiltStable => format!(", bound {:.6}", t.tilt_bound.unwrap_or(0.0)),
                Verdict::NotTiltStable => format!(
                    " (lambda_min {:e}, failure direction {})",
                    t.lambda_min.unwrap_or(0.0),
                    vector(t.failure_direction.as_deref().unwrap_or(&[]))
                ),
                Verdict::Inconclusive => match t.lambda_min {
                    Some(l) => format!(" (lambda_min {l:e} reported as a diagnostic)"),
                    None => String::new(),
                },
            };
            let _ = writeln!(s, "verdict: {}{}", t.verdict.label(), detail);
        }
        (None, Outcome::Infeasible) => {
            let _ = writeln!(s, "verdict: infeasible point");
        }
        (None, _) => {
            let _ = writeln!(s, "verdict: not stationary");
        }
    }
    if let Some(o) = &r.oracle {
        let _ = write!(
            s,
            "oracle ({}): Lipschitz estimate {:.6} from {} pairs; single-valued: {}; untilted minimizer at point: {}; converged: {}",
            o.kind,
            o.lipschitz_estimate,
            o.pairs_used,
            yes_no(o.empirical_single_valued),
            yes_no(o.untilted_matches_reference),
            yes_no(o.all_converged)
        );
        if let Some(a) = o.agreement {
            let _ = write!(s, "; agrees with bound: {}", yes_no(a.agrees));
        }
        s.push('\n');
    }
    for n in &r.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}
