use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tiltstab::cq::analyze_cq;
use tiltstab::model::{check_derivatives, evaluate_stationary_data, parse_problem_named, sample_box, Problem};
use tiltstab::multipliers::MultiplierPolyhedron;
use tiltstab::oracle::OracleConfig;
use tiltstab::report::{self, AnalysisOptions};

/// Derivative check: sample count, box half-width, difference step, pass threshold.
const GRAD_POINTS: usize = 20;
const GRAD_HALF_WIDTH: f64 = 0.5;
const GRAD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "tiltstab", version, about = "Pointbased tilt-stability analysis for nonlinear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis: stationarity, constraint qualifications, multipliers, verdict.
    Analyze(Run),
    /// Full analysis with the brute-force tilt oracle enabled.
    Oracle(Run),
    /// Constraint qualifications at the declared point.
    Cq(Run),
    /// Extreme points of the multiplier set.
    Vertices(Run),
    /// Compare symbolic derivatives against central differences.
    CheckGrad(Run),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Args)]
struct Run {
    /// Problem file.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Sampling radius for rank-constancy checks.
    #[arg(long, default_value_t = AnalysisOptions::default().cq_radius)]
    radius: f64,
    /// Sample points for rank-constancy checks.
    #[arg(long, default_value_t = AnalysisOptions::default().cq_samples)]
    samples: usize,
    #[arg(long, default_value_t = AnalysisOptions::default().tol_rank)]
    tol_rank: f64,
    #[arg(long, default_value_t = AnalysisOptions::default().tol_active)]
    tol_active: f64,
    #[arg(long, default_value_t = AnalysisOptions::default().tol_feas)]
    tol_feas: f64,
    #[arg(long, default_value_t = AnalysisOptions::default().tol_pos)]
    tol_pos: f64,
    /// Oracle localization radius.
    #[arg(long, default_value_t = OracleConfig::default().gamma)]
    gamma: f64,
    /// Oracle tilt radius.
    #[arg(long, default_value_t = OracleConfig::default().delta)]
    delta: f64,
    /// Modulus for the bounded-multiplier certificate.
    #[arg(long, default_value_t = AnalysisOptions::default().mscq_gamma)]
    mscq_gamma: f64,
    /// Run the tilt oracle as part of `analyze`.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of active inequalities for subset enumeration.
    #[arg(long, default_value_t = AnalysisOptions::default().max_active)]
    max_active: usize,
    /// Largest number of constraints for vertex enumeration.
    #[arg(long, default_value_t = AnalysisOptions::default().max_vertex_constraints)]
    max_vertices: usize,
}

impl Run {
    fn options(&self, oracle: bool) -> AnalysisOptions {
        AnalysisOptions {
            tol_feas: self.tol_feas,
            tol_active: self.tol_active,
            tol_rank: self.tol_rank,
            tol_pos: self.tol_pos,
            cq_radius: self.radius,
            cq_samples: self.samples,
            seed: self.seed,
            max_active: self.max_active,
            max_vertex_constraints: self.max_vertices,
            mscq_gamma: self.mscq_gamma,
            oracle: (oracle || self.oracle).then(|| OracleConfig {
                gamma: self.gamma,
                delta: self.delta,
                seed: self.seed,
                ..OracleConfig::default()
            }),
        }
    }
}

fn load(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
    parse_problem_named(&text, name).with_context(|| format!("{}", path.display()))
}

fn configuration(run: &Run, opts: &AnalysisOptions) -> String {
    let mut s = String::from("configuration:\n");
    let _ = writeln!(s, "  input = {}", run.input.display());
    let _ = writeln!(s, "  tol_feas = {:e}", opts.tol_feas);
    let _ = writeln!(s, "  tol_active = {:e}", opts.tol_active);
    let _ = writeln!(s, "  tol_rank = {:e}", opts.tol_rank);
    let _ = writeln!(s, "  tol_pos = {:e}", opts.tol_pos);
    let _ = writeln!(s, "  radius = {:e}", opts.cq_radius);
    let _ = writeln!(s, "  samples = {}", opts.cq_samples);
    let _ = writeln!(s, "  seed = {}", opts.seed);
    let _ = writeln!(s, "  max_active = {}", opts.max_active);
    let _ = writeln!(s, "  max_vertices = {}", opts.max_vertex_constraints);
    let _ = writeln!(s, "  mscq_gamma = {:e}", opts.mscq_gamma);
    match &opts.oracle {
        Some(o) => {
            let _ = writeln!(
                s,
                "  oracle = on (gamma {:e}, delta {:e}, {} tilts, {} starts, penalty {:e} x{:e} over {} rounds, tol_cluster {:e})",
                o.gamma,
                o.delta,
                o.n_tilts,
                o.n_starts,
                o.penalty.initial,
                o.penalty.growth,
                o.penalty.rounds,
                o.tol_cluster
            );
        }
        None => {
            let _ = writeln!(s, "  oracle = off (gamma {:e}, delta {:e})", run.gamma, run.delta);
        }
    }
    s
}

fn format_vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

/// Returns the report body and the exit code.
fn execute(command: &Command) -> Result<(String, u8)> {
    let (run, oracle) = match command {
        Command::Oracle(r) => (r, true),
        Command::Analyze(r) | Command::Cq(r) | Command::Vertices(r) | Command::CheckGrad(r) => (r, false),
    };
    let opts = run.options(oracle);
    let p = load(&run.input)?;
    let config = configuration(run, &opts);
    let structured = run.format == Format::Structured;

    let (body, code) = match command {
        Command::Analyze(_) | Command::Oracle(_) => {
            let rec = report::analyze(&p, &opts)?;
            let body = if structured {
                report::serialize(&rec)
            } else {
                report::summary(&rec)
            };
            (body, rec.exit_code() as u8)
        }
        Command::Cq(_) => {
            let x = p.point().context("problem has no `point` declaration")?;
            let sd = evaluate_stationary_data(&p, x, opts.tolerances())?;
            let cq = analyze_cq(&p, &sd, &opts.sampling(), opts.tol_pos)?;
            let body = if structured {
                serde_json::to_string_pretty(&cq)?
            } else {
                report::cq_summary(&cq)
            };
            (body, 0)
        }
        Command::Vertices(_) => {
            let x = p.point().context("problem has no `point` declaration")?;
            let sd = evaluate_stationary_data(&p, x, opts.tolerances())?;
            let poly = MultiplierPolyhedron::for_stationarity(&sd, opts.multipliers())?;
            if poly.is_empty() {
                let body = if structured { "[]".to_string() } else { "no multipliers: point is not stationary\n".to_string() };
                (body, 2)
            } else {
                let vs = poly.enumerate_vertices()?;
                let body = if structured {
                    serde_json::to_string_pretty(vs)?
                } else {
                    let mut s = format!("{} vertices\n", vs.len());
                    for v in vs {
                        let _ = writeln!(s, "  {}", format_vector(v));
                    }
                    s
                };
                (body, 0)
            }
        }
        Command::CheckGrad(_) => {
            let center = p.point().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.n()]);
            let points = sample_box(&center, GRAD_HALF_WIDTH, GRAD_POINTS, opts.seed);
            let chk = check_derivatives(&p, &points, GRAD_STEP);
            if chk.points_checked == 0 {
                bail!("no sample point could be evaluated");
            }
            let pass = chk.max_gradient_rel_err < GRAD_TOL && chk.max_hessian_rel_err < GRAD_TOL;
            let body = if structured {
                serde_json::to_string_pretty(&chk)?
            } else {
                format!(
                    "points checked: {}\nmax relative gradient error: {:e}\nmax relative Hessian error: {:e}\nresult: {}\n",
                    chk.points_checked,
                    chk.max_gradient_rel_err,
                    chk.max_hessian_rel_err,
                    if pass { "pass" } else { "FAIL" }
                )
            };
            (body, if pass { 0 } else { 1 })
        }
    };

    let mut out = if structured {
        eprint!("{config}");
        format!("{}\n", body.trim_end())
    } else {
        format!("{config}{body}")
    };
    if let Some(path) = &run.output {
        std::fs::write(path, &out).with_context(|| format!("cannot write {}", path.display()))?;
        out = format!("wrote {}\n", path.display());
    }
    Ok((out, code))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli.command) {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
