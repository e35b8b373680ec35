//! Problem model: expression trees, the problem-file parser, symbolic
//! derivatives and evaluation of first/second-order data at a point.

mod expr;
mod parse;
mod problem;

pub use expr::{EvalError, Expr, ExprDisplay, Func};
pub use parse::{parse_problem, parse_problem_named, ParseError, ParseErrorKind};
pub use problem::{
    check_derivatives, evaluate_stationary_data, sample_box, Constraint, ConstraintKind,
    DerivativeCheck, EvaluationError, Problem, ProblemError, StationaryData, Tolerances,
    DEFAULT_TOL_ACTIVE, DEFAULT_TOL_FEAS,
};
