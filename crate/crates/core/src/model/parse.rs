use std::fmt;

use thiserror::Error;

use super::expr::{Expr, Func};
use super::problem::{Constraint, ConstraintKind, Problem, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("problem has no constraints (E ∪ I is empty)")]
    NoConstraints,
    #[error("{0}")]
    Problem(String),
}

/// Parse failure with a 1-based source location.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.kind)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Le,
    Eq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, col });
            i += 1;
            continue;
        }
        if c == '<' {
            if chars.get(i + 1) == Some(&'=') {
                out.push(Token { tok: Tok::Le, col });
                i += 2;
                continue;
            }
            return Err(syntax(line, col, "expected `<=`"));
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| syntax(line, col, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(v), col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
            continue;
        }
        return Err(syntax(line, col, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

/// Recursive-descent parser over one line's tokens.
struct ExprParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
    vars: &'a [String],
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let negative = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        let col = self.col();
        match self.peek() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                let n = *v as i32;
                self.pos += 1;
                Ok(Expr::pow(base, if negative { -n } else { n }))
            }
            Some(Tok::Num(_)) => Err(syntax(
                self.line,
                col,
                "exponent must be an integer literal (use exp/log for fractional powers)",
            )),
            _ => Err(syntax(self.line, col, "expected integer exponent after `^`")),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::constant(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(syntax(self.line, self.col(), format!("expected `(` after `{name}`")));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::call(f, arg));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::var(i)),
                    None => Err(ParseError {
                        line: self.line,
                        column: col,
                        kind: ParseErrorKind::UnknownIdentifier(name),
                    }),
                }
            }
            Some(t) => Err(syntax(self.line, col, format!("unexpected token {t:?}"))),
            None => Err(syntax(self.line, col, "unexpected end of expression")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.line, self.col(), "expected `)`"))
        }
    }
}

fn parse_expr_tokens(
    toks: &[Token],
    vars: &[String],
    line: usize,
    end_col: usize,
) -> Result<Expr, ParseError> {
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        end_col,
        vars,
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(syntax(line, p.col(), "trailing input after expression"));
    }
    Ok(e)
}

/// Splits `expr <op> 0` at the relational operator.
fn split_relation(
    toks: &[Token],
    op: Tok,
    op_text: &str,
    line: usize,
    end_col: usize,
) -> Result<usize, ParseError> {
    let at = toks
        .iter()
        .position(|t| t.tok == op)
        .ok_or_else(|| syntax(line, end_col, format!("expected `{op_text} 0`")))?;
    match &toks[at + 1..] {
        [Token { tok: Tok::Num(z), .. }] if *z == 0.0 => Ok(at),
        rest => {
            let col = rest.first().map_or(end_col, |t| t.col);
            Err(syntax(line, col, format!("right-hand side must be `{op_text} 0`")))
        }
    }
}

/// Parses a problem file (see the crate README for the grammar).
pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    parse_problem_named(text, "problem")
}

pub fn parse_problem_named(text: &str, name: &str) -> Result<Problem, ParseError> {
    let mut vars: Option<Vec<String>> = None;
    let mut objective: Option<Expr> = None;
    let mut constraints = Vec::new();
    let mut point: Option<Vec<f64>> = None;
    let mut last_line = 1;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let kw_col = content.len() - trimmed.len() + 1;
        let kw_end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let keyword = &trimmed[..kw_end];
        let rest = &trimmed[kw_end..];
        let rest_col = kw_col + kw_end;
        let end_col = content.chars().count() + 1;

        if vars.is_none() && keyword != "var" {
            return Err(syntax(line, kw_col, "first directive must be `var`"));
        }
        match keyword {
            "var" => {
                if vars.is_some() {
                    return Err(syntax(line, kw_col, "duplicate `var` directive"));
                }
                let mut names: Vec<String> = Vec::new();
                for tok in lex(rest, line, rest_col)? {
                    match tok.tok {
                        Tok::Ident(s) if Func::from_name(&s).is_none() => {
                            if names.contains(&s) {
                                return Err(syntax(line, tok.col, format!("duplicate variable `{s}`")));
                            }
                            names.push(s);
                        }
                        _ => return Err(syntax(line, tok.col, "expected variable name")),
                    }
                }
                if names.is_empty() {
                    return Err(syntax(line, end_col, "`var` needs at least one name"));
                }
                vars = Some(names);
            }
            "min" => {
                if objective.is_some() {
                    return Err(syntax(line, kw_col, "duplicate `min` directive"));
                }
                let toks = lex(rest, line, rest_col)?;
                objective = Some(parse_expr_tokens(&toks, vars.as_deref().unwrap_or(&[]), line, end_col)?);
            }
            "st" | "eq" => {
                let toks = lex(rest, line, rest_col)?;
                let (op, op_text, kind) = if keyword == "st" {
                    (Tok::Le, "<=", ConstraintKind::Inequality)
                } else {
                    (Tok::Eq, "=", ConstraintKind::Equality)
                };
                let at = split_relation(&toks, op, op_text, line, end_col)?;
                let end = toks[at].col;
                let expr = parse_expr_tokens(&toks[..at], vars.as_deref().unwrap_or(&[]), line, end)?;
                constraints.push(Constraint { kind, expr });
            }
            "point" => {
                if point.is_some() {
                    return Err(syntax(line, kw_col, "duplicate `point` directive"));
                }
                let toks = lex(rest, line, rest_col)?;
                let mut vals = Vec::new();
                let mut i = 0;
                while i < toks.len() {
                    let neg = toks[i].tok == Tok::Minus;
                    if neg {
                        i += 1;
                    }
                    match toks.get(i).map(|t| &t.tok) {
                        Some(Tok::Num(v)) => vals.push(if neg { -v } else { *v }),
                        _ => {
                            let col = toks.get(i).map_or(end_col, |t| t.col);
                            return Err(syntax(line, col, "expected number"));
                        }
                    }
                    i += 1;
                }
                let n = vars.as_ref().map_or(0, Vec::len);
                if vals.len() != n {
                    return Err(syntax(
                        line,
                        kw_col,
                        format!("`point` has {} coordinates, expected {n}", vals.len()),
                    ));
                }
                point = Some(vals);
            }
            other => return Err(syntax(line, kw_col, format!("unknown directive `{other}`"))),
        }
    }

    let vars = vars.ok_or_else(|| syntax(last_line, 1, "missing `var` directive"))?;
    let objective = objective.ok_or_else(|| syntax(last_line, 1, "missing `min` directive"))?;
    Problem::new(name, vars, objective, constraints, point).map_err(|e| ParseError {
        line: last_line,
        column: 1,
        kind: match e {
            ProblemError::NoConstraints => ParseErrorKind::NoConstraints,
            other => ParseErrorKind::Problem(other.to_string()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_problem() {
        let p = parse_problem("var x\nmin x^2\nst -x <= 0\npoint 1").unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.num_ineq(), 1);
        assert_eq!(p.num_eq(), 0);
        assert_eq!(p.point(), Some(&[1.0][..]));
    }

    #[test]
    fn no_constraints_is_rejected() {
        let err = parse_problem("var x\nmin x").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NoConstraints);
        assert!(err.to_string().contains("E ∪ I is empty"));
    }

    #[test]
    fn unknown_identifier_has_location() {
        let err = parse_problem("var x\nmin x + y\nst x <= 0").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert_eq!((err.line, err.column), (2, 9));
    }

    #[test]
    fn syntax_errors() {
        let cases = [
            ("min x\nvar x", 1),
            ("var x\nmin x +\nst x <= 0", 2),
            ("var x\nmin x\nst x <= 1", 3),
            ("var x\nmin x\nst x = 0", 3),
            ("var x\nmin x^0.5\nst x <= 0", 2),
            ("var x\nmin x\nst x <= 0\npoint 1 2", 4),
            ("var x\nmin x\nmin x\nst x <= 0", 3),
            ("var x\nmin (x\nst x <= 0", 2),
            ("var x\nmin x $ 2\nst x <= 0", 2),
        ];
        for (src, line) in cases {
            let err = parse_problem(src).unwrap_err();
            assert!(matches!(err.kind, ParseErrorKind::Syntax(_)), "{src}: {err}");
            assert_eq!(err.line, line, "{src}: {err}");
        }
    }

    #[test]
    fn comments_and_precedence() {
        let p = parse_problem("# header\nvar a b  # two vars\nmin -a^2 + 2*b/4\neq a - b = 0\n").unwrap();
        let v = p.objective().eval(&[3.0, 2.0]).unwrap();
        assert_eq!(v, -9.0 + 1.0);
        assert_eq!(p.num_eq(), 1);
    }

    #[test]
    fn negative_exponent_and_functions() {
        let p = parse_problem("var x\nmin x^-2 + exp(log(x)) + sin(x)*cos(x)\nst -x <= 0").unwrap();
        let x: f64 = 0.5;
        let want = 4.0 + 0.5 + x.sin() * x.cos();
        assert!((p.objective().eval(&[x]).unwrap() - want).abs() < 1e-14);
    }
}
