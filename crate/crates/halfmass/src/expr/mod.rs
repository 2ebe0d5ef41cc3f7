//! Expression parsing and exact differentiation for metric coefficients.
//!
//! The grammar is small arithmetic over the coordinates `x1..xn`, the radius
//! `r`, numeric literals and bound named constants, with `+ - * /`, `^` with a
//! constant exponent, `sqrt`, `exp` and `log`. Expressions are immutable after
//! parse and evaluation is pure, so they can be shared freely across threads.

mod jet;
mod parse;

pub use jet::Jet2;
pub use parse::{parse_scalar_field, parse_with_params};

/// Syntax tree of a parsed coefficient function.
///
/// After the fold pass every `Pow` exponent is a `Const` node; non-constant
/// exponents are rejected at parse time to keep jets exact.
#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Const(f64),
    /// 0-based coordinate index.
    Coord(usize),
    Radius,
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Neg(Box<Ast>),
    Pow(Box<Ast>, f64),
    Sqrt(Box<Ast>),
    Exp(Box<Ast>),
    Log(Box<Ast>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("at byte {pos}: unexpected character '{ch}'")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("at byte {pos}: unexpected end of input")]
    UnexpectedEnd { pos: usize },
    #[error("at byte {pos}: expected {expected}, found '{found}'")]
    Unexpected { pos: usize, expected: &'static str, found: String },
    #[error("at byte {pos}: malformed number literal '{text}'")]
    BadNumber { pos: usize, text: String },
    #[error("at byte {pos}: unknown identifier '{name}'")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("at byte {pos}: coordinate index {index} out of range for dimension {dim}")]
    CoordIndexOutOfRange { pos: usize, index: usize, dim: usize },
    #[error("at byte {pos}: exponent does not fold to a constant")]
    NonConstantExponent { pos: usize },
    #[error("empty expression")]
    EmptyInput,
    #[error("dimension {dim} is below the minimum of 3")]
    DimensionTooSmall { dim: usize },
}

#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {value}")]
    LogNonPositive { value: f64 },
    #[error("sqrt of non-positive value {value}")]
    SqrtNonPositive { value: f64 },
    #[error("power {base}^{exponent} outside the real domain")]
    PowDomain { base: f64, exponent: f64 },
    #[error("radius jet requested at the origin")]
    RadiusZero,
    #[error("point dimension does not match the expression dimension")]
    DimensionMismatch,
}

/// A parsed, immutable coefficient function on `{x ∈ ℝⁿ : r > 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    n: usize,
    ast: Ast,
}

impl Expression {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    /// Build directly from an AST; used by the built-in metric families.
    pub fn from_ast(n: usize, ast: Ast) -> Self {
        Expression { n, ast }
    }

    /// Depth of the tree along its longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn d(a: &Ast) -> usize {
            match a {
                Ast::Const(_) | Ast::Coord(_) | Ast::Radius => 1,
                Ast::Add(l, r) | Ast::Sub(l, r) | Ast::Mul(l, r) | Ast::Div(l, r) => {
                    1 + d(l).max(d(r))
                }
                Ast::Neg(e) | Ast::Sqrt(e) | Ast::Exp(e) | Ast::Log(e) | Ast::Pow(e, _) => 1 + d(e),
            }
        }
        d(&self.ast)
    }

    /// Value together with exact gradient and Hessian at `x`.
    pub fn eval_jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        if x.len() != self.n {
            return Err(EvalError::DimensionMismatch);
        }
        eval_ast(&self.ast, x)
    }

    /// Value only; same domain checks as [`eval_jet`](Self::eval_jet).
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval_jet(x).map(|j| j.value)
    }
}

fn eval_ast(ast: &Ast, x: &[f64]) -> Result<Jet2, EvalError> {
    let n = x.len();
    match ast {
        Ast::Const(c) => Ok(Jet2::constant(n, *c)),
        Ast::Coord(i) => Ok(Jet2::coordinate(n, *i, x[*i])),
        Ast::Radius => Jet2::radius(x),
        Ast::Add(a, b) => Ok(eval_ast(a, x)?.add(&eval_ast(b, x)?)),
        Ast::Sub(a, b) => Ok(eval_ast(a, x)?.sub(&eval_ast(b, x)?)),
        Ast::Mul(a, b) => Ok(eval_ast(a, x)?.mul(&eval_ast(b, x)?)),
        Ast::Div(a, b) => eval_ast(a, x)?.div(&eval_ast(b, x)?),
        Ast::Neg(a) => Ok(eval_ast(a, x)?.neg()),
        Ast::Pow(a, p) => eval_ast(a, x)?.powf(*p),
        Ast::Sqrt(a) => eval_ast(a, x)?.sqrt(),
        Ast::Exp(a) => Ok(eval_ast(a, x)?.exp()),
        Ast::Log(a) => eval_ast(a, x)?.ln(),
    }
}

impl std::fmt::Display for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt_ast(&self.ast, f)
    }
}

// Fully parenthesized printing keeps the round trip trivially stable.
fn fmt_ast(ast: &Ast, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    match ast {
        Ast::Const(c) => {
            if *c < 0.0 {
                write!(f, "({})", fmt_f64(*c))
            } else {
                write!(f, "{}", fmt_f64(*c))
            }
        }
        Ast::Coord(i) => write!(f, "x{}", i + 1),
        Ast::Radius => write!(f, "r"),
        Ast::Add(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, f)?;
            write!(f, " + ")?;
            fmt_ast(b, f)?;
            write!(f, ")")
        }
        Ast::Sub(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, f)?;
            write!(f, " - ")?;
            fmt_ast(b, f)?;
            write!(f, ")")
        }
        Ast::Mul(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, f)?;
            write!(f, "*")?;
            fmt_ast(b, f)?;
            write!(f, ")")
        }
        Ast::Div(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, f)?;
            write!(f, "/")?;
            fmt_ast(b, f)?;
            write!(f, ")")
        }
        Ast::Neg(a) => {
            write!(f, "(-")?;
            fmt_ast(a, f)?;
            write!(f, ")")
        }
        Ast::Pow(a, p) => {
            fmt_ast(a, f)?;
            if *p < 0.0 {
                write!(f, "^({})", fmt_f64(*p))
            } else {
                write!(f, "^{}", fmt_f64(*p))
            }
        }
        Ast::Sqrt(a) => {
            write!(f, "sqrt(")?;
            fmt_ast(a, f)?;
            write!(f, ")")
        }
        Ast::Exp(a) => {
            write!(f, "exp(")?;
            fmt_ast(a, f)?;
            write!(f, ")")
        }
        Ast::Log(a) => {
            write!(f, "log(")?;
            fmt_ast(a, f)?;
            write!(f, ")")
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips through f64
    let s = format!("{v}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad_fd(e: &Expression, x: &[f64], i: usize, h: f64) -> f64 {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h)
    }

    #[test]
    fn spine_depth_of_basic_expression() {
        let e = parse_scalar_field("1 + 0.5*r^(-1)", 3).unwrap();
        assert_eq!(e.depth(), 4);
    }

    #[test]
    fn coordinate_out_of_range_is_rejected() {
        let err = parse_scalar_field("x4", 3).unwrap_err();
        assert!(matches!(err, ParseError::CoordIndexOutOfRange { index: 4, dim: 3, .. }));
    }

    #[test]
    fn bound_constants_fold_to_the_same_ast() {
        let folded =
            parse_with_params("1 + (m/2)*r^(2-n)", 3, &[("m", 1.0), ("n", 3.0)]).unwrap();
        let direct = parse_scalar_field("1+0.5*r^(-1)", 3).unwrap();
        assert_eq!(folded, direct);
    }

    #[test]
    fn jet_of_one_plus_half_over_r() {
        // Central finite-difference oracle at h = 1e-5, per the module contract.
        let e = parse_scalar_field("1+0.5/r", 3).unwrap();
        let x = [0.0, 0.0, 2.0];
        let j = e.eval_jet(&x).unwrap();
        assert!((j.value - 1.25).abs() < 1e-15);
        // Closed form: ∇(0.5/r) = -0.5 x / r³ = (0, 0, -0.125) at (0,0,2).
        let expect = [0.0, 0.0, -0.125];
        for i in 0..3 {
            assert!((j.grad(i) - expect[i]).abs() < 1e-14);
            assert!((j.grad(i) - grad_fd(&e, &x, i, 1e-5)).abs() < 1e-9);
        }
    }

    #[test]
    fn polynomial_example() {
        let e = parse_scalar_field("x1*x3", 3).unwrap();
        let j = e.eval_jet(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(j.value, 3.0);
        assert_eq!(j.gradient_vec(), vec![3.0, 0.0, 1.0]);
        assert_eq!(j.hess(0, 2), 1.0);
        assert_eq!(j.hess(1, 1), 0.0);
    }

    #[test]
    fn reciprocal_radius_example() {
        let e = parse_scalar_field("r^(-1)", 3).unwrap();
        let j = e.eval_jet(&[3.0, 0.0, 4.0]).unwrap();
        assert!((j.value - 0.2).abs() < 1e-15);
        assert!(j.laplacian().abs() < 1e-15);
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse_scalar_field("log(x1)", 3).unwrap();
        assert!(matches!(e.eval(&[-1.0, 0.0, 1.0]), Err(EvalError::LogNonPositive { .. })));
        let e = parse_scalar_field("1/x1", 3).unwrap();
        assert!(matches!(e.eval(&[0.0, 1.0, 1.0]), Err(EvalError::DivisionByZero)));
        let e = parse_scalar_field("x1^0.5", 3).unwrap();
        assert!(matches!(e.eval(&[-2.0, 1.0, 1.0]), Err(EvalError::PowDomain { .. })));
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "1 + 0.5*r^(-1)",
            "x1*x3 - sqrt(x2 + 4)",
            "exp(-r)*log(1+x1*x1)",
            "(2 - x3)^3 / (1 + r)",
            "-x2^2 + 1e-3",
        ] {
            let e = parse_scalar_field(src, 3).unwrap();
            let printed = e.to_string();
            let reparsed = parse_scalar_field(&printed, 3).unwrap();
            assert_eq!(e, reparsed, "round trip failed for {src} -> {printed}");
        }
    }
}
