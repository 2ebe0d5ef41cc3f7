//! Recursive-descent parser for the coefficient grammar, with constant
//! folding. Parsing is total: every input yields an AST or a positioned
//! [`ParseError`], never a panic.

use super::{Ast, Expression, ParseError};

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
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let c = self.src[self.pos] as char;
            let start = self.pos;
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.pos += 1;
                }
                '+' => {
                    out.push((start, Tok::Plus));
                    self.pos += 1;
                }
                '-' => {
                    out.push((start, Tok::Minus));
                    self.pos += 1;
                }
                '*' => {
                    out.push((start, Tok::Star));
                    self.pos += 1;
                }
                '/' => {
                    out.push((start, Tok::Slash));
                    self.pos += 1;
                }
                '^' => {
                    out.push((start, Tok::Caret));
                    self.pos += 1;
                }
                '(' => {
                    out.push((start, Tok::LParen));
                    self.pos += 1;
                }
                ')' => {
                    out.push((start, Tok::RParen));
                    self.pos += 1;
                }
                '0'..='9' | '.' => {
                    let tok = self.number(start)?;
                    out.push((start, tok));
                }
                'a'..='z' | 'A'..='Z' | '_' => {
                    let mut end = self.pos;
                    while end < self.src.len() {
                        let ch = self.src[end] as char;
                        if ch.is_ascii_alphanumeric() || ch == '_' {
                            end += 1;
                        } else {
                            break;
                        }
                    }
                    let name = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_string();
                    self.pos = end;
                    out.push((start, Tok::Ident(name)));
                }
                other => return Err(ParseError::UnexpectedChar { pos: start, ch: other }),
            }
        }
        Ok(out)
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let mut end = self.pos;
        let mut seen_dot = false;
        while end < self.src.len() {
            let ch = self.src[end] as char;
            if ch.is_ascii_digit() {
                end += 1;
            } else if ch == '.' && !seen_dot {
                seen_dot = true;
                end += 1;
            } else if (ch == 'e' || ch == 'E') && end > self.pos {
                // exponent part: e[+/-]digits
                let mut e2 = end + 1;
                if e2 < self.src.len() && (self.src[e2] == b'+' || self.src[e2] == b'-') {
                    e2 += 1;
                }
                if e2 < self.src.len() && (self.src[e2] as char).is_ascii_digit() {
                    end = e2;
                    while end < self.src.len() && (self.src[end] as char).is_ascii_digit() {
                        end += 1;
                    }
                }
                break;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..end]).unwrap();
        self.pos = end;
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ParseError::BadNumber { pos: start, text: text.to_string() })
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    cur: usize,
    n: usize,
    params: &'a [(&'a str, f64)],
    end_pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(usize, Tok)> {
        self.toks.get(self.cur)
    }

    fn next(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.cur).cloned();
        if t.is_some() {
            self.cur += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        while let Some((_, tok)) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Ast::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((_, tok)) = self.peek() {
            match tok {
                Tok::Star => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.next();
                    let rhs = self.unary()?;
                    lhs = Ast::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            Some((_, Tok::Minus)) => {
                self.next();
                Ok(Ast::Neg(Box::new(self.unary()?)))
            }
            Some((_, Tok::Plus)) => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if let Some((pos, Tok::Caret)) = self.peek().cloned() {
            self.next();
            // sign and parentheses allowed in the exponent; it must fold to a
            // constant, which keeps jets exact
            let expo_ast = self.unary()?;
            match fold(expo_ast) {
                Ast::Const(c) => Ok(Ast::Pow(Box::new(base), c)),
                _ => Err(ParseError::NonConstantExponent { pos }),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        match self.next() {
            None => Err(ParseError::UnexpectedEnd { pos: self.end_pos }),
            Some((_, Tok::Num(v))) => Ok(Ast::Const(v)),
            Some((pos, Tok::LParen)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    Some((p, t)) => Err(ParseError::Unexpected {
                        pos: p,
                        expected: "')'",
                        found: format!("{t:?}"),
                    }),
                    None => Err(ParseError::UnexpectedEnd { pos }),
                }
            }
            Some((pos, Tok::Ident(name))) => self.ident(pos, name),
            Some((pos, t)) => Err(ParseError::Unexpected {
                pos,
                expected: "a number, identifier or '('",
                found: format!("{t:?}"),
            }),
        }
    }

    fn ident(&mut self, pos: usize, name: String) -> Result<Ast, ParseError> {
        match name.as_str() {
            "r" => return Ok(Ast::Radius),
            "sqrt" | "exp" | "log" => {
                let arg = self.call_argument(pos)?;
                return Ok(match name.as_str() {
                    "sqrt" => Ast::Sqrt(Box::new(arg)),
                    "exp" => Ast::Exp(Box::new(arg)),
                    _ => Ast::Log(Box::new(arg)),
                });
            }
            "pi" => return Ok(Ast::Const(std::f64::consts::PI)),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = rest
                    .parse()
                    .map_err(|_| ParseError::BadNumber { pos, text: name.clone() })?;
                if index == 0 || index > self.n {
                    return Err(ParseError::CoordIndexOutOfRange { pos, index, dim: self.n });
                }
                return Ok(Ast::Coord(index - 1));
            }
        }
        if let Some((_, v)) = self.params.iter().find(|(p, _)| *p == name) {
            return Ok(Ast::Const(*v));
        }
        Err(ParseError::UnknownIdentifier { pos, name })
    }

    fn call_argument(&mut self, pos: usize) -> Result<Ast, ParseError> {
        match self.next() {
            Some((_, Tok::LParen)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    Some((p, t)) => Err(ParseError::Unexpected {
                        pos: p,
                        expected: "')'",
                        found: format!("{t:?}"),
                    }),
                    None => Err(ParseError::UnexpectedEnd { pos }),
                }
            }
            Some((p, t)) => Err(ParseError::Unexpected {
                pos: p,
                expected: "'(' after function name",
                found: format!("{t:?}"),
            }),
            None => Err(ParseError::UnexpectedEnd { pos }),
        }
    }
}

/// Constant folding; domain-violating folds (1/0, log(-1), ...) are left
/// unfolded so the error surfaces at evaluation with full context.
fn fold(ast: Ast) -> Ast {
    macro_rules! binary {
        ($variant:ident, $a:expr, $b:expr, $op:expr) => {{
            let fa = fold(*$a);
            let fb = fold(*$b);
            if let (Ast::Const(x), Ast::Const(y)) = (&fa, &fb) {
                let v: f64 = $op(*x, *y);
                if v.is_finite() {
                    return Ast::Const(v);
                }
            }
            Ast::$variant(Box::new(fa), Box::new(fb))
        }};
    }
    match ast {
        Ast::Add(a, b) => binary!(Add, a, b, |x: f64, y: f64| x + y),
        Ast::Sub(a, b) => binary!(Sub, a, b, |x: f64, y: f64| x - y),
        Ast::Mul(a, b) => binary!(Mul, a, b, |x: f64, y: f64| x * y),
        Ast::Div(a, b) => binary!(Div, a, b, |x: f64, y: f64| x / y),
        Ast::Neg(a) => {
            let fa = fold(*a);
            if let Ast::Const(x) = fa {
                return Ast::Const(-x);
            }
            Ast::Neg(Box::new(fa))
        }
        Ast::Pow(a, p) => {
            let fa = fold(*a);
            if let Ast::Const(x) = fa {
                let v = x.powf(p);
                if v.is_finite() {
                    return Ast::Const(v);
                }
            }
            Ast::Pow(Box::new(fa), p)
        }
        Ast::Sqrt(a) => {
            let fa = fold(*a);
            if let Ast::Const(x) = fa {
                if x > 0.0 {
                    return Ast::Const(x.sqrt());
                }
            }
            Ast::Sqrt(Box::new(fa))
        }
        Ast::Exp(a) => {
            let fa = fold(*a);
            if let Ast::Const(x) = fa {
                let v = x.exp();
                if v.is_finite() {
                    return Ast::Const(v);
                }
            }
            Ast::Exp(Box::new(fa))
        }
        Ast::Log(a) => {
            let fa = fold(*a);
            if let Ast::Const(x) = fa {
                if x > 0.0 {
                    return Ast::Const(x.ln());
                }
            }
            Ast::Log(Box::new(fa))
        }
        leaf => leaf,
    }
}

/// Parse a coefficient function in dimension `n`.
///
/// The identifier `n` is pre-bound to the dimension so radial families can be
/// written as in `1 + (m/2)*r^(2-n)`.
pub fn parse_scalar_field(source: &str, n: usize) -> Result<Expression, ParseError> {
    parse_with_params(source, n, &[])
}

/// Parse with additional named constants bound before folding.
pub fn parse_with_params(
    source: &str,
    n: usize,
    params: &[(&str, f64)],
) -> Result<Expression, ParseError> {
    if n < 3 {
        return Err(ParseError::DimensionTooSmall { dim: n });
    }
    if source.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let toks = Lexer::new(source).tokens()?;
    let mut bound: Vec<(&str, f64)> = vec![("n", n as f64)];
    bound.extend_from_slice(params);
    let mut parser =
        Parser { toks, cur: 0, n, params: &bound, end_pos: source.len() };
    let ast = parser.expr()?;
    if let Some((pos, t)) = parser.peek() {
        return Err(ParseError::Unexpected {
            pos: *pos,
            expected: "end of input",
            found: format!("{t:?}"),
        });
    }
    Ok(Expression { n, ast: fold(ast) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_garbage_with_position() {
        assert!(matches!(
            parse_scalar_field("1 + $", 3),
            Err(ParseError::UnexpectedChar { pos: 4, ch: '$' })
        ));
        assert!(matches!(parse_scalar_field("1 +", 3), Err(ParseError::UnexpectedEnd { .. })));
        assert!(matches!(
            parse_scalar_field("foo(2)", 3),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse_scalar_field("", 3), Err(ParseError::EmptyInput)));
    }

    #[test]
    fn rejects_non_constant_exponent() {
        assert!(matches!(
            parse_scalar_field("r^x1", 3),
            Err(ParseError::NonConstantExponent { .. })
        ));
        // constant subexpressions in the exponent are fine
        assert!(parse_scalar_field("r^(2-n)", 3).is_ok());
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_scalar_field("-x1^2 + 2*3", 3).unwrap();
        // -(x1^2) + 6, not (-x1)^2
        assert!((e.eval(&[2.0, 0.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        let e = parse_scalar_field("2^3^1", 3).unwrap();
        assert!((e.eval(&[1.0, 1.0, 1.0]).unwrap() - 8.0).abs() < 1e-15);
    }

    #[test]
    fn folding_handles_nested_constants() {
        let e = parse_scalar_field("(1+1)*(3-1) + 0*x1", 3).unwrap();
        // 0*x1 is not folded away (no algebraic simplification), but constants are
        assert!((e.eval(&[5.0, 0.0, 1.0]).unwrap() - 4.0).abs() < 1e-15);
    }
}
