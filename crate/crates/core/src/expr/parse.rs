//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' factor)? | '-' factor
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x1..xd`; for `d <= 3` the aliases `x`, `y`, `z` are also
//! accepted.

use super::{BinOp, Expr, ExprError, Func};

/// Parse `source` as an expression over `dim` variables.
pub fn parse(source: &str, dim: usize) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: source.as_bytes(),
        text: source,
        pos: 0,
        dim,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::mul(lhs, self.factor()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(Expr::neg(self.factor()?));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.factor()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = &self.text[start..self.pos];
        let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !v.is_finite() {
            return Err(ExprError::Syntax {
                offset: start,
                message: format!("numeric literal `{text}` out of range"),
            });
        }
        Ok(Expr::constant(v))
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        if self.peek() == Some(b'(') {
            self.pos += 1;
            return self.call(name, start);
        }
        self.variable(name, start)
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Expr, ExprError> {
        let index = match name {
            "x" if self.dim <= 3 => Some(1),
            "y" if self.dim <= 3 => Some(2),
            "z" if self.dim <= 3 => Some(3),
            _ => name
                .strip_prefix('x')
                .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|rest| rest.parse::<usize>().ok())
                .filter(|&i| i >= 1),
        };
        match index {
            Some(i) if i <= self.dim => Ok(Expr::var(i - 1)),
            Some(_) => Err(ExprError::VariableOutOfRange {
                name: name.to_string(),
                offset,
                dim: self.dim,
            }),
            None => Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                offset,
            }),
        }
    }

    fn call(&mut self, name: &str, offset: usize) -> Result<Expr, ExprError> {
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.syntax("expected `)` or `,`"));
        }
        let arity = |expected: usize| {
            if args.len() == expected {
                Ok(())
            } else {
                Err(ExprError::Arity {
                    name: name.to_string(),
                    offset,
                    expected,
                    found: args.len(),
                })
            }
        };
        if let Some(f) = Func::from_name(name) {
            arity(1)?;
            let a = args.pop().expect("one argument");
            return Ok(Expr::func(f, a));
        }
        let op = match name {
            "pow" => BinOp::Pow,
            "min" => BinOp::Min,
            "max" => BinOp::Max,
            _ => {
                return Err(ExprError::UnknownIdentifier {
                    name: name.to_string(),
                    offset,
                })
            }
        };
        arity(2)?;
        let b = args.pop().expect("two arguments");
        let a = args.pop().expect("two arguments");
        Ok(Expr::binary(op, a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;

    #[test]
    fn grammar_example_structure() {
        let e = parse("x^2 + exp(-y)", 2).unwrap();
        let expected = Expr::add(
            Expr::pow(Expr::var(0), Expr::constant(2.0)),
            Expr::func(Func::Exp, Expr::neg(Expr::var(1))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn constant_source() {
        assert_eq!(parse("1", 3).unwrap().as_const(), Some(1.0));
    }

    #[test]
    fn trailing_operator_reports_offset() {
        let err = parse("x *", 2).unwrap_err();
        assert!(matches!(err, ExprError::Syntax { offset: 3, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_associativity() {
        let d = 3;
        // unary minus binds looser than ^
        assert_eq!(parse("-x^2", d).unwrap().eval(&[3.0, 0.0, 0.0]), -9.0);
        // ^ is right-associative
        assert_eq!(parse("2^3^2", d).unwrap().as_const(), Some(512.0));
        // - and / are left-associative
        assert_eq!(parse("8-4-2", d).unwrap().as_const(), Some(2.0));
        assert_eq!(parse("8/4/2", d).unwrap().as_const(), Some(1.0));
        // unary minus binds tighter than *
        let e = parse("-x*y", d).unwrap();
        assert!(matches!(e.node(), Node::Binary(BinOp::Mul, a, _) if matches!(a.node(), Node::Neg(_))));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse("foo + 1", 2),
            Err(ExprError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse("1 + exp(x, y)", 2),
            Err(ExprError::Arity {
                expected: 1,
                found: 2,
                offset: 4,
                ..
            })
        ));
        assert!(matches!(
            parse("x3", 2),
            Err(ExprError::VariableOutOfRange { dim: 2, .. })
        ));
        assert!(matches!(parse("z", 2), Err(ExprError::VariableOutOfRange { .. })));
        assert!(matches!(parse("x", 4), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("(x", 1), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("1e400", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("1e", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x0", 1), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("", 1), Err(ExprError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn aliases_and_indexed_names_agree() {
        assert_eq!(parse("x + y*z", 3).unwrap(), parse("x1 + x2*x3", 3).unwrap());
        assert_eq!(parse("x10", 12).unwrap(), Expr::var(9));
    }

    #[test]
    fn pow_function_matches_caret() {
        assert_eq!(parse("pow(x, 3)", 1).unwrap(), parse("x^3", 1).unwrap());
    }

    #[test]
    fn decimal_forms() {
        assert_eq!(parse(".5", 1).unwrap().as_const(), Some(0.5));
        assert_eq!(parse("2.", 1).unwrap().as_const(), Some(2.0));
        assert_eq!(parse("1.5E+2", 1).unwrap().as_const(), Some(150.0));
    }
}
