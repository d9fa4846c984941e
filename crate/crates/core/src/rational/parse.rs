//! Expression grammar for rational functions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' ['-'] integer)?
//! atom   := integer | identifier | 'i' | '(' expr ')'
//! ```
//!
//! Whitespace is ignored. `i` is the imaginary unit and cannot name a variable.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{GaussianRational, RationalFn};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprError {
    /// 1-based column of the offending character.
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let col = k + 1;
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() {
            let start = k;
            while k < chars.len() && chars[k].is_ascii_digit() {
                k += 1;
            }
            let digits: String = chars[start..k].iter().collect();
            out.push((Tok::Int(digits.parse().unwrap()), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = k;
            while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            out.push((Tok::Ident(chars[start..k].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), col));
            k += 1;
        } else {
            return Err(ExprError {
                column: col,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
    vars: &'a [String],
    params: &'a BTreeMap<String, GaussianRational>,
}

impl Parser<'_> {
    fn n(&self) -> usize {
        self.vars.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.col(),
            message: message.into(),
        })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<RationalFn, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<RationalFn, ExprError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.peek() == Some(&Tok::Op('/')) {
                let col = self.col();
                self.pos += 1;
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(ExprError {
                        column: col,
                        message: "division by zero".into(),
                    });
                }
                acc = acc.div(&d);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<RationalFn, ExprError> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<RationalFn, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let neg = self.eat('-');
        let Some(Tok::Int(k)) = self.peek().cloned() else {
            return self.err("exponent must be an integer literal");
        };
        self.pos += 1;
        let k: i32 = match k.try_into() {
            Ok(k) if k <= 4096 => k,
            _ => return self.err("exponent too large"),
        };
        if neg && base.is_zero() {
            return self.err("zero raised to a negative power");
        }
        Ok(base.pow(if neg { -k } else { k }))
    }

    fn atom(&mut self) -> Result<RationalFn, ExprError> {
        let n = self.n();
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(RationalFn::constant(n, BigRational::from_integer(v).into()))
            }
            Some(Tok::Ident(name)) => {
                if name == "i" {
                    self.pos += 1;
                    return Ok(RationalFn::constant(n, GaussianRational::i()));
                }
                if let Some(k) = self.vars.iter().position(|v| *v == name) {
                    self.pos += 1;
                    return Ok(RationalFn::var(n, k));
                }
                if let Some(c) = self.params.get(&name) {
                    self.pos += 1;
                    return Ok(RationalFn::constant(n, c.clone()));
                }
                self.err(format!("undeclared variable `{name}`"))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parses an expression in the given variables; `params` name constants.
pub fn parse_rational(text: &str, vars: &[String], params: &BTreeMap<String, GaussianRational>) -> Result<RationalFn, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: text.chars().count() + 1,
        vars,
        params,
    };
    if p.peek().is_none() {
        return p.err("empty expression");
    }
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses a constant expression (no variables).
pub fn parse_constant(text: &str, params: &BTreeMap<String, GaussianRational>) -> Result<GaussianRational, ExprError> {
    let f = parse_rational(text, &[], params)?;
    f.constant_value().ok_or(ExprError {
        column: 1,
        message: "expected a constant".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> Vec<String> {
        vec!["z1".into(), "z2".into()]
    }

    fn p(s: &str) -> RationalFn {
        parse_rational(s, &vars(), &BTreeMap::new()).unwrap()
    }

    #[test]
    fn precedence_and_signs() {
        assert_eq!(p("-z1^2"), p("-(z1*z1)"));
        assert_eq!(p("1/2*z1"), p("z1/2"));
        assert_eq!(p("z1^-1"), p("1/z1"));
        assert_eq!(p(" ( z1 + i*z2 ) ^ 2 "), p("z1^2 + 2*i*z1*z2 - z2^2"));
    }

    #[test]
    fn positioned_errors() {
        let e = parse_rational("z1 + w", &vars(), &BTreeMap::new()).unwrap_err();
        assert_eq!(e.column, 6);
        assert!(e.message.contains("undeclared"));
        let e = parse_rational("(z1", &vars(), &BTreeMap::new()).unwrap_err();
        assert_eq!(e.column, 4);
        assert!(parse_rational("z1/(z2-z2)", &vars(), &BTreeMap::new()).is_err());
    }

    #[test]
    fn params_substitute() {
        let mut params = BTreeMap::new();
        params.insert("lambda".to_string(), GaussianRational::from_ratio(1, 2));
        let f = parse_rational("lambda/z1", &vars(), &params).unwrap();
        assert_eq!(f, p("1/(2*z1)"));
    }
}
