//! Text syntax for lattice expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'd' index | func '(' args ')' | '(' expr ')'
//! func    := abs | pos | max | min | psum
//! ```
//!
//! `psum(q, e1, e2, ...)` is (Σ |e_i|^q)^{1/q}; q may be `inf`. Scalars may
//! only multiply expressions: constant terms are rejected since every element
//! must be positively homogeneous.

use crate::error::{Error, Result};
use crate::expr::LatticeExpr;
use crate::space::Exponent;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_ascii_lowercase())));
        } else if "+-*/(),;".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

enum Val {
    Num(f64),
    Expr(LatticeExpr),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn peek_sym(&self, c: char) -> bool {
        matches!(self.toks.get(self.at), Some((_, Tok::Sym(s))) if *s == c)
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym(c) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Val> {
        let mut acc = self.term()?;
        loop {
            let neg = if self.peek_sym('+') {
                false
            } else if self.peek_sym('-') {
                true
            } else {
                return Ok(acc);
            };
            let pos = self.pos();
            self.at += 1;
            let rhs = self.term()?;
            acc = match (acc, rhs) {
                (Val::Num(a), Val::Num(b)) => Val::Num(if neg { a - b } else { a + b }),
                (Val::Expr(a), Val::Expr(b)) => Val::Expr(if neg { a - b } else { a + b }),
                _ => {
                    return Err(Error::Parse {
                        pos,
                        msg: "constant term added to an expression (not positively homogeneous)".into(),
                    })
                }
            };
        }
    }

    fn term(&mut self) -> Result<Val> {
        let mut acc = self.unary()?;
        loop {
            let div = if self.peek_sym('*') {
                false
            } else if self.peek_sym('/') {
                true
            } else {
                return Ok(acc);
            };
            let pos = self.pos();
            self.at += 1;
            let rhs = self.unary()?;
            let fail = |msg: &str| Err(Error::Parse { pos, msg: msg.into() });
            acc = match (acc, rhs, div) {
                (Val::Num(a), Val::Num(b), false) => Val::Num(a * b),
                (Val::Num(_), Val::Num(0.0), true) => return fail("division by zero"),
                (Val::Num(a), Val::Num(b), true) => Val::Num(a / b),
                (Val::Num(c), Val::Expr(e), false) | (Val::Expr(e), Val::Num(c), false) => Val::Expr(e.scale(c)),
                (Val::Expr(_), Val::Num(0.0), true) => return fail("division by zero"),
                (Val::Expr(e), Val::Num(b), true) => Val::Expr(e.scale(1.0 / b)),
                (_, Val::Expr(_), true) => return fail("division by an expression"),
                (Val::Expr(_), Val::Expr(_), false) => return fail("product of two expressions"),
            };
        }
    }

    fn unary(&mut self) -> Result<Val> {
        if self.peek_sym('-') {
            self.at += 1;
            return Ok(match self.unary()? {
                Val::Num(v) => Val::Num(-v),
                Val::Expr(e) => Val::Expr(-e),
            });
        }
        if self.peek_sym('+') {
            self.at += 1;
            return self.unary();
        }
        self.primary()
    }

    fn expr_arg(&mut self) -> Result<LatticeExpr> {
        let pos = self.pos();
        match self.expr()? {
            Val::Expr(e) => Ok(e),
            Val::Num(_) => Err(Error::Parse {
                pos,
                msg: "expected an expression, found a constant".into(),
            }),
        }
    }

    fn args(&mut self) -> Result<Vec<LatticeExpr>> {
        let mut out = vec![self.expr_arg()?];
        while self.peek_sym(',') {
            self.at += 1;
            out.push(self.expr_arg()?);
        }
        Ok(out)
    }

    fn primary(&mut self) -> Result<Val> {
        let Some((pos, tok)) = self.toks.get(self.at).cloned() else {
            return self.err("unexpected end of input");
        };
        self.at += 1;
        match tok {
            Tok::Num(v) => Ok(Val::Num(v)),
            Tok::Sym('(') => {
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            Tok::Ident(name) => {
                if let Some(idx) = name.strip_prefix('d') {
                    if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) {
                        let i = idx.parse().map_err(|_| Error::Parse {
                            pos,
                            msg: format!("generator index too large in '{name}'"),
                        })?;
                        return Ok(Val::Expr(LatticeExpr::Gen(i)));
                    }
                }
                self.expect('(')?;
                let out = match name.as_str() {
                    "abs" | "pos" => {
                        let a = self.args()?;
                        if a.len() != 1 {
                            return Err(Error::Parse {
                                pos,
                                msg: format!("{name} takes one argument"),
                            });
                        }
                        let e = a.into_iter().next().expect("one argument");
                        if name == "abs" {
                            e.abs()
                        } else {
                            e.pos()
                        }
                    }
                    "max" | "min" => {
                        let a = self.args()?;
                        if a.len() < 2 {
                            return Err(Error::Parse {
                                pos,
                                msg: format!("{name} takes at least two arguments"),
                            });
                        }
                        let folded = if name == "max" {
                            a.into_iter().reduce(|x, y| x.join(y))
                        } else {
                            a.into_iter().reduce(|x, y| x.meet(y))
                        };
                        folded.expect("non-empty")
                    }
                    "psum" => {
                        let q = match self.toks.get(self.at).cloned() {
                            Some((_, Tok::Num(v))) => Exponent::new(v),
                            Some((_, Tok::Ident(s))) if s == "inf" => Ok(Exponent::Inf),
                            _ => return self.err("psum expects an exponent first"),
                        }
                        .map_err(|e| Error::Parse { pos, msg: e.to_string() })?;
                        self.at += 1;
                        if self.peek_sym(',') || self.peek_sym(';') {
                            self.at += 1;
                        } else {
                            return self.err("expected ',' after the psum exponent");
                        }
                        LatticeExpr::power_sum(q, self.args()?)
                    }
                    _ => {
                        return Err(Error::Parse {
                            pos,
                            msg: format!("unknown function '{name}'"),
                        })
                    }
                };
                self.expect(')')?;
                Ok(Val::Expr(out))
            }
            Tok::Sym(c) => Err(Error::Parse {
                pos,
                msg: format!("unexpected '{c}'"),
            }),
        }
    }
}

/// Parses the text syntax into a [`LatticeExpr`].
pub fn parse(src: &str) -> Result<LatticeExpr> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: src.len(),
    };
    let v = p.expr()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    match v {
        Val::Expr(e) => Ok(e),
        Val::Num(_) => Err(Error::Parse {
            pos: 0,
            msg: "a constant is not a lattice expression".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LatticeExpr::*;

    #[test]
    fn parses_basic_forms() {
        let e = parse("abs(d0)+abs(d1)").unwrap();
        assert_eq!(e.eval_values(&[-1.0, 2.0]), 3.0);
        let e = parse(" max( d0 , -d1 ) - 2*min(d0,d1) ").unwrap();
        assert_eq!(e.eval_values(&[1.0, -3.0]), 3.0 + 6.0);
        let e = parse("pos(d2) / 4 + 0.5e1 * abs(d0 - d1)").unwrap();
        assert_eq!(e.eval_values(&[1.0, 3.0, 8.0]), 2.0 + 10.0);
        let e = parse("psum(2, d0, d1)").unwrap();
        assert_eq!(e.eval_values(&[3.0, 4.0]), 5.0);
        let e = parse("psum(inf; d0, d1)").unwrap();
        assert_eq!(e.eval_values(&[3.0, -4.0]), 4.0);
        assert_eq!(parse("d12").unwrap(), Gen(12));
        assert_eq!(parse("max(d0,d1,d2)").unwrap().eval_values(&[1.0, 5.0, 2.0]), 5.0);
    }

    #[test]
    fn rejects_non_homogeneous_and_malformed_input() {
        for bad in ["d0 + 1", "3", "d0*d1", "abs()", "abs(d0", "foo(d0)", "d0 $ d1", "d0/d1", "d0/0", "psum(0.5, d0)", "max(d0)", "d0 d1"] {
            assert!(parse(bad).is_err(), "{bad} should fail");
        }
        match parse("d0 + 1") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        for src in ["abs(d0) - abs(d1)", "max(pos(d0), -2.5*d1) + psum(4, d0, d1, d2)", "min(d0, d1)"] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            for g in [[0.3, -0.7, 1.1], [-2.0, 0.5, 0.0]] {
                assert_eq!(e.eval_values(&g), again.eval_values(&g));
            }
        }
    }
}
