//! Recursive-descent parser.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?          right associative, binds tighter than unary minus
//! atom  := number ['i'] | 'i' | 'z' | ('log' | 'exp' | 'sqrt') '(' expr ')' | '(' expr ')'
//! ```

use num_complex::Complex64;
use thiserror::Error;

use super::Expr;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("syntax error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src,
            toks: Vec::new(),
        };
        let b = src.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let ch = b[i];
            if ch.is_ascii_whitespace() {
                i += 1;
            } else if ch.is_ascii_digit() || ch == b'.' {
                i = lx.number(i)?;
            } else if ch.is_ascii_alphabetic() || ch == b'_' {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                lx.toks.push((Tok::Ident(src[start..i].to_string()), start));
            } else if b"+-*/^()".contains(&ch) {
                lx.toks.push((Tok::Sym(ch as char), i));
                i += 1;
            } else {
                let c = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    pos: i,
                    msg: format!("unexpected character '{c}'"),
                });
            }
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }

    fn number(&mut self, start: usize) -> Result<usize, ParseError> {
        let b = self.src.as_bytes();
        let mut i = start;
        while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
            i += 1;
        }
        // exponent part, only if followed by a digit (so "2e" is not swallowed)
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = &self.src[start..i];
        let v: f64 = text.parse().map_err(|_| ParseError {
            pos: start,
            msg: format!("malformed number '{text}'"),
        })?;
        let imag = i < b.len() && b[i] == b'i' && !(i + 1 < b.len() && b[i + 1].is_ascii_alphanumeric());
        if imag {
            i += 1;
        }
        self.toks.push((Tok::Num(v, imag), start));
        Ok(i)
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = lhs + self.term()?;
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = lhs * self.unary()?;
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let e = self.unary()?;
        match e.as_const() {
            Some(c) => Ok(base.powc(c)),
            None => Err(ParseError {
                pos,
                msg: "exponent must be a constant".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v, false) => Ok(Expr::real(v)),
            Tok::Num(v, true) => Ok(Expr::constant(Complex64::new(0.0, v))),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "z" => Ok(Expr::z()),
                "i" => Ok(Expr::constant(Complex64::new(0.0, 1.0))),
                "log" | "exp" | "sqrt" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    Ok(match name.as_str() {
                        "log" => a.ln(),
                        "exp" => a.exp(),
                        _ => a.sqrt(),
                    })
                }
                _ => Err(ParseError {
                    pos,
                    msg: format!("unknown identifier '{name}'"),
                }),
            },
            Tok::End => Err(ParseError {
                pos,
                msg: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(ParseError {
                pos,
                msg: format!("unexpected '{c}'"),
            }),
        }
    }
}

/// Parses an expression in the variable `z`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::run(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::super::{Node, Value};
    use super::*;

    #[test]
    fn power_node() {
        let e = parse("z^3").unwrap();
        match e.node() {
            Node::Pow(b, k) => {
                assert_eq!(*b, Expr::z());
                assert_eq!(*k, Complex64::new(3.0, 0.0));
            }
            _ => panic!("expected a power node"),
        }
    }

    #[test]
    fn precedence() {
        // -z^2 is -(z^2); ^ is right associative
        let z = Complex64::new(0.7, 0.2);
        let e = parse("-z^2").unwrap();
        assert!((e.eval_c(z).unwrap() + z * z).norm() < 1e-15);
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.as_const(), Some(Complex64::new(512.0, 0.0)));
        let e = parse("z^-1").unwrap();
        assert!((e.eval_c(z).unwrap() - z.inv()).norm() < 1e-15);
        let e = parse("1 - 2*z/3").unwrap();
        assert!((e.eval_c(z).unwrap() - (1.0 - 2.0 * z / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn imaginary_literals() {
        assert_eq!(parse("10i").unwrap().as_const(), Some(Complex64::new(0.0, 10.0)));
        assert_eq!(parse("i").unwrap().as_const(), Some(Complex64::new(0.0, 1.0)));
        assert_eq!(parse("1.5e-3i").unwrap().as_const(), Some(Complex64::new(0.0, 1.5e-3)));
    }

    #[test]
    fn quotient_with_log_pole() {
        let e = parse("(log(z)+1)/(log(z)-1)").unwrap();
        assert!(matches!(e.node(), Node::Div(..)));
        let at = Complex64::new(std::f64::consts::E, 0.0);
        assert!(matches!(e.eval_principal(at), Ok(Value::Infinity)));
    }

    #[test]
    fn four_noid_gauss_map() {
        let e = parse("3*(z^3+2)/(4-z)").unwrap();
        let z = Complex64::new(0.3, -1.1);
        let want = 3.0 * (z * z * z + 2.0) / (4.0 - z);
        assert!((e.eval_c(z).unwrap() - want).norm() < 1e-13);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("z^z").unwrap_err();
        assert_eq!(e.pos, 2);
        let e = parse("z + * 2").unwrap_err();
        assert_eq!(e.pos, 4);
        let e = parse("foo(z)").unwrap_err();
        assert_eq!(e.pos, 0);
        assert!(parse("(z").is_err());
        assert!(parse("z)").is_err());
        assert!(parse("z $ 1").is_err());
    }

    #[test]
    fn printed_form_reparses() {
        for s in [
            "z^3",
            "(log(z)+1)/(log(z)-1)",
            "3*(z^3+2)/(4-z)",
            "-(z^3-12*z^2+2)/(3*z)",
            "(z^(10i)-i)/(z^(10i)+i)",
            "z^(1+10i)",
            "sqrt(z)*exp(-z/2)+(0.1-2.5i)*z^-2",
            "(2*z-1)/(2*z*(z-1))-log(z/(z-1))",
            "z^0.3^2",
            "1e-7*z+1e300",
        ] {
            let e = parse(s).unwrap();
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            assert_eq!(back, e, "{s} -> {printed}");
            assert_eq!(back.to_string(), printed);
        }
    }
}
