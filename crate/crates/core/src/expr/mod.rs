//! Immutable expression trees for meromorphic and multivalued functions of `z`.
//!
//! Trees are hash-consed only loosely: every node caches a structural hash so
//! that equality checks and common-subexpression detection stay cheap.
//! Multivalued nodes (`log`, non-integer powers, `sqrt`) are evaluated from an
//! unwound logarithm of their argument; see [`eval`].

mod bigcomplex;
mod diff;
pub mod eval;
mod order;
mod parse;
mod rational;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64;

pub use bigcomplex::{BigComplex, HP_PRECISION};
pub use diff::{affine_part, hopf_from_gauss_pair, schwarzian, CalculusError, TwoDifferential};
pub use eval::{BranchPoint, EvalError, Scalar, Tape, Value};
pub use order::{pole_order_at, pole_order_of_two_differential, OrderError, OrderEstimate, ORDER_RADII};
pub use parse::{parse, ParseError};
pub use rational::{sqrt_simplified, Poly, Rational};

/// A point where local analysis happens: a finite puncture or `z = inf`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Puncture {
    Finite(Complex64),
    Infinity,
}

impl Puncture {
    /// Local coordinate `w` centred at the puncture: `z = p + w` or `z = 1/w`.
    pub fn chart(&self) -> Expr {
        match self {
            Puncture::Finite(p) => Expr::constant(*p) + Expr::z(),
            Puncture::Infinity => Expr::constant(Complex64::new(1.0, 0.0)) / Expr::z(),
        }
    }

    /// Maps a local coordinate value back to `z`.
    pub fn from_local(&self, w: Complex64) -> Complex64 {
        match self {
            Puncture::Finite(p) => p + w,
            Puncture::Infinity => w.inv(),
        }
    }

    /// Local coordinate of a point `z`.
    pub fn to_local(&self, z: Complex64) -> Complex64 {
        match self {
            Puncture::Finite(p) => z - p,
            Puncture::Infinity => z.inv(),
        }
    }

    /// Rewrites a function in the local coordinate.
    pub fn localize(&self, e: &Expr) -> Expr {
        match self {
            Puncture::Finite(p) if *p == Complex64::new(0.0, 0.0) => e.clone(),
            _ => e.compose(&self.chart()),
        }
    }

    /// Rewrites the coefficient of a 1-form `e dz` in the local coordinate.
    pub fn localize_one_form(&self, e: &Expr) -> Expr {
        match self {
            Puncture::Finite(_) => self.localize(e),
            Puncture::Infinity => {
                let w = Expr::z();
                -(self.localize(e) / w.powc(Complex64::new(2.0, 0.0)))
            }
        }
    }
}

impl fmt::Display for Puncture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Puncture::Finite(p) => write!(f, "{p}"),
            Puncture::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(Complex64),
    Var,
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    /// Power with a constant exponent. Integer exponents are single valued.
    Pow(Expr, Complex64),
    Log(Expr),
    Exp(Expr),
    Sqrt(Expr),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
}

/// A shared, immutable expression.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

fn canon(c: Complex64) -> Complex64 {
    // -0.0 + 0.0 == +0.0, so equal constants hash identically
    Complex64::new(c.re + 0.0, c.im + 0.0)
}

fn hash_c(h: &mut DefaultHasher, c: Complex64) {
    c.re.to_bits().hash(h);
    c.im.to_bits().hash(h);
}

pub(crate) fn is_integer(c: Complex64) -> Option<i32> {
    if c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() <= i32::MAX as f64 {
        Some(c.re as i32)
    } else {
        None
    }
}

impl Expr {
    fn mk(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        std::mem::discriminant(&node).hash(&mut h);
        match &node {
            Node::Const(c) => hash_c(&mut h, *c),
            Node::Var => {}
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
            }
            Node::Neg(a) | Node::Log(a) | Node::Exp(a) | Node::Sqrt(a) => a.0.hash.hash(&mut h),
            Node::Pow(a, e) => {
                a.0.hash.hash(&mut h);
                hash_c(&mut h, *e);
            }
        }
        Expr(Arc::new(Inner {
            node,
            hash: h.finish(),
        }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn z() -> Expr {
        Expr::mk(Node::Var)
    }

    pub fn constant(c: Complex64) -> Expr {
        Expr::mk(Node::Const(canon(c)))
    }

    pub fn real(x: f64) -> Expr {
        Expr::constant(Complex64::new(x, 0.0))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(Complex64::new(1.0, 0.0))
    }

    /// True when the tree does not mention `z`.
    pub fn is_constant(&self) -> bool {
        match self.node() {
            Node::Const(_) => true,
            Node::Var => false,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
            Node::Neg(a) | Node::Log(a) | Node::Exp(a) | Node::Sqrt(a) | Node::Pow(a, _) => {
                a.is_constant()
            }
        }
    }

    /// Power with a constant exponent, folding trivial cases.
    pub fn powc(&self, e: Complex64) -> Expr {
        let e = canon(e);
        if e == Complex64::new(0.0, 0.0) {
            return Expr::real(1.0);
        }
        if e == Complex64::new(1.0, 0.0) {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            let v = match is_integer(e) {
                Some(n) => c.powi(n),
                None => c.powc(e),
            };
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::mk(Node::Pow(self.clone(), e))
    }

    pub fn powi(&self, n: i32) -> Expr {
        self.powc(Complex64::new(n as f64, 0.0))
    }

    pub fn ln(&self) -> Expr {
        if let Some(c) = self.as_const() {
            let v = c.ln();
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::mk(Node::Log(self.clone()))
    }

    pub fn exp(&self) -> Expr {
        if let Some(c) = self.as_const() {
            let v = c.exp();
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::mk(Node::Exp(self.clone()))
    }

    pub fn sqrt(&self) -> Expr {
        if let Some(c) = self.as_const() {
            return Expr::constant(c.sqrt());
        }
        Expr::mk(Node::Sqrt(self.clone()))
    }

    /// Substitutes `inner` for `z`.
    pub fn compose(&self, inner: &Expr) -> Expr {
        let mut memo = HashMap::new();
        self.compose_memo(inner, &mut memo)
    }

    fn compose_memo(&self, inner: &Expr, memo: &mut HashMap<Expr, Expr>) -> Expr {
        if let Some(r) = memo.get(self) {
            return r.clone();
        }
        let r = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var => inner.clone(),
            Node::Add(a, b) => a.compose_memo(inner, memo) + b.compose_memo(inner, memo),
            Node::Sub(a, b) => a.compose_memo(inner, memo) - b.compose_memo(inner, memo),
            Node::Mul(a, b) => a.compose_memo(inner, memo) * b.compose_memo(inner, memo),
            Node::Div(a, b) => a.compose_memo(inner, memo) / b.compose_memo(inner, memo),
            Node::Neg(a) => -a.compose_memo(inner, memo),
            Node::Pow(a, e) => a.compose_memo(inner, memo).powc(*e),
            Node::Log(a) => a.compose_memo(inner, memo).ln(),
            Node::Exp(a) => a.compose_memo(inner, memo).exp(),
            Node::Sqrt(a) => a.compose_memo(inner, memo).sqrt(),
        };
        memo.insert(self.clone(), r.clone());
        r
    }

    /// Number of distinct nodes.
    pub fn size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        fn walk(e: &Expr, seen: &mut std::collections::HashSet<Expr>) {
            if !seen.insert(e.clone()) {
                return;
            }
            match e.node() {
                Node::Const(_) | Node::Var => {}
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                Node::Neg(a) | Node::Log(a) | Node::Exp(a) | Node::Sqrt(a) | Node::Pow(a, _) => {
                    walk(a, seen)
                }
            }
        }
        walk(self, &mut seen);
        seen.len()
    }

    /// True if the tree contains a log, sqrt or non-integer power.
    pub fn is_multivalued(&self) -> bool {
        match self.node() {
            Node::Const(_) | Node::Var => false,
            Node::Log(_) | Node::Sqrt(_) => true,
            Node::Pow(a, e) => is_integer(*e).is_none() || a.is_multivalued(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_multivalued() || b.is_multivalued()
            }
            Node::Neg(a) | Node::Exp(a) => a.is_multivalued(),
        }
    }

    /// Principal-branch evaluation at a single point. Convenience for tests
    /// and one-off values; bulk work should compile a [`Tape`].
    pub fn eval_principal(&self, z: Complex64) -> Result<Value<Complex64>, EvalError> {
        let t = Tape::new(std::slice::from_ref(self));
        let (v, _) = t.eval_fresh(z)?;
        Ok(v.into_iter().next().expect("one output"))
    }

    /// Principal value as a plain complex number; `None` at poles or errors.
    pub fn eval_c(&self, z: Complex64) -> Option<Complex64> {
        match self.eval_principal(z) {
            Ok(Value::Finite(c)) => Some(c),
            _ => None,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, top: bool) -> fmt::Result {
        let (open, close) = if top { ("", "") } else { ("(", ")") };
        match self.node() {
            Node::Const(c) => write_const(f, *c),
            Node::Var => write!(f, "z"),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                let op = match self.node() {
                    Node::Add(..) => "+",
                    Node::Sub(..) => "-",
                    Node::Mul(..) => "*",
                    _ => "/",
                };
                write!(f, "{open}")?;
                a.write(f, false)?;
                write!(f, "{op}")?;
                b.write(f, false)?;
                write!(f, "{close}")
            }
            Node::Neg(a) => {
                write!(f, "{open}-")?;
                a.write(f, false)?;
                write!(f, "{close}")
            }
            Node::Pow(a, e) => {
                write!(f, "{open}")?;
                match a.node() {
                    Node::Pow(..) => {
                        write!(f, "(")?;
                        a.write(f, true)?;
                        write!(f, ")")?;
                    }
                    _ => a.write(f, false)?,
                }
                write!(f, "^")?;
                write_const(f, *e)?;
                write!(f, "{close}")
            }
            Node::Log(a) | Node::Exp(a) | Node::Sqrt(a) => {
                let name = match self.node() {
                    Node::Log(_) => "log",
                    Node::Exp(_) => "exp",
                    _ => "sqrt",
                };
                write!(f, "{name}(")?;
                a.write(f, true)?;
                write!(f, ")")
            }
        }
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: Complex64) -> fmt::Result {
    if c.im == 0.0 {
        if c.re < 0.0 {
            write!(f, "({})", c.re)
        } else {
            write!(f, "{}", c.re)
        }
    } else if c.re == 0.0 {
        write!(f, "({}i)", c.im)
    } else if c.im < 0.0 {
        write!(f, "({}-{}i)", c.re, -c.im)
    } else {
        write!(f, "({}+{}i)", c.re, c.im)
    }
}

impl PartialEq for Expr {
    fn eq(&self, o: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &o.0) || (self.0.hash == o.0.hash && self.0.node == o.0.node)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, true)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Expr, ParseError> {
        parse(s)
    }
}

// Arithmetic builds nodes with constant folding and the usual 0/1 identities.

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (self.as_const(), b.as_const()) {
            return Expr::constant(x + y);
        }
        if self.is_zero() {
            return b;
        }
        if b.is_zero() {
            return self;
        }
        Expr::mk(Node::Add(self, b))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (self.as_const(), b.as_const()) {
            return Expr::constant(x - y);
        }
        if b.is_zero() {
            return self;
        }
        if self.is_zero() {
            return -b;
        }
        Expr::mk(Node::Sub(self, b))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (self.as_const(), b.as_const()) {
            return Expr::constant(x * y);
        }
        if self.is_zero() || b.is_zero() {
            return Expr::real(0.0);
        }
        if self.is_one() {
            return b;
        }
        if b.is_one() {
            return self;
        }
        Expr::mk(Node::Mul(self, b))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (self.as_const(), b.as_const()) {
            let q = x / y;
            if q.is_finite() {
                return Expr::constant(q);
            }
        }
        if b.is_one() {
            return self;
        }
        if self.is_zero() && !b.is_zero() {
            return Expr::real(0.0);
        }
        Expr::mk(Node::Div(self, b))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Expr::mk(Node::Neg(self)),
        }
    }
}

macro_rules! ref_ops {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, b: &Expr) -> Expr {
                std::ops::$tr::$m(self.clone(), b.clone())
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, b: f64) -> Expr {
                std::ops::$tr::$m(self, Expr::real(b))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, b: Expr) -> Expr {
                std::ops::$tr::$m(Expr::real(self), b)
            }
        }
    };
}
ref_ops!(Add, add);
ref_ops!(Sub, sub);
ref_ops!(Mul, mul);
ref_ops!(Div, div);

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn folding_and_identities() {
        let z = Expr::z();
        assert_eq!((&z * &Expr::real(1.0)), z);
        assert!((&z * &Expr::real(0.0)).is_zero());
        assert_eq!(Expr::real(2.0) * Expr::real(3.0), Expr::real(6.0));
        assert_eq!(-(-z.clone()), z);
        assert_eq!(z.powi(1), z);
        assert!(z.powi(0).is_one());
    }

    #[test]
    fn negative_zero_is_canonical() {
        assert_eq!(Expr::constant(c(-0.0, 0.0)), Expr::real(0.0));
        let mut h1 = DefaultHasher::new();
        let mut h2 = DefaultHasher::new();
        Expr::constant(c(-0.0, -0.0)).hash(&mut h1);
        Expr::real(0.0).hash(&mut h2);
        assert_eq!(h1.finish(), h2.finish());
    }

    #[test]
    fn compose_substitutes() {
        let e: Expr = "z^2+1".parse().unwrap();
        let inv = Expr::real(1.0) / Expr::z();
        let w = c(0.3, 0.4);
        let v = e.compose(&inv).eval_c(w).unwrap();
        assert!((v - (w.inv() * w.inv() + 1.0)).norm() < 1e-14);
    }

    #[test]
    fn multivalued_detection() {
        assert!(!parse("z^3/(4-z)").unwrap().is_multivalued());
        assert!(parse("z^0.3").unwrap().is_multivalued());
        assert!(parse("exp(log(z))").unwrap().is_multivalued());
        assert!(!parse("exp(z)").unwrap().is_multivalued());
    }

    #[test]
    fn one_form_at_infinity() {
        // dz = -dw/w^2
        let om = Puncture::Infinity.localize_one_form(&Expr::real(1.0));
        let w = c(0.2, -0.1);
        assert!((om.eval_c(w).unwrap() + 1.0 / (w * w)).norm() < 1e-12);
    }
}
