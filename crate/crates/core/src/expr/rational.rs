//! Rational-function view of single-valued expressions, used for degrees.

use num_complex::Complex64;

use super::{is_integer, Expr, Node};

/// Dense polynomial, lowest degree first, trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Complex64>);

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl Poly {
    pub fn constant(c: Complex64) -> Poly {
        Poly(vec![c]).trimmed(0.0)
    }

    pub fn z() -> Poly {
        Poly(vec![ZERO, Complex64::new(1.0, 0.0)])
    }

    fn trimmed(mut self, tol: f64) -> Poly {
        while self.0.last().is_some_and(|c| c.norm() <= tol) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i32 {
        self.0.len() as i32 - 1
    }

    fn scale_of(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n)
            .map(|k| self.0.get(k).copied().unwrap_or(ZERO) + o.0.get(k).copied().unwrap_or(ZERO))
            .collect())
        .trimmed(0.0)
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly(vec![]);
        }
        let mut out = vec![ZERO; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out).trimmed(0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    /// Remainder of division, with coefficients below `tol` (relative) dropped.
    fn rem(&self, d: &Poly, tol: f64) -> Poly {
        let mut r = self.0.clone();
        let lead = *d.0.last().expect("nonzero divisor");
        let dd = d.degree() as usize;
        let scale = self.scale_of().max(1e-300);
        while r.len() > dd && !r.is_empty() {
            let k = r.len() - 1 - dd;
            let q = r[r.len() - 1] / lead;
            for (j, c) in d.0.iter().enumerate() {
                r[k + j] -= q * c;
            }
            r.pop();
            while r.last().is_some_and(|c| c.norm() <= tol * scale) {
                r.pop();
            }
        }
        Poly(r).trimmed(tol * scale)
    }

    /// Monic-free gcd by the Euclidean algorithm with a relative tolerance.
    pub fn gcd(&self, o: &Poly, tol: f64) -> Poly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b, tol);
            a = b;
            b = r;
        }
        a
    }

    /// Exact-quotient division (remainder discarded).
    pub fn div_exact(&self, d: &Poly) -> Poly {
        if d.degree() == 0 {
            let c = d.0[0];
            return Poly(self.0.iter().map(|x| x / c).collect());
        }
        let mut r = self.0.clone();
        let lead = *d.0.last().unwrap();
        let dd = d.degree() as usize;
        let mut q = vec![ZERO; r.len().saturating_sub(dd)];
        while r.len() > dd {
            let k = r.len() - 1 - dd;
            let c = r[r.len() - 1] / lead;
            q[k] = c;
            for (j, x) in d.0.iter().enumerate() {
                r[k + j] -= c * x;
            }
            r.pop();
        }
        Poly(q).trimmed(0.0)
    }
}

/// `num / den`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

impl Rational {
    /// Converts a tree built from constants, `z`, arithmetic and integer
    /// powers. Returns `None` for anything multivalued or transcendental.
    pub fn from_expr(e: &Expr) -> Option<Rational> {
        let one = Poly::constant(Complex64::new(1.0, 0.0));
        Some(match e.node() {
            Node::Const(c) => Rational {
                num: Poly::constant(*c),
                den: one,
            },
            Node::Var => Rational { num: Poly::z(), den: one },
            Node::Add(a, b) | Node::Sub(a, b) => {
                let (x, y) = (Self::from_expr(a)?, Self::from_expr(b)?);
                let yn = if matches!(e.node(), Node::Sub(..)) { y.num.neg() } else { y.num };
                Rational {
                    num: x.num.mul(&y.den).add(&yn.mul(&x.den)),
                    den: x.den.mul(&y.den),
                }
            }
            Node::Mul(a, b) => {
                let (x, y) = (Self::from_expr(a)?, Self::from_expr(b)?);
                Rational {
                    num: x.num.mul(&y.num),
                    den: x.den.mul(&y.den),
                }
            }
            Node::Div(a, b) => {
                let (x, y) = (Self::from_expr(a)?, Self::from_expr(b)?);
                if y.num.is_zero() {
                    return None;
                }
                Rational {
                    num: x.num.mul(&y.den),
                    den: x.den.mul(&y.num),
                }
            }
            Node::Neg(a) => {
                let x = Self::from_expr(a)?;
                Rational { num: x.num.neg(), den: x.den }
            }
            Node::Pow(a, k) => {
                let n = is_integer(*k)?;
                let x = Self::from_expr(a)?;
                let (b, t) = if n >= 0 { (x.num, x.den) } else { (x.den, x.num) };
                let mut num = one.clone();
                let mut den = one.clone();
                for _ in 0..n.unsigned_abs() {
                    num = num.mul(&b);
                    den = den.mul(&t);
                }
                Rational { num, den }
            }
            Node::Log(_) | Node::Exp(_) | Node::Sqrt(_) => return None,
        })
    }

    /// Cancels common factors.
    pub fn reduced(&self) -> Rational {
        let g = self.num.gcd(&self.den, 1e-10);
        if g.degree() <= 0 {
            return self.clone();
        }
        Rational {
            num: self.num.div_exact(&g),
            den: self.den.div_exact(&g),
        }
    }

    /// Degree as a map of the Riemann sphere.
    pub fn degree(&self) -> i32 {
        let r = self.reduced();
        r.num.degree().max(r.den.degree()).max(0)
    }
}

impl Poly {
    /// Horner-form expression.
    pub fn to_expr(&self) -> Expr {
        let z = Expr::z();
        self.0
            .iter()
            .rev()
            .fold(Expr::real(0.0), |acc, c| acc * z.clone() + Expr::constant(*c))
    }

    /// `q` with `q^2 = self` when the polynomial is a perfect square, up to
    /// the relative tolerance `tol`.
    pub fn sqrt_exact(&self, tol: f64) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly(vec![]));
        }
        let n = self.degree();
        if n % 2 != 0 {
            return None;
        }
        let k = (n / 2) as usize;
        let p = &self.0;
        let mut q = vec![ZERO; k + 1];
        q[k] = p[2 * k].sqrt();
        for j in (0..k).rev() {
            // coefficient of z^(k+j) in q^2
            let mut acc = ZERO;
            for i in (j + 1)..=k {
                let l = k + j - i;
                if l > j && l <= k {
                    acc += q[i] * q[l];
                }
            }
            q[j] = (p[k + j] - acc) / (2.0 * q[k]);
        }
        let q = Poly(q);
        let r = q.mul(&q).add(&self.neg());
        (r.scale_of() <= tol * self.scale_of()).then_some(q)
    }

    /// All complex roots (Aberth iteration).
    pub fn roots(&self) -> Vec<Complex64> {
        let n = self.degree();
        if n < 1 {
            return vec![];
        }
        let n = n as usize;
        let lead = self.0[n];
        let monic: Vec<Complex64> = self.0.iter().map(|c| c / lead).collect();
        let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(0.5 * bound, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        let p = Poly(monic);
        let dp = Poly((1..=n).map(|k| p.0[k] * k as f64).collect());
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for i in 0..n {
                let ratio = p.eval(z[i]) / dp.eval(z[i]);
                let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
                let w = ratio / (1.0 - ratio * s);
                if w.is_finite() {
                    z[i] -= w;
                    moved = moved.max(w.norm());
                }
            }
            if moved < 1e-15 * bound {
                break;
            }
        }
        z
    }
}

impl Rational {
    pub fn to_expr(&self) -> Expr {
        self.num.to_expr() / self.den.to_expr()
    }

    /// A rational square root when `num * den` is a perfect square.
    pub fn sqrt_exact(&self, tol: f64) -> Option<Rational> {
        let s = self.num.mul(&self.den).sqrt_exact(tol)?;
        Some(Rational {
            num: s,
            den: self.den.clone(),
        })
    }
}

/// `sqrt(e)`, written without a branch node when `e` is the square of a
/// rational function.
pub fn sqrt_simplified(e: &Expr) -> Expr {
    if let Some(r) = Rational::from_expr(e) {
        if let Some(s) = r.sqrt_exact(1e-12) {
            return s.to_expr();
        }
    }
    e.sqrt()
}
