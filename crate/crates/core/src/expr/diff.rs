//! Symbolic derivatives, Schwarzian derivatives and 2-differentials.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use super::{Expr, Node, Puncture};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("degenerate input: {0} is constant")]
    Degenerate(&'static str),
}

/// Writes `e = a h + b` for a constant pair `(a, b)`.
pub fn affine_part(e: &Expr) -> (Expr, Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    match e.node() {
        Node::Add(x, y) | Node::Sub(x, y) => {
            let sub = matches!(e.node(), Node::Sub(..));
            if let Some(c) = y.as_const() {
                let (h, a, b) = affine_part(x);
                (h, a, if sub { b - c } else { b + c })
            } else if let Some(c) = x.as_const() {
                let (h, a, b) = affine_part(y);
                if sub {
                    (h, -a, c - b)
                } else {
                    (h, a, c + b)
                }
            } else {
                (e.clone(), one, Complex64::new(0.0, 0.0))
            }
        }
        Node::Mul(x, y) if x.as_const().is_some() || y.as_const().is_some() => {
            let (c, rest) = match x.as_const() {
                Some(c) => (c, y),
                None => (y.as_const().unwrap(), x),
            };
            let (h, a, b) = affine_part(rest);
            (h, c * a, c * b)
        }
        Node::Neg(x) => {
            let (h, a, b) = affine_part(x);
            (h, -a, -b)
        }
        _ => (e.clone(), one, Complex64::new(0.0, 0.0)),
    }
}

impl Expr {
    /// Exact derivative with respect to `z`.
    pub fn diff(&self) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(&mut memo)
    }

    fn diff_memo(&self, memo: &mut HashMap<Expr, Expr>) -> Expr {
        if let Some(d) = memo.get(self) {
            return d.clone();
        }
        if self.is_constant() {
            return Expr::real(0.0);
        }
        let d = match self.node() {
            Node::Const(_) => Expr::real(0.0),
            Node::Var => Expr::real(1.0),
            Node::Add(a, b) => a.diff_memo(memo) + b.diff_memo(memo),
            Node::Sub(a, b) => a.diff_memo(memo) - b.diff_memo(memo),
            Node::Mul(a, b) => {
                let (da, db) = (a.diff_memo(memo), b.diff_memo(memo));
                da * b.clone() + a.clone() * db
            }
            Node::Div(a, b) => {
                let ((h1, p, q), (h2, r, s)) = (affine_part(a), affine_part(b));
                if h1 == h2 && !h1.is_constant() {
                    // Moebius in h: the quotient rule would cancel for large h
                    Expr::constant(p * s - q * r) * h1.diff_memo(memo) / b.powi(2)
                } else {
                    let (da, db) = (a.diff_memo(memo), b.diff_memo(memo));
                    if db.is_zero() {
                        da / b.clone()
                    } else {
                        (da * b.clone() - a.clone() * db) / b.powi(2)
                    }
                }
            }
            Node::Neg(a) => -a.diff_memo(memo),
            Node::Pow(a, k) => {
                let da = a.diff_memo(memo);
                Expr::constant(*k) * a.powc(*k - 1.0) * da
            }
            Node::Log(a) => a.diff_memo(memo) / a.clone(),
            Node::Exp(a) => self.clone() * a.diff_memo(memo),
            Node::Sqrt(a) => a.diff_memo(memo) / (Expr::real(2.0) * self.clone()),
        };
        memo.insert(self.clone(), d.clone());
        d
    }

    /// `n`-th derivative.
    pub fn diff_n(&self, n: usize) -> Expr {
        (0..n).fold(self.clone(), |e, _| e.diff())
    }
}

/// A holomorphic 2-differential `p(z) dz^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoDifferential {
    pub coeff: Expr,
}

impl TwoDifferential {
    pub fn new(coeff: Expr) -> Self {
        TwoDifferential { coeff }
    }

    pub fn zero() -> Self {
        TwoDifferential::new(Expr::real(0.0))
    }

    /// Pulls back by a coordinate change `z = phi(w)`: `p(phi(w)) phi'(w)^2 dw^2`.
    pub fn pullback(&self, phi: &Expr) -> TwoDifferential {
        TwoDifferential::new(self.coeff.compose(phi) * phi.diff().powi(2))
    }

    /// Coefficient in the local coordinate at a puncture.
    pub fn localize(&self, p: &Puncture) -> TwoDifferential {
        match p {
            Puncture::Finite(c) if *c == Complex64::new(0.0, 0.0) => self.clone(),
            _ => self.pullback(&p.chart()),
        }
    }

    pub fn eval_c(&self, z: Complex64) -> Option<Complex64> {
        self.coeff.eval_c(z)
    }
}

impl std::ops::Sub for &TwoDifferential {
    type Output = TwoDifferential;
    fn sub(self, o: &TwoDifferential) -> TwoDifferential {
        TwoDifferential::new(&self.coeff - &o.coeff)
    }
}

/// `S(h) = (h''/h')' - (h''/h')^2 / 2`, written as `h'''/h' - 3/2 (h''/h')^2`.
pub fn schwarzian(h: &Expr) -> Result<TwoDifferential, CalculusError> {
    let d1 = h.diff();
    if d1.is_zero() {
        return Err(CalculusError::Degenerate("h"));
    }
    let d2 = d1.diff();
    let d3 = d2.diff();
    let r = &d2 / &d1;
    Ok(TwoDifferential::new(&d3 / &d1 - Expr::real(1.5) * r.powi(2)))
}

/// Hopf differential `Q = (S(g) - S(G)) / 2`.
pub fn hopf_from_gauss_pair(big_g: &Expr, g: &Expr) -> Result<TwoDifferential, CalculusError> {
    if big_g.diff().is_zero() {
        return Err(CalculusError::Degenerate("G"));
    }
    if g.diff().is_zero() {
        return Err(CalculusError::Degenerate("g"));
    }
    let sg = schwarzian(g)?;
    let s_big = schwarzian(big_g)?;
    Ok(TwoDifferential::new(Expr::real(0.5) * (&sg.coeff - &s_big.coeff)))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use crate::mink::{mobius_apply, ExtComplex, Mat2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn moebius_quotient_keeps_precision() {
        // h = exp(40) + ...: the quotient rule would cancel to zero here
        let g = parse("(exp(z) - i)/(exp(z) + i)").unwrap();
        let z = c(40.0, 0.3);
        let d = crate::expr::Tape::new(&[g.diff()]).eval_fresh(z).unwrap().0[0].c().unwrap();
        let h = z.exp();
        let want = 2.0 * c(0.0, 1.0) * h / ((h + c(0.0, 1.0)) * (h + c(0.0, 1.0)));
        assert!((d - want).norm() / want.norm() < 1e-12);
        assert!(parse("1/0").unwrap().diff().is_zero());
    }

    fn rand_point(rng: &mut impl Rng) -> Complex64 {
        Complex64::from_polar(rng.gen_range(0.3..1.5), rng.gen_range(-3.0..3.0))
    }

    #[test]
    fn simple_derivatives() {
        let d = parse("log(z)").unwrap().diff();
        let z = c(0.4, 0.9);
        assert!((d.eval_c(z).unwrap() - z.inv()).norm() < 1e-15);
        let mu = 0.3;
        let d = parse("z^0.3").unwrap().diff();
        assert!((d.eval_c(z).unwrap() - mu * z.powc(c(mu - 1.0, 0.0))).norm() < 1e-14);
    }

    #[test]
    fn finite_difference_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let exprs = [
            "(log(z)+1)/(log(z)-1)",
            "3*(z^3+2)/(4-z)",
            "sqrt(z)*exp(z/3)",
            "(z^(10i)-i)/(z^(10i)+i)",
            "(2*z-1)/(2*z*(z-1))-log(z/(z-1))",
            "z^(1+10i)",
        ];
        for s in exprs {
            let e = parse(s).unwrap();
            let d = e.diff();
            let h = 1e-5;
            for _ in 0..100 {
                let z = rand_point(&mut rng);
                if z.re < 0.0 && z.im.abs() < 0.1 {
                    continue; // stay off the principal cut
                }
                let fd = (e.eval_c(z + h).unwrap() - e.eval_c(z - h).unwrap()) / (2.0 * h);
                let ex = d.eval_c(z).unwrap();
                assert!((fd - ex).norm() <= 1e-6 * ex.norm().max(1.0), "{s} at {z}: {fd} vs {ex}");
            }
        }
    }

    #[test]
    fn schwarzian_of_powers() {
        assert!(schwarzian(&Expr::z()).unwrap().coeff.is_zero());
        for m in [2.0, 3.0, 0.3, -1.5] {
            let s = schwarzian(&Expr::z().powc(c(m, 0.0))).unwrap();
            for z in [c(0.5, 0.2), c(-0.3, 1.1)] {
                let want = (1.0 - m * m) / (2.0 * z * z);
                assert!((s.eval_c(z).unwrap() - want).norm() < 1e-12 * want.norm());
            }
        }
        assert!(schwarzian(&Expr::real(2.0)).is_err());
    }

    #[test]
    fn schwarzian_is_moebius_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = parse("z^0.3*exp(z)").unwrap();
        let sh = schwarzian(&h).unwrap();
        for _ in 0..20 {
            let m: [Complex64; 4] = std::array::from_fn(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let a = Mat2::new(m[0], m[1], m[2], m[3]).normalized().unwrap();
            let ah = (Expr::constant(a.a11()) * h.clone() + Expr::constant(a.a12()))
                / (Expr::constant(a.a21()) * h.clone() + Expr::constant(a.a22()));
            let sah = schwarzian(&ah).unwrap();
            for _ in 0..5 {
                let z = Complex64::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(-2.5..2.5));
                let x = sh.eval_c(z).unwrap();
                let y = sah.eval_c(z).unwrap();
                assert!((x - y).norm() < 1e-9 * x.norm().max(1.0));
                // sanity on the action itself
                let hv = h.eval_c(z).unwrap();
                let direct = mobius_apply(&a, ExtComplex::Finite(hv));
                assert!(direct.chordal_distance(ExtComplex::from(ah.eval_c(z).unwrap())) < 1e-10);
            }
        }
    }

    #[test]
    fn hopf_examples() {
        let q = hopf_from_gauss_pair(&Expr::z(), &parse("(log(z)+1)/(log(z)-1)").unwrap()).unwrap();
        for z in [c(0.3, 0.1), c(0.5, -0.6)] {
            assert!((q.eval_c(z).unwrap() - 1.0 / (4.0 * z * z)).norm() < 1e-12);
        }
        let q = hopf_from_gauss_pair(&Expr::z(), &Expr::z()).unwrap();
        assert!(q.coeff.is_zero());
        let mu = 0.3;
        let q = hopf_from_gauss_pair(&Expr::z(), &parse("z^0.3").unwrap()).unwrap();
        let z = c(0.2, 0.7);
        assert!((q.eval_c(z).unwrap() - (1.0 - mu * mu) / (4.0 * z * z)).norm() < 1e-12);
    }

    #[test]
    fn schwarzian_cocycle_under_squaring() {
        // S(h o phi) = S(h)(phi) phi'^2 + S(phi), phi = z^2
        let h = parse("exp(z)+z^3").unwrap();
        let phi = Expr::z().powi(2);
        let lhs = schwarzian(&h.compose(&phi)).unwrap();
        let rhs = schwarzian(&h).unwrap().pullback(&phi);
        let sphi = schwarzian(&phi).unwrap();
        for z in [c(0.4, 0.3), c(-0.7, 0.2), c(1.1, -0.5)] {
            let l = lhs.eval_c(z).unwrap();
            let r = rhs.eval_c(z).unwrap() + sphi.eval_c(z).unwrap();
            assert!((l - r).norm() < 1e-9 * l.norm().max(1.0));
        }
        // the difference of two Schwarzians transforms as a 2-differential
        let h2 = parse("z^5-z").unwrap();
        let d = &schwarzian(&h).unwrap() - &schwarzian(&h2).unwrap();
        let d_pulled = &lhs - &schwarzian(&h2.compose(&phi)).unwrap();
        let d_rule = d.pullback(&phi);
        for z in [c(0.4, 0.3), c(0.9, 0.8)] {
            let a = d_pulled.eval_c(z).unwrap();
            let b = d_rule.eval_c(z).unwrap();
            assert!((a - b).norm() < 1e-9 * a.norm().max(1.0));
        }
    }
}
