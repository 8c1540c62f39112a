//! Multiprecision complex numbers on top of `astro-float`.
//!
//! Only the handful of operations the evaluator needs. Used to certify large
//! hyperbolic monodromies whose SU(1,1) residual cannot be resolved in f64.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode};
use num_complex::Complex64;

use super::eval::Scalar;

/// Working precision in bits.
pub const HP_PRECISION: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CC: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

fn with_cc<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CC.with(|c| f(&mut c.borrow_mut()))
}

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x, HP_PRECISION)
}

fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    // astro-float has no direct conversion; its decimal rendering is exact
    // enough for the final rounding step.
    let s = x.to_string();
    s.parse::<f64>().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone)]
pub struct BigComplex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl BigComplex {
    pub fn new(re: BigFloat, im: BigFloat) -> Self {
        BigComplex { re, im }
    }

    pub fn pi() -> BigFloat {
        with_cc(|cc| cc.pi(HP_PRECISION, RM))
    }

    pub fn norm_sqr(&self) -> BigFloat {
        self.re
            .mul(&self.re, HP_PRECISION, RM)
            .add(&self.im.mul(&self.im, HP_PRECISION, RM), HP_PRECISION, RM)
    }

    pub fn conj(&self) -> Self {
        BigComplex::new(self.re.clone(), self.im.neg())
    }

    /// `atan2(y, x)` in `(-pi, pi]`.
    fn atan2(y: &BigFloat, x: &BigFloat) -> BigFloat {
        let pi = Self::pi();
        if x.is_zero() {
            let half = pi.div(&bf(2.0), HP_PRECISION, RM);
            return if y.is_negative() { half.neg() } else { half };
        }
        let q = y.div(x, HP_PRECISION, RM);
        let a = with_cc(|cc| q.atan(HP_PRECISION, RM, cc));
        if x.is_positive() {
            a
        } else if y.is_negative() {
            a.sub(&pi, HP_PRECISION, RM)
        } else {
            a.add(&pi, HP_PRECISION, RM)
        }
    }
}

impl Scalar for BigComplex {
    fn from_c64(c: Complex64) -> Self {
        BigComplex::new(bf(c.re), bf(c.im))
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }

    fn add(&self, o: &Self) -> Self {
        BigComplex::new(
            self.re.add(&o.re, HP_PRECISION, RM),
            self.im.add(&o.im, HP_PRECISION, RM),
        )
    }

    fn sub(&self, o: &Self) -> Self {
        BigComplex::new(
            self.re.sub(&o.re, HP_PRECISION, RM),
            self.im.sub(&o.im, HP_PRECISION, RM),
        )
    }

    fn mul(&self, o: &Self) -> Self {
        let p = HP_PRECISION;
        let re = self.re.mul(&o.re, p, RM).sub(&self.im.mul(&o.im, p, RM), p, RM);
        let im = self.re.mul(&o.im, p, RM).add(&self.im.mul(&o.re, p, RM), p, RM);
        BigComplex::new(re, im)
    }

    fn div(&self, o: &Self) -> Self {
        let p = HP_PRECISION;
        let d = o.norm_sqr();
        let n = self.mul(&o.conj());
        BigComplex::new(n.re.div(&d, p, RM), n.im.div(&d, p, RM))
    }

    fn neg(&self) -> Self {
        BigComplex::new(self.re.neg(), self.im.neg())
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn exp(&self) -> Self {
        let p = HP_PRECISION;
        with_cc(|cc| {
            let m = self.re.exp(p, RM, cc);
            let c = self.im.cos(p, RM, cc);
            let s = self.im.sin(p, RM, cc);
            BigComplex::new(m.mul(&c, p, RM), m.mul(&s, p, RM))
        })
    }

    fn ln(&self) -> Self {
        let p = HP_PRECISION;
        let half_log = with_cc(|cc| self.norm_sqr().ln(p, RM, cc)).div(&bf(2.0), p, RM);
        BigComplex::new(half_log, Self::atan2(&self.im, &self.re))
    }

    fn two_pi_i(k: i64) -> Self {
        let p = HP_PRECISION;
        let v = Self::pi().mul(&bf(2.0 * k as f64), p, RM);
        BigComplex::new(bf(0.0), v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_functions_match_f64() {
        let zs = [
            Complex64::new(0.3, -1.7),
            Complex64::new(-2.0, 0.5),
            Complex64::new(-1.0, -1e-3),
            Complex64::new(0.0, 2.0),
        ];
        for z in zs {
            let b = BigComplex::from_c64(z);
            assert!((b.exp().to_c64() - z.exp()).norm() < 1e-13 * z.exp().norm());
            assert!((b.ln().to_c64() - z.ln()).norm() < 1e-14);
            let w = Complex64::new(0.7, 0.1);
            let q = b.div(&BigComplex::from_c64(w)).to_c64();
            assert!((q - z / w).norm() < 1e-14);
        }
    }

    #[test]
    fn exp_of_two_pi_i_is_one_to_high_precision() {
        let e = BigComplex::two_pi_i(3).exp();
        let d = e.sub(&BigComplex::from_c64(Complex64::new(1.0, 0.0)));
        let r = to_f64(&d.norm_sqr());
        assert!(r < 1e-150, "{r}");
    }
}
