//! Complex 2x2 matrices, the Hermitian model of Minkowski 4-space and
//! Moebius actions.
//!
//! Minkowski vectors `(x0, x1, x2, x3)` are identified with Hermitian
//! matrices through the basis `e0 = id`, `e1`, `e2`, `e3` (Pauli-type):
//!
//! ```text
//! X = [[x0 + x3, x1 + i x2], [x1 - i x2, x0 - x3]],   <X, X> = -det X
//! ```

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for SU(1,1) membership of numerically produced matrices.
pub const SU11_TOL: f64 = 1e-9;

/// Tolerance used when checking that a matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinkError {
    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("singular matrix")]
    Singular,
}

/// A complex 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[Complex64; 2]; 2],
}

impl Mat2 {
    pub const fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Self {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub fn from_real(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self::new(
            Complex64::from(a11),
            Complex64::from(a12),
            Complex64::from(a21),
            Complex64::from(a22),
        )
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    #[inline]
    pub fn a11(&self) -> Complex64 {
        self.m[0][0]
    }
    #[inline]
    pub fn a12(&self) -> Complex64 {
        self.m[0][1]
    }
    #[inline]
    pub fn a21(&self) -> Complex64 {
        self.m[1][0]
    }
    #[inline]
    pub fn a22(&self) -> Complex64 {
        self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.a11() * self.a22() - self.a12() * self.a21()
    }

    pub fn trace(&self) -> Complex64 {
        self.a11() + self.a22()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::new(
            self.a11().conj(),
            self.a21().conj(),
            self.a12().conj(),
            self.a22().conj(),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a11(), self.a21(), self.a12(), self.a22())
    }

    pub fn conj(&self) -> Self {
        Self::new(
            self.a11().conj(),
            self.a12().conj(),
            self.a21().conj(),
            self.a22().conj(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.a11() * s, self.a12() * s, self.a21() * s, self.a22() * s)
    }

    /// Adjugate; equals the inverse when `det = 1`.
    pub fn adjugate(&self) -> Self {
        Self::new(self.a22(), -self.a12(), -self.a21(), self.a11())
    }

    pub fn inverse(&self) -> Result<Self, MinkError> {
        let d = self.det();
        if d == ZERO || !d.is_finite() {
            return Err(MinkError::Singular);
        }
        Ok(self.adjugate().scale(d.inv()))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|c| c.is_finite())
    }

    /// Rescales to unit determinant (choosing the principal square root).
    pub fn normalized(&self) -> Result<Self, MinkError> {
        let d = self.det();
        if d == ZERO {
            return Err(MinkError::Singular);
        }
        Ok(self.scale(d.sqrt().inv()))
    }

    /// `A X A*`, the isometric action on Hermitian matrices.
    pub fn congruence(&self, x: &Mat2) -> Mat2 {
        *self * *x * self.adjoint()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, b: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &b.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, b: Mat2) -> Mat2 {
        Mat2::new(
            self.a11() + b.a11(),
            self.a12() + b.a12(),
            self.a21() + b.a21(),
            self.a22() + b.a22(),
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, b: Mat2) -> Mat2 {
        Mat2::new(
            self.a11() - b.a11(),
            self.a12() - b.a12(),
            self.a21() - b.a21(),
            self.a22() - b.a22(),
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-ONE)
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.a11(),
            self.a12(),
            self.a21(),
            self.a22()
        )
    }
}

/// Basis matrices of Herm(2).
pub fn e0() -> Mat2 {
    Mat2::identity()
}
pub fn e1() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}
pub fn e2() -> Mat2 {
    Mat2::new(ZERO, I, -I, ZERO)
}
pub fn e3() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

/// `R = 1/2 [[1, 1], [i, -i]]`; `R *` maps the unit disk onto the upper half plane.
pub fn cayley_r() -> Mat2 {
    Mat2::new(
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.0, 0.5),
        Complex64::new(0.0, -0.5),
    )
}

/// Inverse of [`cayley_r`]: `[[1, -i], [1, i]]`.
pub fn cayley_r_inv() -> Mat2 {
    Mat2::new(ONE, -I, ONE, I)
}

/// `D = [[0, i], [i, 0]]`; `D * g = 1/g`.
pub fn inversion_d() -> Mat2 {
    Mat2::new(ZERO, I, I, ZERO)
}

/// A vector of Lorentz-Minkowski 4-space with signature (-, +, +, +).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiVec(pub [f64; 4]);

impl MinkowskiVec {
    pub fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Self([x0, x1, x2, x3])
    }

    pub fn x0(&self) -> f64 {
        self.0[0]
    }

    /// Lorentzian inner product.
    pub fn inner(&self, o: &MinkowskiVec) -> f64 {
        -self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2] + self.0[3] * o.0[3]
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Residual of the de Sitter constraint `<x, x> = 1`.
    pub fn de_sitter_residual(&self) -> f64 {
        (self.norm_sq() - 1.0).abs()
    }

    pub fn to_herm(&self) -> HermMat {
        let [x0, x1, x2, x3] = self.0;
        HermMat(Mat2::new(
            Complex64::new(x0 + x3, 0.0),
            Complex64::new(x1, x2),
            Complex64::new(x1, -x2),
            Complex64::new(x0 - x3, 0.0),
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|x| x * s))
    }
}

impl Add for MinkowskiVec {
    type Output = MinkowskiVec;
    fn add(self, o: MinkowskiVec) -> MinkowskiVec {
        MinkowskiVec(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for MinkowskiVec {
    type Output = MinkowskiVec;
    fn sub(self, o: MinkowskiVec) -> MinkowskiVec {
        MinkowskiVec(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for MinkowskiVec {
    type Output = MinkowskiVec;
    fn neg(self) -> MinkowskiVec {
        self.scale(-1.0)
    }
}

/// A Hermitian 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermMat(pub Mat2);

impl HermMat {
    /// Wraps `m` after checking `m* = m` to [`HERMITIAN_TOL`] (relative to the
    /// size of `m`). The result is exactly Hermitian.
    pub fn try_from_mat(m: Mat2) -> Result<Self, MinkError> {
        let res = (m - m.adjoint()).max_abs();
        if !(res <= HERMITIAN_TOL * m.max_abs().max(1.0)) {
            return Err(MinkError::NotHermitian(res));
        }
        Ok(Self::symmetrize(m))
    }

    /// The Hermitian part `(m + m*)/2`.
    pub fn symmetrize(m: Mat2) -> Self {
        let h = (m + m.adjoint()).scale(Complex64::new(0.5, 0.0));
        HermMat(h)
    }

    pub fn to_minkowski(&self) -> MinkowskiVec {
        let m = &self.0;
        let p = m.a11().re;
        let q = m.a22().re;
        MinkowskiVec::new(0.5 * (p + q), m.a12().re, m.a12().im, 0.5 * (p - q))
    }

    pub fn det(&self) -> f64 {
        self.0.det().re
    }

    /// `<X, X> = -det X`.
    pub fn lorentz_norm_sq(&self) -> f64 {
        -self.det()
    }
}

/// Converts a Hermitian-looking matrix to a Minkowski vector, rejecting
/// non-Hermitian input.
pub fn herm_to_minkowski(m: &Mat2) -> Result<MinkowskiVec, MinkError> {
    Ok(HermMat::try_from_mat(*m)?.to_minkowski())
}

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtComplex {
    Finite(Complex64),
    Infinity,
}

impl ExtComplex {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            ExtComplex::Finite(c) => Some(c),
            ExtComplex::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtComplex::Infinity)
    }

    /// Homogeneous coordinates `[w : 1]` or `[1 : 0]`.
    pub fn homogeneous(self) -> (Complex64, Complex64) {
        match self {
            ExtComplex::Finite(c) => (c, ONE),
            ExtComplex::Infinity => (ONE, ZERO),
        }
    }

    /// Collapses a homogeneous pair. `[0 : 0]` is not a point and yields `None`.
    pub fn from_homogeneous(num: Complex64, den: Complex64) -> Option<Self> {
        if den == ZERO {
            if num == ZERO {
                None
            } else {
                Some(ExtComplex::Infinity)
            }
        } else {
            let w = num / den;
            if w.is_finite() {
                Some(ExtComplex::Finite(w))
            } else {
                Some(ExtComplex::Infinity)
            }
        }
    }

    /// Chordal distance on the unit sphere; bounded by 2.
    pub fn chordal_distance(self, o: ExtComplex) -> f64 {
        match (self, o) {
            (ExtComplex::Infinity, ExtComplex::Infinity) => 0.0,
            (ExtComplex::Finite(a), ExtComplex::Infinity)
            | (ExtComplex::Infinity, ExtComplex::Finite(a)) => 2.0 / (1.0 + a.norm_sqr()).sqrt(),
            (ExtComplex::Finite(a), ExtComplex::Finite(b)) => {
                2.0 * (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
            }
        }
    }
}

impl From<Complex64> for ExtComplex {
    fn from(c: Complex64) -> Self {
        if c.is_finite() {
            ExtComplex::Finite(c)
        } else {
            ExtComplex::Infinity
        }
    }
}

/// Moebius action `A * z = (a11 z + a12) / (a21 z + a22)`, evaluated on
/// homogeneous coordinates so that poles map to [`ExtComplex::Infinity`].
///
/// Panics if `det A = 0`.
pub fn mobius_apply(a: &Mat2, z: ExtComplex) -> ExtComplex {
    assert!(a.det() != ZERO, "Moebius action of a singular matrix");
    let (p, q) = mobius_homogeneous(a, z.homogeneous());
    ExtComplex::from_homogeneous(p, q).expect("nonsingular matrix maps points to points")
}

/// The linear action on homogeneous coordinates, rescaled to avoid overflow.
pub fn mobius_homogeneous(a: &Mat2, (p, q): (Complex64, Complex64)) -> (Complex64, Complex64) {
    let np = a.a11() * p + a.a12() * q;
    let nq = a.a21() * p + a.a22() * q;
    let s = np.norm().max(nq.norm());
    if s > 0.0 && s.is_finite() && !(1e-150..=1e150).contains(&s) {
        (np / s, nq / s)
    } else {
        (np, nq)
    }
}

/// Residuals describing how far a matrix is from SU(1,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su11Membership {
    pub member: bool,
    /// Frobenius norm of `A e3 A* - e3`.
    pub form_residual: f64,
    /// `|det A - 1|`.
    pub det_residual: f64,
}

/// Checks `A e3 A* = e3` and `det A = 1` up to `tol`.
pub fn su11_membership(a: &Mat2, tol: f64) -> Su11Membership {
    let form_residual = (a.congruence(&e3()) - e3()).norm();
    let det_residual = (a.det() - ONE).norm();
    Su11Membership {
        member: form_residual < tol && det_residual < tol,
        form_residual,
        det_residual,
    }
}

/// Same test with residuals measured relative to `max(1, |A|^2)`; used where
/// large hyperbolic elements are only available in rounded form.
pub fn su11_membership_relative(a: &Mat2, tol: f64) -> Su11Membership {
    let s = a.norm().powi(2).max(1.0);
    let raw = su11_membership(a, f64::INFINITY);
    let form_residual = raw.form_residual / s;
    let det_residual = raw.det_residual / s;
    Su11Membership {
        member: form_residual < tol && det_residual < tol,
        form_residual,
        det_residual,
    }
}
