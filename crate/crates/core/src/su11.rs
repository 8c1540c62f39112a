//! Conjugacy classes of SU(1,1), canonical representatives and explicit
//! conjugators.
//!
//! An element of SU(1,1) has the shape `[[a, b], [conj b, conj a]]`, so its
//! trace `2 Re a` is real. The class invariants used here are the trace and
//! the sign of `Im a`, which is preserved by SU(1,1) conjugation whenever the
//! element is elliptic or parabolic.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mink::{cayley_r, cayley_r_inv, su11_membership_relative, Mat2, Su11Membership};

/// Default membership tolerance for classification, relative to `max(1, |A|^2)`.
pub const CLASSIFY_TOL: f64 = 1e-6;
/// Traces within this distance of `+-2` count as parabolic (or `+-id`).
pub const TRACE_TOL: f64 = 1e-9;
/// Maximum residual accepted for a conjugation witness.
pub const WITNESS_TOL: f64 = 1e-8;

const T0_GRID: [f64; 7] = [0.0, 1.0, -1.0, 2.0, -2.0, 0.5, -0.5];
const T0_ATTEMPTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Su11Error {
    #[error("matrix is not in SU(1,1) (form residual {form:.3e}, det residual {det:.3e})")]
    NotInSu11 { form: f64, det: f64 },
    #[error("no well-conditioned conjugator found (best residual {0:.3e})")]
    IllConditioned(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Su11Class {
    /// Conjugate to `Lambda_e(s)`, `s` in `(-pi, pi]`.
    Elliptic { s: f64 },
    /// Conjugate to `sign_outer * Lambda_p(sign_t)`.
    Parabolic { sign_outer: i8, sign_t: i8 },
    /// Conjugate to `sign_outer * Lambda_h(t)`, `t > 0`.
    Hyperbolic { sign_outer: i8, t: f64 },
}

impl Su11Class {
    pub fn name(&self) -> &'static str {
        match self {
            Su11Class::Elliptic { .. } => "elliptic",
            Su11Class::Parabolic { .. } => "parabolic",
            Su11Class::Hyperbolic { .. } => "hyperbolic",
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, Su11Class::Hyperbolic { .. })
    }

    /// Same family and parameters equal within `tol`.
    pub fn approx_eq(&self, o: &Su11Class, tol: f64) -> bool {
        match (self, o) {
            (Su11Class::Elliptic { s: a }, Su11Class::Elliptic { s: b }) => {
                // s = pi and s = -pi name the same class
                let d = (a - b).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) <= tol
            }
            (
                Su11Class::Parabolic { sign_outer: a, sign_t: b },
                Su11Class::Parabolic { sign_outer: c, sign_t: d },
            ) => a == c && b == d,
            (
                Su11Class::Hyperbolic { sign_outer: a, t: s },
                Su11Class::Hyperbolic { sign_outer: b, t },
            ) => a == b && (s - t).abs() <= tol * t.max(1.0),
            _ => false,
        }
    }
}

impl std::fmt::Display for Su11Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sg = |s: i8| if s > 0 { '+' } else { '-' };
        match self {
            Su11Class::Elliptic { s } => write!(f, "elliptic(s = {s:.12})"),
            Su11Class::Parabolic { sign_outer, sign_t } => {
                write!(f, "parabolic({}, {})", sg(*sign_outer), sg(*sign_t))
            }
            Su11Class::Hyperbolic { sign_outer, t } => write!(f, "hyperbolic({}, t = {t:.12})", sg(*sign_outer)),
        }
    }
}

/// `P` with `P A P^-1` equal to the canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugationWitness {
    pub p: Mat2,
    pub residual: f64,
}

pub fn lambda_e(t: f64) -> Mat2 {
    Mat2::new(
        Complex64::from_polar(1.0, t),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(1.0, -t),
    )
}

pub fn lambda_p(t: f64) -> Mat2 {
    Mat2::new(
        Complex64::new(1.0, t),
        Complex64::new(0.0, -t),
        Complex64::new(0.0, t),
        Complex64::new(1.0, -t),
    )
}

pub fn lambda_h(t: f64) -> Mat2 {
    Mat2::from_real(t.cosh(), t.sinh(), t.sinh(), t.cosh())
}

/// The isomorphism `SL(2,R) -> SU(1,1)`, `X -> R^-1 X R`.
pub fn rho(x: &Mat2) -> Mat2 {
    cayley_r_inv() * *x * cayley_r()
}

/// Inverse of [`rho`]; the result is real for SU(1,1) input.
pub fn rho_inv(a: &Mat2) -> Mat2 {
    cayley_r() * *a * cayley_r_inv()
}

pub fn canonical_matrix(c: &Su11Class) -> Mat2 {
    match *c {
        Su11Class::Elliptic { s } => lambda_e(s),
        Su11Class::Parabolic { sign_outer, sign_t } => {
            lambda_p(sign_t as f64).scale(Complex64::new(sign_outer as f64, 0.0))
        }
        Su11Class::Hyperbolic { sign_outer, t } => lambda_h(t).scale(Complex64::new(sign_outer as f64, 0.0)),
    }
}

fn sign(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Classifies with the default tolerances.
pub fn classify(a: &Mat2) -> Result<Su11Class, Su11Error> {
    classify_with(a, CLASSIFY_TOL, TRACE_TOL)
}

/// Classifies `a`, requiring relative SU(1,1) membership within `member_tol`
/// and treating `| |tr| - 2 | <= trace_tol` as the parabolic boundary.
pub fn classify_with(a: &Mat2, member_tol: f64, trace_tol: f64) -> Result<Su11Class, Su11Error> {
    let Su11Membership {
        member,
        form_residual,
        det_residual,
    } = su11_membership_relative(a, member_tol);
    if !member {
        return Err(Su11Error::NotInSu11 {
            form: form_residual,
            det: det_residual,
        });
    }
    // average the two diagonal entries: a11 ~ conj(a22)
    let d = (a.a11() + a.a22().conj()) * 0.5;
    let tr = 2.0 * d.re;
    let outer = sign(tr);
    if (tr.abs() - 2.0).abs() <= trace_tol {
        let eps = Mat2::identity().scale(Complex64::new(outer as f64, 0.0));
        if (*a - eps).norm() < trace_tol {
            return Ok(Su11Class::Elliptic {
                s: if outer > 0 { 0.0 } else { PI },
            });
        }
        return Ok(Su11Class::Parabolic {
            sign_outer: outer,
            sign_t: sign(d.im) * outer,
        });
    }
    if tr.abs() < 2.0 {
        let x = tr / 2.0;
        let y = ((1.0 - x) * (1.0 + x)).sqrt();
        return Ok(Su11Class::Elliptic {
            s: (sign(d.im) as f64 * y).atan2(x),
        });
    }
    Ok(Su11Class::Hyperbolic {
        sign_outer: outer,
        t: (tr.abs() / 2.0).acosh(),
    })
}

fn real_part(m: &Mat2) -> [[f64; 2]; 2] {
    [[m.a11().re, m.a12().re], [m.a21().re, m.a22().re]]
}

/// Basis of the kernel of a 4x4 real system by full-pivot elimination.
fn null_space(mut m: [[f64; 4]; 4], tol: f64) -> Vec<[f64; 4]> {
    let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    let mut cols: Vec<usize> = (0..4).collect();
    while row < 4 {
        // pick the largest remaining entry
        let mut best = (0.0, 0, 0);
        for r in row..4 {
            for &c in &cols {
                if m[r][c].abs() > best.0 {
                    best = (m[r][c].abs(), r, c);
                }
            }
        }
        if best.0 <= tol * scale {
            break;
        }
        let (_, r, c) = best;
        m.swap(row, r);
        let pv = m[row][c];
        for x in m[row].iter_mut() {
            *x /= pv;
        }
        for rr in 0..4 {
            if rr != row {
                let f = m[rr][c];
                if f != 0.0 {
                    for k in 0..4 {
                        m[rr][k] -= f * m[row][k];
                    }
                }
            }
        }
        pivot_cols.push((row, c));
        cols.retain(|&x| x != c);
        row += 1;
    }
    cols.iter()
        .map(|&free| {
            let mut v = [0.0; 4];
            v[free] = 1.0;
            for &(r, c) in &pivot_cols {
                v[c] = -m[r][free];
            }
            v
        })
        .collect()
}

fn mat_from(v: &[f64; 4]) -> [[f64; 2]; 2] {
    [[v[0], v[1]], [v[2], v[3]]]
}

fn det_r(q: &[[f64; 2]; 2]) -> f64 {
    q[0][0] * q[1][1] - q[0][1] * q[1][0]
}

fn to_mat2(q: &[[f64; 2]; 2]) -> Mat2 {
    Mat2::from_real(q[0][0], q[0][1], q[1][0], q[1][1])
}

/// Finds `P` in SU(1,1) with `P A P^-1 = canonical_matrix(classify(A))`.
///
/// Works in the real picture `X = R A R^-1`: the real solutions of
/// `Q X = B Q` form a linear space spanned by `U`, `V`, and some
/// `U + t0 V` is invertible. A negative determinant is fixed by `e3`, which
/// can only happen for hyperbolic classes and is undone by `diag(i, -i)`.
pub fn conjugator(a: &Mat2) -> Result<(ConjugationWitness, Su11Class, Mat2), Su11Error> {
    let class = classify(a)?;
    let canon = canonical_matrix(&class);
    if let Su11Class::Elliptic { s } = class {
        if s == 0.0 || s == PI {
            let residual = (*a - canon).norm();
            return Ok((ConjugationWitness { p: Mat2::identity(), residual }, class, canon));
        }
    }
    let x = real_part(&rho_inv(a));
    let b = real_part(&rho_inv(&canon));
    // unknowns q = [q11, q12, q21, q22]; rows are entries of Q X - B Q
    let mut sys = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            let row = &mut sys[2 * i + j];
            for k in 0..2 {
                row[2 * i + k] += x[k][j];
                row[2 * k + j] -= b[i][k];
            }
        }
    }
    let basis = null_space(sys, 1e-10);
    if basis.is_empty() {
        return Err(Su11Error::IllConditioned(f64::INFINITY));
    }
    let u = mat_from(&basis[0]);
    let v = if basis.len() > 1 { mat_from(&basis[1]) } else { [[0.0; 2]; 2] };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = f64::INFINITY;
    for attempt in 0..T0_ATTEMPTS {
        let t0 = if attempt < T0_GRID.len() {
            T0_GRID[attempt]
        } else {
            rng.gen_range(-10.0..10.0)
        };
        let q: [[f64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|j| u[i][j] + t0 * v[i][j]));
        let n2: f64 = q.iter().flatten().map(|x| x * x).sum();
        let det = det_r(&q);
        if det.abs() <= 1e-8 * n2 {
            continue;
        }
        let sq = det.abs().sqrt();
        let mut w = to_mat2(&q).scale(Complex64::new(1.0 / sq, 0.0));
        let mut flip = false;
        if det < 0.0 {
            // e3 Q conjugates X to e3 B e3, the class of the opposite parameter
            w = crate::mink::e3() * w;
            flip = true;
        }
        let mut p = rho(&w);
        if flip {
            if !class.is_hyperbolic() {
                continue;
            }
            let k = Mat2::new(
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
            );
            p = k * p;
        }
        let residual = (p * *a * p.adjugate() - canon).norm() / a.norm().max(1.0);
        best = best.min(residual);
        if residual < WITNESS_TOL {
            return Ok((ConjugationWitness { p, residual }, class, canon));
        }
    }
    Err(Su11Error::IllConditioned(best))
}
