//! A face ready for sampling: a lift together with `g`, `G`, `omega_hat`
//! and `Q`, evaluated consistently on one branch of the universal cover.

use num_complex::Complex64;

use crate::expr::{BigComplex, BranchPoint, Expr, Scalar, Tape, TwoDifferential, Value};
use crate::frames::{small_formula, ClosedLift, FrameError, GaussPair, OdeLift, WeierstrassData};
use crate::mink::Mat2;

/// How the face was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceData {
    Gauss(GaussPair),
    Weierstrass(WeierstrassData),
    Frame(ClosedLift),
}

#[derive(Debug, Clone)]
enum Engine {
    /// Tape outputs: `F` (4), `F'` (4), `g`, `omega_hat`, `g'`, `G`, `G'`.
    Closed { lift: ClosedLift, tape: Tape },
    /// Integrated from `base`, where the frame is `base_frame`.
    Ode {
        lift: OdeLift,
        base: Complex64,
        base_frame: Mat2,
    },
}

/// A point on the cover together with the frame there.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceState {
    pub bp: BranchPoint,
    pub frame: Mat2,
}

/// Everything known at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacePoint {
    pub z: Complex64,
    pub frame: Mat2,
    pub g: Complex64,
    pub dg: Complex64,
    pub omega: Complex64,
    pub big_g: Complex64,
    pub dbig_g: Complex64,
    /// `Q = omega_hat g'` (coefficient of `dz^2`).
    pub q: Complex64,
}

#[derive(Debug, Clone)]
pub struct Face {
    pub data: FaceData,
    pub g: Expr,
    pub omega: Expr,
    /// Symbolic `G` when available (closed lifts).
    pub big_g: Option<Expr>,
    pub hopf: TwoDifferential,
    engine: Engine,
}

impl Face {
    pub fn from_gauss_pair(p: GaussPair) -> Result<Face, FrameError> {
        let lift = small_formula(&p)?;
        let omega = p.omega()?;
        let hopf = p.hopf()?;
        Ok(Face::closed(FaceData::Gauss(p.clone()), lift, p.g, omega, p.big_g, hopf))
    }

    pub fn from_frame(lift: ClosedLift) -> Face {
        let g = lift.secondary_gauss_map();
        let omega = lift.omega();
        let big_g = lift.hyperbolic_gauss_map();
        let hopf = TwoDifferential::new(&omega * &g.diff());
        Face::closed(FaceData::Frame(lift.clone()), lift, g, omega, big_g, hopf)
    }

    fn closed(data: FaceData, lift: ClosedLift, g: Expr, omega: Expr, big_g: Expr, hopf: TwoDifferential) -> Face {
        let mut outs = lift.exprs();
        outs.extend([g.clone(), omega.clone(), g.diff(), big_g.clone(), big_g.diff()]);
        let tape = Tape::new(&outs);
        Face {
            data,
            g,
            omega,
            big_g: Some(big_g),
            hopf,
            engine: Engine::Closed { lift, tape },
        }
    }

    /// Integrated face with frame `base_frame` at `base` (identity by default).
    pub fn from_weierstrass(w: WeierstrassData, base: Complex64, base_frame: Option<Mat2>) -> Face {
        let hopf = w.hopf();
        Face {
            data: FaceData::Weierstrass(w.clone()),
            g: w.g.clone(),
            omega: w.omega.clone(),
            big_g: None,
            hopf,
            engine: Engine::Ode {
                lift: OdeLift::new(w),
                base,
                base_frame: base_frame.unwrap_or_else(Mat2::identity),
            },
        }
    }

    pub fn closed_lift(&self) -> Option<&ClosedLift> {
        match &self.engine {
            Engine::Closed { lift, .. } => Some(lift),
            Engine::Ode { .. } => None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed_lift().is_some()
    }

    fn tape(&self) -> &Tape {
        match &self.engine {
            Engine::Closed { tape, .. } => tape,
            Engine::Ode { lift, .. } => lift.tape(),
        }
    }

    /// State at `z` on the principal branch. Integrated faces reach `z` by a
    /// straight segment from their base point.
    pub fn start(&self, z: Complex64) -> Result<FaceState, FrameError> {
        match &self.engine {
            Engine::Closed { tape, .. } => {
                let (v, bp) = tape.eval_fresh(z)?;
                Ok(FaceState {
                    frame: ClosedLift::frame_from(&v, z)?,
                    bp,
                })
            }
            Engine::Ode { lift, base, base_frame } => {
                let b = FaceState {
                    bp: lift.start(*base)?,
                    frame: *base_frame,
                };
                if *base == z {
                    return Ok(b);
                }
                Ok(self.walk(&b, &[z])?.pop().expect("one vertex"))
            }
        }
    }

    /// Continues `from` along `path`, returning a state per vertex.
    pub fn walk(&self, from: &FaceState, path: &[Complex64]) -> Result<Vec<FaceState>, FrameError> {
        match &self.engine {
            Engine::Closed { tape, .. } => {
                let mut cur = from.bp.clone();
                let mut out = Vec::with_capacity(path.len());
                for &z in path {
                    let (v, next) = if z == cur.z { (tape.eval_at(&cur)?, cur.clone()) } else { tape.step(&cur, z)? };
                    out.push(FaceState {
                        frame: ClosedLift::frame_from(&v, z)?,
                        bp: next.clone(),
                    });
                    cur = next;
                }
                Ok(out)
            }
            Engine::Ode { lift, .. } => {
                let mut full = Vec::with_capacity(path.len() + 1);
                full.push(from.bp.z);
                full.extend_from_slice(path);
                let rep = lift.integrate(&from.bp, from.frame, &full)?;
                Ok(rep
                    .samples
                    .into_iter()
                    .skip(1)
                    .map(|s| FaceState { bp: s.bp, frame: s.frame })
                    .collect())
            }
        }
    }

    /// Full data at a state.
    pub fn point(&self, st: &FaceState) -> Result<FacePoint, FrameError> {
        let z = st.bp.z;
        let v = self.tape().eval_at(&st.bp)?;
        let c = |k: usize| v[k].c().ok_or(FrameError::Pole(z));
        match &self.engine {
            Engine::Closed { .. } => {
                let (g, omega, dg) = (c(8)?, c(9)?, c(10)?);
                // G = inf everywhere happens for degenerate (lightlike) frames
                let (big_g, dbig_g) = match (c(11), c(12)) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => (Complex64::new(f64::INFINITY, 0.0), Complex64::new(f64::NAN, 0.0)),
                };
                Ok(FacePoint {
                    z,
                    frame: st.frame,
                    g,
                    dg,
                    omega,
                    big_g,
                    dbig_g,
                    q: omega * dg,
                })
            }
            Engine::Ode { .. } => {
                let (g, omega, dg) = (c(0)?, c(1)?, c(2)?);
                let f = st.frame;
                let num = g * f.a11() + f.a12();
                let den = g * f.a21() + f.a22();
                if den.norm() == 0.0 {
                    return Err(FrameError::Pole(z));
                }
                Ok(FacePoint {
                    z,
                    frame: f,
                    g,
                    dg,
                    omega,
                    big_g: num / den,
                    dbig_g: dg / (den * den),
                    q: omega * dg,
                })
            }
        }
    }

    /// `point(start(z))`.
    pub fn at(&self, z: Complex64) -> Result<FacePoint, FrameError> {
        self.point(&self.start(z)?)
    }

    /// Frame entries at a branch point in multiprecision (closed lifts only).
    pub fn frame_hp(&self, bp: &BranchPoint) -> Option<Result<[BigComplex; 4], FrameError>> {
        let Engine::Closed { tape, .. } = &self.engine else {
            return None;
        };
        let z = BigComplex::from_c64(bp.z);
        Some(match tape.eval_generic(&z, Some(&bp.logs)) {
            Ok((v, _)) => {
                let get = |k: usize| match &v[k] {
                    Value::Finite(x) => Ok(x.clone()),
                    Value::Infinity => Err(FrameError::Pole(bp.z)),
                };
                (|| Ok([get(0)?, get(1)?, get(2)?, get(3)?]))()
            }
            Err(e) => Err(e.into()),
        })
    }

    /// Tape with a single output `g`, sharing no state with the face's tape;
    /// used for continuing the secondary Gauss map on its own.
    pub fn g_tape(&self) -> Tape {
        Tape::new(std::slice::from_ref(&self.g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval::circle_path;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_and_integrated_faces_agree_on_the_data() {
        let p = GaussPair::new(Expr::z(), parse("z^0.5").unwrap()).unwrap();
        let closed = Face::from_gauss_pair(p.clone()).unwrap();
        let z0 = c(0.8, 0.0);
        let f0 = closed.start(z0).unwrap().frame;
        let w = WeierstrassData {
            g: p.g.clone(),
            omega: p.omega().unwrap(),
        };
        let ode = Face::from_weierstrass(w, z0, Some(f0));
        let path = circle_path(c(0.0, 0.0), 0.8, 16, 0.0);
        let a = closed.walk(&closed.start(z0).unwrap(), &path[1..9]).unwrap();
        let b = ode.walk(&ode.start(z0).unwrap(), &path[1..9]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let px = closed.point(x).unwrap();
            let py = ode.point(y).unwrap();
            assert!((px.frame - py.frame).norm() < 1e-7);
            assert!((px.big_g - py.big_g).norm() < 1e-7);
            assert!((px.dbig_g - py.dbig_g).norm() < 1e-6);
            assert!((px.q - py.q).norm() < 1e-9);
        }
    }

    #[test]
    fn frame_faces_recover_their_gauss_maps() {
        let f = crate::expr::parse;
        let s = Complex64::new(0.0, 1.0) / (2.0 * f64::sqrt(2.0));
        let sz = f("sqrt(z)").unwrap();
        let l = f("log(z)").unwrap();
        let k = Expr::constant(s);
        let lift = ClosedLift::new([
            &k * &sz * (3.0 - l.clone()),
            &k * &sz * (l.clone() - 1.0),
            &k / &sz * (l.clone() + 1.0),
            &k / &sz * (-3.0 - l.clone()),
        ]);
        let face = Face::from_frame(lift);
        let p = face.at(c(0.3, 0.4)).unwrap();
        let lz = c(0.3, 0.4).ln();
        assert!((p.g - (lz + 1.0) / (lz - 1.0)).norm() < 1e-12);
        assert!((p.big_g - c(0.3, 0.4)).norm() < 1e-12);
        assert!((p.q - 0.25 / c(0.3, 0.4).powi(2)).norm() < 1e-10);
        assert!((p.frame.det() - 1.0).norm() < 1e-12);
    }
}
