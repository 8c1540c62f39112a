//! Pointwise geometry of a face: the projection to de Sitter space, the unit
//! normal and light-cone Gauss map, the metrics of the data and the
//! stereographic picture. Grids are sampled by continuation so that a whole
//! window sits on one sheet of the universal cover.

pub mod export;
pub mod grid;
pub mod singular;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::face::{Face, FacePoint, FaceState};
use crate::frames::FrameError;
use crate::mink::{e3, ExtComplex, HermMat, Mat2, MinkowskiVec};

pub use grid::{sample_grid, GridSamples, Walker, Window};
pub use singular::{ray_crossings, trace_singular_set, Annotation, SectorSet, SingularCurve, TraceOptions};

/// Accepted `|det F - 1|`, relative to `max(1, |F|^2)`.
pub const DET_TOL: f64 = 1e-6;
/// Tolerance on `<f, f> = 1` for projected points.
pub const S31_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("frame determinant drifted by {0:.3e}")]
    Drift(f64),
    #[error("|g| = 1 at {0}: the light-cone Gauss map is undefined")]
    Singular(Complex64),
    #[error("stereographic projection needs x0 > 1 (got {0})")]
    OutsideProjection(f64),
    #[error("resolution too coarse: {coarse} curves at n, {fine} at 2n")]
    UnstableTopology { coarse: usize, fine: usize },
    #[error("mesh has no valid vertices")]
    NoValidVertices,
    #[error("window is degenerate or touches a puncture: {0}")]
    BadWindow(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SurfaceError {
    fn from(e: std::io::Error) -> Self {
        SurfaceError::Io(e.to_string())
    }
}

/// `f = F e3 F*` as a point of de Sitter space.
pub fn project_to_s31(f: &Mat2) -> Result<MinkowskiVec, SurfaceError> {
    let drift = (f.det() - 1.0).norm() / f.norm().powi(2).max(1.0);
    if !(drift <= DET_TOL) {
        return Err(SurfaceError::Drift(drift));
    }
    Ok(HermMat::symmetrize(f.congruence(&e3())).to_minkowski())
}

/// Timelike unit normal
/// `nu = F [[1+|g|^2, 2g], [2 conj g, 1+|g|^2]] F* / (|g|^2 - 1)`.
pub fn unit_normal(p: &FacePoint) -> Result<MinkowskiVec, SurfaceError> {
    let a = p.g.norm_sqr();
    if (a - 1.0).abs() < 1e-14 {
        return Err(SurfaceError::Singular(p.z));
    }
    let one = Complex64::new(1.0 + a, 0.0);
    let m = Mat2::new(one, 2.0 * p.g, 2.0 * p.g.conj(), one);
    let h = HermMat::symmetrize(p.frame.congruence(&m));
    Ok(h.to_minkowski().scale(1.0 / (a - 1.0)))
}

/// Which half of the ideal boundary the light-cone Gauss map lands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Future,
    Past,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMaps {
    pub big_g: Complex64,
    pub g: Complex64,
    /// `pi(L)` for the null line `L = [f + nu]`; `None` on the singular set.
    pub light_cone: Option<ExtComplex>,
    pub boundary: Option<Boundary>,
}

/// Projection of a null vector to the sphere at infinity, `V12 / V22`.
pub fn light_cone_projection(v: &MinkowskiVec) -> Option<ExtComplex> {
    let h = v.to_herm().0;
    ExtComplex::from_homogeneous(h.a12(), h.a22())
}

pub fn gauss_maps_at(p: &FacePoint) -> Result<GaussMaps, SurfaceError> {
    let nu = match unit_normal(p) {
        Ok(nu) => nu,
        Err(SurfaceError::Singular(_)) => {
            return Ok(GaussMaps {
                big_g: p.big_g,
                g: p.g,
                light_cone: None,
                boundary: None,
            })
        }
        Err(e) => return Err(e),
    };
    let f = project_to_s31(&p.frame)?;
    let l = f + nu;
    Ok(GaussMaps {
        big_g: p.big_g,
        g: p.g,
        light_cone: light_cone_projection(&l),
        boundary: Some(if l.x0() > 0.0 { Boundary::Future } else { Boundary::Past }),
    })
}

/// Conformal factors (coefficients of `|dz|^2`) and the Hopf coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ds2: f64,
    pub dshat2: f64,
    pub dsigma2: f64,
    pub ds_lift2: f64,
    pub q: Complex64,
}

pub fn metrics_at(p: &FacePoint) -> Metrics {
    let a = p.g.norm_sqr();
    let w = p.omega.norm_sqr();
    Metrics {
        ds2: (1.0 - a).powi(2) * w,
        dshat2: (1.0 + a).powi(2) * w,
        dsigma2: 4.0 * p.dg.norm_sqr() / (1.0 - a).powi(2),
        ds_lift2: (1.0 + p.big_g.norm_sqr()).powi(2) * (p.q / p.dbig_g).norm_sqr(),
        q: p.q,
    }
}

/// `Pi(x) = (x1, x2, x3) / (1 + x0)`, defined for `x0 > 1`.
pub fn stereographic(x: &MinkowskiVec) -> Result<[f64; 3], SurfaceError> {
    let x0 = x.x0();
    if !(x0 > 1.0) {
        return Err(SurfaceError::OutsideProjection(x0));
    }
    let s = 1.0 / (1.0 + x0);
    Ok([x.0[1] * s, x.0[2] * s, x.0[3] * s])
}

/// One evaluated point of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub z: Complex64,
    pub f: MinkowskiVec,
    pub normal: Option<MinkowskiVec>,
    pub metrics: Metrics,
    /// `|g|^2 - 1`.
    pub sing: f64,
}

pub fn surface_sample(p: &FacePoint) -> Result<SurfaceSample, SurfaceError> {
    Ok(SurfaceSample {
        z: p.z,
        f: project_to_s31(&p.frame)?,
        normal: unit_normal(p).ok(),
        metrics: metrics_at(p),
        sing: p.g.norm_sqr() - 1.0,
    })
}

impl Walker for Face {
    type State = FaceState;

    fn start(&self, z: Complex64) -> Result<FaceState, FrameError> {
        Face::start(self, z)
    }

    fn walk(&self, from: &FaceState, to: Complex64) -> Result<FaceState, FrameError> {
        Ok(Face::walk(self, from, &[to])?.pop().expect("one vertex"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use crate::frames::GaussPair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_projects_to_e3() {
        let x = project_to_s31(&Mat2::identity()).unwrap();
        assert_eq!(x, MinkowskiVec::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn random_frames_land_on_de_sitter_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut r = || c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let m = Mat2::new(r(), r(), r(), r());
            let Ok(m) = m.normalized() else { continue };
            let x = project_to_s31(&m).unwrap();
            assert!(x.de_sitter_residual() < 1e-12 * m.norm().powi(4).max(1.0));
        }
    }

    #[test]
    fn stereographic_shell() {
        let x = MinkowskiVec::new(2f64.sqrt(), 0.0, 0.0, 3f64.sqrt());
        let p = stereographic(&x).unwrap();
        assert!((p[2] - 3f64.sqrt() / (1.0 + 2f64.sqrt())).abs() < 1e-15);
        let n2: f64 = p.iter().map(|v| v * v).sum();
        assert!((n2 - 0.5147186257614296).abs() < 1e-12);
        assert!(stereographic(&MinkowskiVec::new(1.0, 0.0, 0.0, 0.0)).is_err());
    }

    fn catenoid() -> Face {
        Face::from_gauss_pair(GaussPair::new(Expr::z(), parse("z^0.3").unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn normal_is_unit_timelike_and_orthogonal() {
        let face = catenoid();
        for z in [c(0.4, 0.1), c(1.7, -0.8), c(-0.3, 0.5)] {
            let p = face.at(z).unwrap();
            let nu = unit_normal(&p).unwrap();
            let f = project_to_s31(&p.frame).unwrap();
            assert!((nu.norm_sq() + 1.0).abs() < 1e-9);
            assert!(nu.inner(&f).abs() < 1e-9);
            let h = 1e-6;
            for d in [c(h, 0.0), c(0.0, h)] {
                let fp = project_to_s31(&face.at(z + d).unwrap().frame).unwrap();
                let fm = project_to_s31(&face.at(z - d).unwrap().frame).unwrap();
                let t = (fp - fm).scale(0.5 / h);
                assert!(nu.inner(&t).abs() < 1e-6 * (1.0 + t.inner(&t).abs().sqrt()));
            }
        }
    }

    #[test]
    fn light_cone_gauss_map_is_g_big() {
        let face = catenoid();
        for z in [c(0.4, 0.1), c(1.7, -0.8), c(-0.3, 0.5)] {
            let p = face.at(z).unwrap();
            let m = gauss_maps_at(&p).unwrap();
            let l = m.light_cone.unwrap().finite().unwrap();
            assert!((l - p.big_g).norm() < 1e-9, "{l} vs {}", p.big_g);
            let expect = if p.g.norm() > 1.0 { Boundary::Future } else { Boundary::Past };
            assert_eq!(m.boundary, Some(expect));
        }
    }

    #[test]
    fn metric_identity() {
        let face = catenoid();
        let p = face.at(c(0.6, 0.2)).unwrap();
        let m = metrics_at(&p);
        assert!((m.dsigma2 * m.ds2 - 4.0 * m.q.norm_sqr()).abs() < 1e-12 * m.q.norm_sqr());
    }
}
