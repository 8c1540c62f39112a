//! Monodromy around punctures and the classification of ends.
//!
//! The loop matrix is `rho = F(z0)^-1 F(z0 after one turn)`, so that
//! `F o tau = F rho`. It is only defined up to sign once projected to
//! PSU(1,1); we keep the raw matrix and a representative with `Re tr >= 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{pole_order_at, BranchPoint, pole_order_of_two_differential, schwarzian, BigComplex, Expr, Puncture, Scalar, Tape, TwoDifferential, Value};
use crate::face::Face;
use crate::frames::FrameError;
use crate::mink::{e3, su11_membership, ExtComplex, Mat2, Su11Membership};
use crate::su11::{classify, Su11Class};
use crate::surface::{metrics_at, trace_singular_set, TraceOptions, Window};

pub const DEFAULT_STEPS: usize = 4096;
/// Largest accepted `|rho e3 rho* - e3|` for data that descends to the punctured disc.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Chordal drift of `g` around a loop below which `g` is called single-valued.
pub const G_DRIFT_TOL: f64 = 1e-8;
pub const DELTA_BAND: f64 = 0.05;
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;
const MAX_RADIUS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonodromyError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("loop radius must be positive (got {0})")]
    BadRadius(f64),
    #[error("irregular singularity: pole order {0} of the projective connection")]
    Irregular(i32),
    #[error("local analysis failed: {0}")]
    Local(String),
    #[error("the lift metric could not be evaluated on the ray at angle {0}")]
    Ray(f64),
}

/// The loop `|w| = radius` in the local coordinate, counterclockwise in `w`,
/// as points of the `z`-plane. Closed: the last point repeats the first.
pub fn loop_path(p: &Puncture, radius: f64, steps: usize) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = (0..steps)
        .map(|k| p.from_local(Complex64::from_polar(radius, 2.0 * PI * k as f64 / steps as f64)))
        .collect();
    pts.push(pts[0]);
    pts
}

/// Half the distance (in the local coordinate) to the nearest other puncture,
/// capped at 0.5.
pub fn default_radius(p: &Puncture, others: &[Puncture]) -> f64 {
    others
        .iter()
        .filter(|q| *q != p)
        .filter_map(|q| match q {
            Puncture::Finite(c) => {
                let w = p.to_local(*c);
                w.is_finite().then(|| w.norm() / 2.0)
            }
            Puncture::Infinity => None,
        })
        .fold(MAX_RADIUS, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopMonodromy {
    pub puncture: Puncture,
    pub radius: f64,
    pub steps: usize,
    /// `F(z0)^-1 F(tau z0)` as computed.
    pub raw: Mat2,
    /// `+-raw` with nonnegative real trace.
    pub normalized: Mat2,
    pub trace: Complex64,
    pub residual: Su11Membership,
    /// Whether the matrix came from a 320-bit evaluation of the closed lift.
    pub multiprecision: bool,
    pub class: Option<Su11Class>,
    /// Chordal distance between `g` before and after the loop.
    pub g_drift: f64,
    /// Relative change of the matrix when the step count is doubled.
    pub richardson: Option<f64>,
}

impl LoopMonodromy {
    /// The frame descends to the punctured disc up to the sign ambiguity.
    pub fn descends(&self) -> bool {
        self.residual.member
    }
}

fn hp_product(a: &[BigComplex; 4], b: &[BigComplex; 4]) -> [BigComplex; 4] {
    let m = |x: &BigComplex, y: &BigComplex, u: &BigComplex, v: &BigComplex| x.mul(y).add(&u.mul(v));
    [
        m(&a[0], &b[0], &a[1], &b[2]),
        m(&a[0], &b[1], &a[1], &b[3]),
        m(&a[2], &b[0], &a[3], &b[2]),
        m(&a[2], &b[1], &a[3], &b[3]),
    ]
}

/// `rho = adj(a) b` and its residuals, evaluated before rounding.
fn hp_monodromy(a: &[BigComplex; 4], b: &[BigComplex; 4]) -> (Mat2, Su11Membership) {
    let adj = [a[3].clone(), a[1].neg(), a[2].neg(), a[0].clone()];
    let r = hp_product(&adj, b);
    let one = BigComplex::from_c64(Complex64::new(1.0, 0.0));
    let sq = |x: &BigComplex| x.mul(&x.conj());
    // rho e3 rho* - e3
    let d11 = sq(&r[0]).sub(&sq(&r[1])).sub(&one).to_c64();
    let d12 = r[0].mul(&r[2].conj()).sub(&r[1].mul(&r[3].conj())).to_c64();
    let d22 = sq(&r[2]).sub(&sq(&r[3])).add(&one).to_c64();
    let det = r[0].mul(&r[3]).sub(&r[1].mul(&r[2])).sub(&one).to_c64();
    let form_residual = (d11.norm_sqr() + 2.0 * d12.norm_sqr() + d22.norm_sqr()).sqrt();
    let det_residual = det.norm();
    let m = Mat2::new(r[0].to_c64(), r[1].to_c64(), r[2].to_c64(), r[3].to_c64());
    (
        m,
        Su11Membership {
            member: form_residual < RESIDUAL_TOL && det_residual < RESIDUAL_TOL,
            form_residual,
            det_residual,
        },
    )
}

fn g_drift(face: &Face, path: &[Complex64]) -> Result<f64, FrameError> {
    let tape = face.g_tape();
    let start = tape.start(path[0])?;
    let v0 = tape.eval_at(&start)?;
    let (_, end) = tape.continue_path(&path[1..], &start)?;
    let v1 = tape.eval_at(&end)?;
    let ext = |v: &Value<Complex64>| match v {
        Value::Finite(c) => ExtComplex::Finite(*c),
        Value::Infinity => ExtComplex::Infinity,
    };
    Ok(ext(&v0[0]).chordal_distance(ext(&v1[0])))
}

fn raw_loop(face: &Face, path: &[Complex64]) -> Result<(Mat2, Option<(Mat2, Su11Membership)>), FrameError> {
    let s0 = face.start(path[0])?;
    let s1 = face.walk(&s0, &path[1..])?.pop().expect("nonempty loop");
    let raw = s0.frame.inverse().map_err(|_| FrameError::Pole(path[0]))? * s1.frame;
    let hp = match (face.frame_hp(&s0.bp), face.frame_hp(&s1.bp)) {
        (Some(Ok(a)), Some(Ok(b))) => Some(hp_monodromy(&a, &b)),
        _ => None,
    };
    Ok((raw, hp))
}

/// Continues the face once around the puncture.
pub fn loop_monodromy(face: &Face, p: &Puncture, radius: f64, steps: usize) -> Result<LoopMonodromy, MonodromyError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(MonodromyError::BadRadius(radius));
    }
    let steps = steps.max(8);
    let path = loop_path(p, radius, steps);
    let (raw64, hp) = raw_loop(face, &path)?;
    let (raw, residual, multiprecision) = match hp {
        Some((m, r)) => (m, r, true),
        None => {
            let r = su11_membership(&raw64, RESIDUAL_TOL);
            (raw64, r, false)
        }
    };
    let tr = raw.trace();
    let normalized = if tr.re < 0.0 { raw.scale(Complex64::new(-1.0, 0.0)) } else { raw };
    let richardson = raw_loop(face, &loop_path(p, radius, 2 * steps)).ok().map(|(m, hp)| {
        let m = hp.map(|x| x.0).unwrap_or(m);
        (m - raw).norm() / raw.norm().max(1.0)
    });
    Ok(LoopMonodromy {
        puncture: *p,
        radius,
        steps,
        raw,
        normalized,
        trace: tr,
        residual,
        multiprecision,
        class: classify(&normalized).ok(),
        g_drift: g_drift(face, &path)?,
        richardson,
    })
}

/// Leading data of a projective connection `p dz^2` with a regular singularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicialData {
    /// `lim w^2 p(w)`.
    pub alpha: Complex64,
    pub mu1: Complex64,
    pub mu2: Complex64,
    pub resonant: bool,
}

impl IndicialData {
    pub fn from_alpha(alpha: Complex64) -> IndicialData {
        let s = (Complex64::new(1.0, 0.0) - 2.0 * alpha).sqrt();
        let (a, b) = ((1.0 + s) / 2.0, (1.0 - s) / 2.0);
        let (mu1, mu2) = if a.re >= b.re { (a, b) } else { (b, a) };
        let d = mu1 - mu2;
        IndicialData {
            alpha,
            mu1,
            mu2,
            resonant: d.im.abs() < 1e-6 && (d.re - d.re.round()).abs() < 1e-6,
        }
    }

    /// `|mu1 - mu2|`.
    pub fn exponent_difference(&self) -> f64 {
        (self.mu1 - self.mu2).norm()
    }
}

/// Mean of a local expression over `|w| = r`; the value at `w = 0` of its
/// holomorphic part when it has no pole inside.
fn circle_mean(local: &Expr, r: f64) -> Option<Complex64> {
    let tape = Tape::new(std::slice::from_ref(local));
    let n = 256;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let w = Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / n as f64);
        acc += tape.eval_fresh(w).ok()?.0[0].c()?;
    }
    Some(acc / n as f64)
}

/// Radius for local expansions: well inside the loop.
fn probe_radius(loop_radius: f64) -> f64 {
    (loop_radius * 1e-2).min(1e-3)
}

fn vanishes(local: &Expr, r: f64) -> bool {
    (0..16).all(|j| {
        let w = Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.3) / 16.0);
        local.eval_c(w).map(|v| (v * w * w).norm() < 1e-12).unwrap_or(false)
    })
}

/// Indicial data of `p dz^2` at a puncture, with `alpha = lim w^2 p(w)`.
pub fn indicial_roots(q: &TwoDifferential, p: &Puncture) -> Result<IndicialData, MonodromyError> {
    indicial_roots_at(q, p, 1e-3)
}

fn indicial_roots_at(q: &TwoDifferential, p: &Puncture, r: f64) -> Result<IndicialData, MonodromyError> {
    let local = q.localize(p).coeff;
    if local.is_zero() || vanishes(&local, r) {
        return Ok(IndicialData::from_alpha(Complex64::new(0.0, 0.0)));
    }
    let ord = pole_order_of_two_differential(q, p).map_err(|e| MonodromyError::Local(e.to_string()))?;
    if ord.order < -2 {
        return Err(MonodromyError::Irregular(ord.order));
    }
    let w2 = &local * &Expr::z().powi(2);
    let alpha = circle_mean(&w2, r).ok_or_else(|| MonodromyError::Local("alpha".into()))?;
    Ok(IndicialData::from_alpha(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndType {
    EllipticIntegral,
    EllipticNonIntegral {
        mu_mod1: f64,
    },
    ParabolicFirstKind {
        epsilon: Option<i8>,
    },
    ParabolicSecondKind {
        epsilon: Option<i8>,
    },
    /// `mu` is `|Im mu|` for the exponent `w^mu` of a model end.
    Hyperbolic {
        mu: f64,
    },
}

impl EndType {
    pub fn family(&self) -> &'static str {
        match self {
            EndType::EllipticIntegral | EndType::EllipticNonIntegral { .. } => "elliptic",
            EndType::ParabolicFirstKind { .. } | EndType::ParabolicSecondKind { .. } => "parabolic",
            EndType::Hyperbolic { .. } => "hyperbolic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Accumulation {
    None,
    Sectors {
        m: u32,
        delta: f64,
        /// Half-width of the confidence band on `delta`.
        band: f64,
        /// RMS angular distance of traced points from the sector axes.
        rms: Option<f64>,
    },
    EveryRay,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndReport {
    pub puncture: Puncture,
    pub monodromy: LoopMonodromy,
    pub class: Option<Su11Class>,
    pub end_type: Option<EndType>,
    pub accumulation: Accumulation,
    pub g_regular: bool,
    pub indicial: Option<IndicialData>,
    pub ord_q: Option<i32>,
    pub ramification_m: Option<u32>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndOptions {
    pub radius: Option<f64>,
    pub steps: usize,
    /// Resolution of the local trace used to fit the sector direction.
    pub trace_resolution: usize,
}

impl Default for EndOptions {
    fn default() -> Self {
        EndOptions {
            radius: None,
            steps: DEFAULT_STEPS,
            trace_resolution: 96,
        }
    }
}

/// Order of `e` at the puncture together with its value there when finite.
fn local_value(e: &Expr, p: &Puncture, r: f64) -> Result<(i32, Option<Complex64>), MonodromyError> {
    let ord = pole_order_at(e, p).map_err(|err| MonodromyError::Local(err.to_string()))?;
    if ord.order != 0 {
        return Ok((ord.order, if ord.order > 0 { Some(Complex64::new(0.0, 0.0)) } else { None }));
    }
    Ok((0, circle_mean(&p.localize(e), r)))
}

/// Vanishing order of `e - e(p)` at the puncture (the local degree of `e`).
pub fn local_degree(e: &Expr, p: &Puncture, r: f64) -> Result<u32, MonodromyError> {
    let (ord, val) = local_value(e, p, r)?;
    if ord != 0 {
        return Ok(ord.unsigned_abs());
    }
    let v = val.ok_or_else(|| MonodromyError::Local("value at puncture".into()))?;
    let shifted = e - &Expr::constant(v);
    let o = pole_order_at(&shifted, p).map_err(|err| MonodromyError::Local(err.to_string()))?;
    if o.order <= 0 {
        return Err(MonodromyError::Local(format!("order {} after subtracting the value", o.order)));
    }
    Ok(o.order as u32)
}

/// `delta` minimising `sum sin^2(m (theta_i - delta))`, in `[0, pi/m)`, and
/// the RMS distance of the angles from the nearest axis.
pub fn fit_sector_delta(angles: &[f64], m: u32) -> Option<(f64, f64)> {
    if angles.is_empty() || m == 0 {
        return None;
    }
    let mf = m as f64;
    let s: Complex64 = angles.iter().map(|t| Complex64::from_polar(1.0, 2.0 * mf * t)).sum();
    if s.norm() < 1e-12 * angles.len() as f64 {
        return None;
    }
    let period = PI / mf;
    let delta = (s.arg() / (2.0 * mf)).rem_euclid(period);
    let set = crate::surface::SectorSet { m, eps: 0.0, delta };
    let rms = (angles.iter().map(|t| set.axis_distance(*t).powi(2)).sum::<f64>() / angles.len() as f64).sqrt();
    Some((delta, rms))
}

/// Angles (in the local coordinate) of singular points traced in a thin
/// annulus around the puncture.
fn local_singular_angles(face: &Face, p: &Puncture, radius: f64, n: usize) -> Vec<f64> {
    let (r0, r1) = (radius * 1e-4, radius * 1e-3);
    let window = match p {
        Puncture::Finite(c) => Window::annulus(*c, r0, r1),
        Puncture::Infinity => Window::annulus(Complex64::new(0.0, 0.0), 1.0 / r1, 1.0 / r0),
    };
    let opts = TraceOptions {
        sectors: None,
        cross_validate: false,
    };
    trace_singular_set(face, &window, n, &opts)
        .map(|curves| curves.iter().flat_map(|c| c.points.iter().map(|z| p.to_local(*z).arg()).collect::<Vec<_>>()).collect())
        .unwrap_or_default()
}

/// Sign of `|g| - 1` on a small circle: `Some(+1)` or `Some(-1)` when constant.
fn side_of_unit_circle(g: &Expr, p: &Puncture, r: f64) -> Option<i8> {
    let mut seen = (false, false);
    for j in 0..64 {
        let z = p.from_local(Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / 64.0));
        let a = match g.eval_principal(z).ok()? {
            Value::Finite(c) => c.norm(),
            Value::Infinity => f64::INFINITY,
        };
        if a > 1.0 {
            seen.0 = true;
        } else if a < 1.0 {
            seen.1 = true;
        }
    }
    match seen {
        (true, false) => Some(1),
        (false, true) => Some(-1),
        _ => None,
    }
}

/// Classifies the end of `face` at `p`; `others` are the remaining declared
/// punctures, used to choose the loop radius.
pub fn end_classify(face: &Face, p: &Puncture, others: &[Puncture], opts: &EndOptions) -> Result<EndReport, MonodromyError> {
    let radius = opts.radius.unwrap_or_else(|| default_radius(p, others));
    let mono = loop_monodromy(face, p, radius, opts.steps)?;
    let mut notes = Vec::new();
    if !mono.descends() {
        notes.push(format!(
            "monodromy residual {:.3e} exceeds {RESIDUAL_TOL:e}: the data does not descend",
            mono.residual.form_residual
        ));
    }
    let r = probe_radius(radius);
    let sg = schwarzian(&face.g).map_err(|e| MonodromyError::Local(e.to_string()))?;
    let indicial = match indicial_roots_at(&sg, p, r) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(format!("S(g): {e}"));
            None
        }
    };
    let g_regular = indicial.is_some();
    let ord_q = if face.hopf.coeff.is_zero() {
        None
    } else {
        pole_order_of_two_differential(&face.hopf, p).ok().map(|o| o.order)
    };
    let ramification_m = face.big_g.as_ref().and_then(|bg| local_degree(bg, p, r).ok());

    let class = mono.class;
    let integral = mono.g_drift < G_DRIFT_TOL;
    let end_type = class.map(|c| match c {
        Su11Class::Elliptic { s } => {
            if integral {
                EndType::EllipticIntegral
            } else {
                EndType::EllipticNonIntegral {
                    mu_mod1: (-s / PI).rem_euclid(1.0),
                }
            }
        }
        Su11Class::Parabolic { .. } => {
            // first kind iff S(g) - dz^2/(2z^2) has at most a simple pole,
            // i.e. alpha = 1/2 for a regular singularity
            let first = indicial.map(|d| (d.alpha - 0.5).norm() < 1e-6).unwrap_or(false);
            if first {
                EndType::ParabolicFirstKind {
                    epsilon: side_of_unit_circle(&face.g, p, r),
                }
            } else {
                EndType::ParabolicSecondKind { epsilon: None }
            }
        }
        Su11Class::Hyperbolic { t, .. } => EndType::Hyperbolic { mu: t / PI },
    });

    let sectors = |m: u32| {
        let angles = local_singular_angles(face, p, radius, opts.trace_resolution);
        match fit_sector_delta(&angles, m) {
            Some((delta, rms)) => Accumulation::Sectors {
                m,
                delta,
                band: DELTA_BAND,
                rms: Some(rms),
            },
            None => Accumulation::Undetermined,
        }
    };
    let accumulation = if !g_regular {
        Accumulation::Undetermined
    } else {
        match end_type {
            None => Accumulation::Undetermined,
            Some(EndType::EllipticNonIntegral { .. }) | Some(EndType::ParabolicFirstKind { .. }) => Accumulation::None,
            Some(EndType::Hyperbolic { .. }) => Accumulation::EveryRay,
            Some(EndType::EllipticIntegral) => match local_value(&face.g, p, r) {
                Ok((0, Some(g0))) if (g0.norm() - 1.0).abs() < 1e-6 => {
                    let ratio = &(&face.g / &Expr::constant(g0)) - &Expr::real(1.0);
                    match pole_order_at(&ratio, p) {
                        Ok(o) if o.order > 0 => sectors(o.order as u32),
                        _ => Accumulation::Undetermined,
                    }
                }
                Ok(_) => Accumulation::None,
                Err(e) => {
                    notes.push(format!("g at the puncture: {e}"));
                    Accumulation::Undetermined
                }
            },
            Some(EndType::ParabolicSecondKind { .. }) => {
                let m = indicial.map(|d| d.exponent_difference().round() as u32).unwrap_or(0);
                if m >= 1 {
                    sectors(m)
                } else {
                    Accumulation::Undetermined
                }
            }
        }
    };
    Ok(EndReport {
        puncture: *p,
        class,
        monodromy: mono,
        end_type,
        accumulation,
        g_regular,
        indicial,
        ord_q,
        ramification_m,
        notes,
    })
}

/// Classifies every declared puncture concurrently.
pub fn classify_all(face: &Face, punctures: &[Puncture], opts: &EndOptions) -> Vec<Result<EndReport, MonodromyError>> {
    punctures.par_iter().map(|p| end_classify(face, p, punctures, opts)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayProbe {
    pub theta: f64,
    /// Length of each dyadic shell, outermost first.
    pub shells: Vec<f64>,
    pub length: f64,
    /// Geometric mean of the last shell-to-shell ratios.
    pub ratio: f64,
    /// Estimated full length toward the puncture (infinite when shells do not shrink).
    pub extrapolated: f64,
    pub diverging: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletenessVerdict {
    /// Lift metric diverges and the singular set stays away from the end.
    Complete,
    /// Lift metric diverges but the singular set accumulates.
    WeaklyComplete,
    Incomplete,
    CompleteByDefinition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub puncture: Option<Puncture>,
    pub rays: Vec<RayProbe>,
    /// The singular set does not accumulate at the end.
    pub singular_compact: Option<bool>,
    pub verdict: CompletenessVerdict,
    /// Finite probes of asymptotic properties: always a heuristic.
    pub heuristic: bool,
}

impl CompletenessReport {
    pub fn by_definition() -> CompletenessReport {
        CompletenessReport {
            puncture: None,
            rays: Vec::new(),
            singular_compact: Some(true),
            verdict: CompletenessVerdict::CompleteByDefinition,
            heuristic: false,
        }
    }
}

const SHELLS: usize = 30;
const SHELL_POINTS: usize = 16;

/// `ds_#^2 / |dz|^2 = (1 + |G|^2)^2 |Q / G'|^2` along `zs` in multiprecision,
/// continuing branches from the principal ones at `zs[0]`. Closed forms such
/// as `a/z - log(1 + 1/z)` cancel in double precision far out on a ray.
fn lift_metric_hp(face: &Face, zs: &[Complex64]) -> Option<Vec<f64>> {
    let big_g = face.big_g.as_ref()?;
    let tape = Tape::new(&[big_g.clone(), big_g.diff(), face.hopf.coeff.clone()]);
    let mut hint: Option<Vec<Complex64>> = None;
    let mut prev = zs[0];
    let mut out = Vec::with_capacity(zs.len());
    for &z in zs {
        // bisect in double precision only to carry the branch hints across
        let logs = hint.as_ref().map(|h| {
            let from = BranchPoint { z: prev, logs: h.clone() };
            tape.step(&from, z).map(|(_, bp)| bp.logs).unwrap_or_else(|_| h.clone())
        });
        let (v, l) = tape.eval_generic(&BigComplex::from_c64(z), logs.as_deref()).ok()?;
        let f = |k: usize| v[k].finite().map(|x| x.to_c64());
        let (g, dg, q) = (f(0)?, f(1)?, f(2)?);
        out.push((1.0 + g.norm_sqr()).powi(2) * (q / dg).norm_sqr());
        hint = Some(l);
        prev = z;
    }
    Some(out)
}

fn probe_ray(face: &Face, p: &Puncture, radius: f64, theta: f64) -> Result<RayProbe, MonodromyError> {
    // sample s = ln(r/radius) on [-(k+1) ln2, -k ln2] per shell, Simpson rule
    let h = std::f64::consts::LN_2 / SHELL_POINTS as f64;
    let n = SHELLS * SHELL_POINTS;
    let ws: Vec<Complex64> = (0..=n).map(|k| Complex64::from_polar(radius * (-(k as f64) * h).exp(), theta)).collect();
    let zs: Vec<Complex64> = ws.iter().map(|w| p.from_local(*w)).collect();
    let err = || MonodromyError::Ray(theta);
    let lift2 = match lift_metric_hp(face, &zs) {
        Some(v) => v,
        None => {
            let s0 = face.start(zs[0]).map_err(|_| err())?;
            let mut states = vec![s0.clone()];
            states.extend(face.walk(&s0, &zs[1..]).map_err(|_| err())?);
            states
                .iter()
                .map(|st| face.point(st).map(|pt| metrics_at(&pt).ds_lift2).map_err(|_| err()))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let integrand: Vec<f64> = lift2
        .iter()
        .zip(&ws)
        .map(|(l2, w)| {
            let lam = l2.sqrt();
            // |dz| = r ds in a finite chart, |dz| = ds / r at infinity
            let r = w.norm();
            let jac = match p {
                Puncture::Finite(_) => r,
                Puncture::Infinity => 1.0 / r,
            };
            let v = lam * jac;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err())
            }
        })
        .collect::<Result<_, _>>()?;
    let shells: Vec<f64> = (0..SHELLS)
        .map(|k| {
            let f = &integrand[k * SHELL_POINTS..=(k + 1) * SHELL_POINTS];
            let inner: f64 = (1..SHELL_POINTS).map(|i| if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] }).sum();
            h / 3.0 * (f[0] + inner + f[SHELL_POINTS])
        })
        .collect();
    let length: f64 = shells.iter().sum();
    let tail = &shells[SHELLS - 11..];
    let ratio = if tail.iter().all(|x| *x > 0.0) {
        (tail.windows(2).map(|w| (w[1] / w[0]).ln()).sum::<f64>() / 10.0).exp()
    } else {
        0.0
    };
    let last = shells[SHELLS - 1];
    let extrapolated = if ratio >= 1.0 {
        f64::INFINITY
    } else {
        length + last * ratio / (1.0 - ratio)
    };
    Ok(RayProbe {
        theta,
        shells,
        length,
        ratio,
        extrapolated,
        diverging: extrapolated > DIVERGENCE_THRESHOLD,
    })
}

/// Whether `|g| - 1` changes sign inside every one of the innermost dyadic
/// shells around the puncture.
pub fn singular_set_accumulates(g: &Expr, p: &Puncture, radius: f64) -> bool {
    let shells = 14;
    let hits: Vec<bool> = (0..shells)
        .map(|k| {
            let mut seen = (false, false);
            for i in 0..8 {
                let r = radius * 0.5f64.powf(k as f64 + i as f64 / 8.0);
                for j in 0..64 {
                    let z = p.from_local(Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.25) / 64.0));
                    let a = match g.eval_principal(z) {
                        Ok(Value::Finite(c)) => c.norm(),
                        Ok(Value::Infinity) => f64::INFINITY,
                        Err(_) => continue,
                    };
                    if a > 1.0 {
                        seen.0 = true;
                    } else if a < 1.0 {
                        seen.1 = true;
                    }
                }
            }
            seen.0 && seen.1
        })
        .collect();
    hits[shells - 6..].iter().all(|h| *h)
}

/// Lengths of the lift metric along `rays` rays toward the puncture and the
/// compactness of the singular set near it.
pub fn completeness_probe(face: &Face, p: &Puncture, others: &[Puncture], rays: usize, radius: Option<f64>) -> Result<CompletenessReport, MonodromyError> {
    let radius = radius.unwrap_or_else(|| default_radius(p, others));
    let rays = rays.max(1);
    let probes = (0..rays)
        .into_par_iter()
        .map(|k| probe_ray(face, p, radius, 2.0 * PI * (k as f64 + 0.125) / rays as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let compact = !singular_set_accumulates(&face.g, p, radius);
    let verdict = if !probes.iter().all(|r| r.diverging) {
        CompletenessVerdict::Incomplete
    } else if compact {
        CompletenessVerdict::Complete
    } else {
        CompletenessVerdict::WeaklyComplete
    };
    Ok(CompletenessReport {
        puncture: Some(*p),
        rays: probes,
        singular_compact: Some(compact),
        verdict,
        heuristic: true,
    })
}

/// Checks `rho e3 rho* = e3` for a product of loop matrices, e.g. to verify a
/// relation between punctures.
pub fn product_residual(ms: &[Mat2]) -> f64 {
    let p = ms.iter().fold(Mat2::identity(), |acc, m| acc * *m);
    (p.congruence(&e3()) - e3()).norm()
}
