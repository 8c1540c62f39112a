//! Built-in examples and the checks each one is expected to pass.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{pole_order_of_two_differential, schwarzian, Poly, Puncture, Tape};
use crate::face::Face;
use crate::monodromy::{completeness_probe, end_classify, singular_set_accumulates, Accumulation, CompletenessVerdict, EndOptions, EndReport, EndType};
use crate::osserman::{end_winding, global_report, local_order_check, winding_number, Verdict};
use crate::spec::{Domain, Flags, PunctureSpec, SpecData, SpecError, SurfaceSpec};
use crate::surface::{gauss_maps_at, metrics_at, project_to_s31, ray_crossings, trace_singular_set, Annotation, SectorSet, TraceOptions, Window};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Stated with the published example.
    Source,
    /// Computed by an independent oracle (closed form or direct evaluation).
    Oracle,
    /// Arithmetic or definitional.
    Elementary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    EllipticIntegral,
    EllipticNonIntegral,
    ParabolicFirstKind,
    ParabolicSecondKind,
    Hyperbolic,
}

impl EndKind {
    fn matches(&self, t: &EndType) -> bool {
        matches!(
            (self, t),
            (EndKind::EllipticIntegral, EndType::EllipticIntegral)
                | (EndKind::EllipticNonIntegral, EndType::EllipticNonIntegral { .. })
                | (EndKind::ParabolicFirstKind, EndType::ParabolicFirstKind { .. })
                | (EndKind::ParabolicSecondKind, EndType::ParabolicSecondKind { .. })
                | (EndKind::Hyperbolic, EndType::Hyperbolic { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectedAccumulation {
    None,
    Sectors { m: u32, delta: Option<f64> },
    EveryRay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedEnd {
    /// Index into the spec's punctures.
    pub puncture: usize,
    pub kind: EndKind,
    pub accumulation: Option<ExpectedAccumulation>,
    /// Real trace of the representative with nonnegative trace.
    pub trace: Option<f64>,
    pub basis: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOsserman {
    pub lhs: i64,
    pub rhs: i64,
    pub verdict: Verdict,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularDescriptor {
    /// `|g| = 1` identically.
    Degenerate,
    /// One closed curve `|z - center| = r` in `window`.
    Circle { window: Window, center: Complex64, r: f64, tol: f64 },
    /// Crossings of the ray at angle `theta` with `r0 <= r < r1`.
    RayCrossings {
        theta: f64,
        r0: f64,
        r1: f64,
        radii: Vec<f64>,
        tol: f64,
    },
    /// `theta + mu log r = 0 (mod pi)`: crossing radii on several rays.
    LogSpiral { mu: f64, thetas: Vec<f64>, r0: f64, r1: f64, tol: f64 },
    /// For `g = 1 - z^m`: traced points satisfy `| |z|^2m - 2 Re z^m | < tol`
    /// and lie in `sector` within `r_max` of the origin.
    PowerLevelSet {
        m: u32,
        window: Window,
        tol: f64,
        sector: SectorSet,
        r_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCompleteness {
    pub puncture: Option<usize>,
    /// Every probed ray has divergent lift-metric length.
    pub diverging: Option<bool>,
    pub verdict: Option<CompletenessVerdict>,
    pub basis: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedWinding {
    pub puncture: usize,
    /// Absolute winding number.
    pub winding: u32,
    pub local: Option<Verdict>,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Expected {
    pub ends: Vec<ExpectedEnd>,
    pub osserman: Option<ExpectedOsserman>,
    pub singular: Vec<SingularDescriptor>,
    pub completeness: Vec<ExpectedCompleteness>,
    pub windings: Vec<ExpectedWinding>,
    /// The frame is `((z + 1/2, -z + 1/2), (-1, 1))` with `f = ((2 Re z, -1), (-1, 0))`.
    pub lightlike_line: bool,
    /// `Q = 0` and `d sigma^2 = 0`.
    pub umbilic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub spec: SurfaceSpec,
    pub expected: Expected,
    pub description: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalleryError {
    #[error("unknown gallery entry {0:?}")]
    Unknown(String),
    #[error("deformation parameter must be >= 0 (got {0}); use time reversal for negative exponents")]
    NegativeMu(f64),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

fn zero() -> PunctureSpec {
    PunctureSpec(Puncture::Finite(Complex64::new(0.0, 0.0)))
}

fn inf() -> PunctureSpec {
    PunctureSpec(Puncture::Infinity)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn annulus(r0: f64, r1: f64, n: [usize; 2]) -> Domain {
    Domain {
        window: Window::annulus(c(0.0, 0.0), r0, r1),
        resolution: n,
    }
}

fn rect(min: Complex64, max: Complex64, n: [usize; 2]) -> Domain {
    Domain {
        window: Window::Rect { min, max },
        resolution: n,
    }
}

fn pair_spec(name: &str, big_g: &str, g: &str, punctures: Vec<PunctureSpec>, complete: Option<bool>, domain: Domain) -> SurfaceSpec {
    SurfaceSpec {
        name: name.into(),
        data: SpecData::GaussPair {
            big_g: big_g.into(),
            g: g.into(),
        },
        punctures,
        genus: 0,
        flags: Flags { complete, horosphere: false },
        domain,
        singular_points: vec![],
    }
}

/// The 2-noid frame with both `sqrt z` and `log z`.
pub fn parabolic_catenoid_spec() -> SurfaceSpec {
    let k = "(0.3535533905932738i)";
    let f = [
        [format!("{k}*sqrt(z)*(3 - log(z))"), format!("{k}*sqrt(z)*(-1 + log(z))")],
        [format!("{k}/sqrt(z)*(1 + log(z))"), format!("{k}/sqrt(z)*(-3 - log(z))")],
    ];
    SurfaceSpec {
        name: "parabolic-catenoid".into(),
        data: SpecData::Frame { f },
        punctures: vec![zero(), inf()],
        genus: 0,
        flags: Flags {
            complete: Some(true),
            horosphere: false,
        },
        domain: annulus(0.3, 0.9, [64, 64]),
        singular_points: vec![],
    }
}

fn elliptic_catenoid_spec(mu: f64) -> SurfaceSpec {
    pair_spec(
        &format!("elliptic-catenoid-{mu}"),
        "z",
        &format!("z^{mu}"),
        vec![zero(), inf()],
        Some(true),
        annulus(0.2, 2.0, [48, 96]),
    )
}

/// `mu > 0`: the elliptic catenoid `G = z, g = z^mu`; `mu = 0`: the parabolic catenoid.
pub fn catenoid_deformation(mu: f64) -> Result<SurfaceSpec, GalleryError> {
    if !(mu >= 0.0) {
        return Err(GalleryError::NegativeMu(mu));
    }
    Ok(if mu == 0.0 { parabolic_catenoid_spec() } else { elliptic_catenoid_spec(mu) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationSample {
    pub r: f64,
    /// Coefficient of `|dz|^2` in `d sigma_mu^2` at `z = r`, from the face.
    pub dsigma2: f64,
    /// `1 / (r log r)^2`.
    pub limit: f64,
}

pub fn deformation_samples(mu: f64, radii: &[f64]) -> Result<Vec<DeformationSample>, GalleryError> {
    let face = catenoid_deformation(mu)?.face()?;
    radii
        .iter()
        .map(|&r| {
            let p = face.at(c(r, 0.0)).map_err(SpecError::from)?;
            Ok(DeformationSample {
                r,
                dsigma2: metrics_at(&p).dsigma2,
                limit: 1.0 / (r * r.ln()).powi(2),
            })
        })
        .collect()
}

/// The finite ends of the 4-noid: roots of `1 + 6 z^2 - z^3`.
pub fn four_noid_ends() -> Vec<Complex64> {
    let mut r = Poly(vec![c(1.0, 0.0), c(0.0, 0.0), c(6.0, 0.0), c(-1.0, 0.0)]).roots();
    r.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    r
}

fn end(p: usize, kind: EndKind, acc: Option<ExpectedAccumulation>, basis: Basis) -> ExpectedEnd {
    ExpectedEnd {
        puncture: p,
        kind,
        accumulation: acc,
        trace: None,
        basis,
    }
}

fn osserman(lhs: i64, rhs: i64, verdict: Verdict, basis: Basis) -> Option<ExpectedOsserman> {
    Some(ExpectedOsserman { lhs, rhs, verdict, basis })
}

const THREE_NOID_H: &str = "((2*z - 1)/(2*z*(z - 1)) - log(z/(z - 1)))";

/// Every built-in entry.
pub fn gallery() -> Vec<GalleryEntry> {
    let mut out = Vec::new();

    out.push(GalleryEntry {
        spec: SurfaceSpec {
            name: "lightlike-line".into(),
            data: SpecData::Frame {
                f: [["z + 0.5".into(), "-z + 0.5".into()], ["-1".into(), "1".into()]],
            },
            punctures: vec![],
            genus: 0,
            flags: Flags {
                complete: Some(false),
                horosphere: false,
            },
            domain: rect(c(-1.0, -1.0), c(1.0, 1.0), [16, 16]),
            singular_points: vec![],
        },
        expected: Expected {
            singular: vec![SingularDescriptor::Degenerate],
            lightlike_line: true,
            ..Default::default()
        },
        description: "degenerate null immersion whose image is a lightlike line".into(),
    });

    out.push(GalleryEntry {
        spec: SurfaceSpec {
            name: "horosphere".into(),
            data: SpecData::Weierstrass {
                g: "0".into(),
                omega: "1".into(),
                base: [0.0, 0.0],
                base_frame: None,
            },
            punctures: vec![],
            genus: 0,
            flags: Flags {
                complete: Some(true),
                horosphere: true,
            },
            domain: rect(c(-1.0, -1.0), c(1.0, 1.0), [32, 32]),
            singular_points: vec![],
        },
        expected: Expected {
            completeness: vec![ExpectedCompleteness {
                puncture: None,
                diverging: None,
                verdict: Some(CompletenessVerdict::CompleteByDefinition),
                basis: Basis::Source,
            }],
            umbilic: true,
            ..Default::default()
        },
        description: "totally umbilic horosphere, g = 0 and omega = dz".into(),
    });

    for mu in [0.3, 0.5] {
        let trace = 2.0 * (PI * mu).cos();
        let mut e0 = end(0, EndKind::EllipticNonIntegral, Some(ExpectedAccumulation::None), Basis::Oracle);
        e0.trace = Some(trace);
        let mut e1 = end(1, EndKind::EllipticNonIntegral, Some(ExpectedAccumulation::None), Basis::Oracle);
        e1.trace = Some(trace);
        out.push(GalleryEntry {
            spec: elliptic_catenoid_spec(mu),
            expected: Expected {
                ends: vec![e0, e1],
                osserman: osserman(2, 2, Verdict::Equality, Basis::Elementary),
                windings: vec![ExpectedWinding {
                    puncture: 0,
                    winding: 1,
                    local: Some(Verdict::Equality),
                    basis: Basis::Oracle,
                }],
                ..Default::default()
            },
            description: format!("elliptic catenoid G = z, g = z^{mu}"),
        });
    }

    out.push(GalleryEntry {
        spec: parabolic_catenoid_spec(),
        expected: Expected {
            ends: vec![
                end(0, EndKind::ParabolicFirstKind, Some(ExpectedAccumulation::None), Basis::Source),
                end(1, EndKind::ParabolicFirstKind, Some(ExpectedAccumulation::None), Basis::Source),
            ],
            osserman: osserman(2, 2, Verdict::Equality, Basis::Source),
            singular: vec![SingularDescriptor::Circle {
                window: Window::annulus(c(0.0, 0.0), 0.5, 2.0),
                center: c(0.0, 0.0),
                r: 1.0,
                tol: 1e-6,
            }],
            completeness: vec![
                ExpectedCompleteness {
                    puncture: Some(0),
                    diverging: Some(true),
                    verdict: Some(CompletenessVerdict::Complete),
                    basis: Basis::Source,
                },
                ExpectedCompleteness {
                    puncture: Some(1),
                    diverging: Some(true),
                    verdict: Some(CompletenessVerdict::Complete),
                    basis: Basis::Source,
                },
            ],
            windings: vec![
                ExpectedWinding {
                    puncture: 0,
                    winding: 1,
                    local: Some(Verdict::Equality),
                    basis: Basis::Source,
                },
                ExpectedWinding {
                    puncture: 1,
                    winding: 1,
                    local: Some(Verdict::Equality),
                    basis: Basis::Source,
                },
            ],
            ..Default::default()
        },
        description: "2-noid with complete parabolic ends, given by its explicit frame".into(),
    });

    out.push(GalleryEntry {
        spec: pair_spec("integral-elliptic-m3", "z", "1 - z^3", vec![zero(), inf()], Some(false), annulus(0.05, 1.5, [48, 96])),
        expected: Expected {
            ends: vec![
                end(
                    0,
                    EndKind::EllipticIntegral,
                    Some(ExpectedAccumulation::Sectors {
                        m: 3,
                        delta: Some(PI / 6.0),
                    }),
                    Basis::Source,
                ),
                end(1, EndKind::EllipticIntegral, Some(ExpectedAccumulation::None), Basis::Source),
            ],
            singular: vec![SingularDescriptor::PowerLevelSet {
                m: 3,
                window: Window::annulus(c(0.0, 0.0), 0.02, 1.5),
                tol: 1e-6,
                sector: SectorSet {
                    m: 3,
                    eps: 0.2,
                    delta: PI / 6.0,
                },
                r_max: 0.3,
            }],
            ..Default::default()
        },
        description: "g = 1 - z^3, G = z: integral elliptic ends at 0 and infinity".into(),
    });

    let rays = |radii: Vec<f64>| SingularDescriptor::RayCrossings {
        theta: 0.0,
        r0: (-PI / 2.0).exp(),
        r1: 1.0,
        radii,
        tol: 1e-4,
    };
    let circle_radii: Vec<f64> = (1..=5).map(|n| (-(n as f64) * PI / 10.0).exp()).collect();
    out.push(GalleryEntry {
        spec: pair_spec(
            "hyperbolic-w10i",
            "z",
            "(z^(10i) - i)/(z^(10i) + i)",
            vec![zero(), inf()],
            Some(false),
            rect(c(0.2, -0.25), c(1.0, 0.25), [32, 32]),
        ),
        expected: Expected {
            ends: vec![end(0, EndKind::Hyperbolic, Some(ExpectedAccumulation::EveryRay), Basis::Source)],
            singular: vec![rays(circle_radii.clone())],
            ..Default::default()
        },
        description: "hyperbolic end g = R^-1 * w^(10i); singular set is a family of circles".into(),
    });
    out.push(GalleryEntry {
        spec: pair_spec(
            "hyperbolic-w1+10i",
            "z",
            "(z^(1+10i) - i)/(z^(1+10i) + i)",
            vec![zero(), inf()],
            Some(false),
            rect(c(0.2, -0.25), c(1.0, 0.25), [32, 32]),
        ),
        expected: Expected {
            ends: vec![end(0, EndKind::Hyperbolic, Some(ExpectedAccumulation::EveryRay), Basis::Source)],
            singular: vec![SingularDescriptor::LogSpiral {
                mu: 10.0,
                thetas: vec![0.0, 0.5, -1.0],
                r0: (-PI / 2.0).exp(),
                r1: 1.0,
                tol: 1e-4,
            }],
            ..Default::default()
        },
        description: "hyperbolic end g = R^-1 * w^(1+10i); singular set is a log-spiral".into(),
    });

    let h = THREE_NOID_H;
    out.push(GalleryEntry {
        spec: SurfaceSpec {
            singular_points: vec![],
            ..pair_spec(
                "3-noid",
                "z",
                &format!("({h} + 1)/({h} - 1)"),
                vec![zero(), PunctureSpec(Puncture::Finite(c(1.0, 0.0))), inf()],
                Some(false),
                Domain {
                    window: Window::annulus(c(0.5, 0.0), 0.7, 2.0),
                    resolution: [32, 96],
                },
            )
        },
        expected: Expected {
            ends: vec![
                end(0, EndKind::ParabolicSecondKind, None, Basis::Source),
                end(1, EndKind::ParabolicSecondKind, None, Basis::Source),
                // h ~ w^3 / 6 at infinity, so |g| = 1 along Re w^3 = 0
                end(
                    2,
                    EndKind::EllipticIntegral,
                    Some(ExpectedAccumulation::Sectors {
                        m: 3,
                        delta: Some(PI / 6.0),
                    }),
                    Basis::Oracle,
                ),
            ],
            osserman: osserman(2, 4, Verdict::Violated, Basis::Source),
            completeness: (0..3)
                .map(|p| ExpectedCompleteness {
                    puncture: Some(p),
                    diverging: Some(true),
                    verdict: None,
                    basis: Basis::Source,
                })
                .collect(),
            ..Default::default()
        },
        description: "incomplete 3-noid, G = z and g the Cayley transform of the published map".into(),
    });

    let mut ps: Vec<PunctureSpec> = four_noid_ends().into_iter().map(|z| PunctureSpec(Puncture::Finite(z))).collect();
    ps.push(inf());
    out.push(GalleryEntry {
        spec: SurfaceSpec {
            singular_points: vec![[0.0, 0.0], [4.0, 0.0]],
            ..pair_spec(
                "4noid",
                "3*(z^3 + 2)/(4 - z)",
                "-(z^3 - 12*z^2 + 2)/(3*z)",
                ps,
                Some(true),
                annulus(0.6, 3.5, [32, 96]),
            )
        },
        expected: Expected {
            ends: (0..4).map(|p| end(p, EndKind::EllipticIntegral, None, Basis::Source)).collect(),
            osserman: osserman(6, 6, Verdict::Equality, Basis::Source),
            ..Default::default()
        },
        description: "complete 4-noid with four integral elliptic ends".into(),
    });
    out
}

pub fn names() -> Vec<String> {
    gallery().into_iter().map(|e| e.spec.name).collect()
}

pub fn entry(name: &str) -> Result<GalleryEntry, GalleryError> {
    gallery()
        .into_iter()
        .find(|e| e.spec.name == name)
        .ok_or_else(|| GalleryError::Unknown(name.into()))
}

/// Outcome of one comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub entry: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub steps: usize,
    pub seed: u64,
    pub points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            steps: crate::monodromy::DEFAULT_STEPS,
            seed: 1,
            points: 50,
        }
    }
}

/// Uniform random points of a window.
pub fn random_points(w: &Window, n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| match *w {
            Window::Annulus {
                center, r_min, r_max, ..
            } => center + Complex64::from_polar(rng.gen_range(r_min..r_max), rng.gen_range(-PI..PI)),
            Window::Rect { min, max } => c(rng.gen_range(min.re..max.re), rng.gen_range(min.im..max.im)),
        })
        .collect()
}

struct Checks {
    entry: String,
    out: Vec<Check>,
}

impl Checks {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.out.push(Check {
            entry: self.entry.clone(),
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

/// Largest `|pi(L) - G|` over regular random points, together with boundary
/// agreement; `None` when the sample has no regular point.
pub fn gauss_coherence(face: &Face, w: &Window, n: usize, seed: u64) -> Result<Option<(f64, bool, usize)>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut sides = true;
    let mut used = 0;
    for z in random_points(w, 20 * n, &mut rng) {
        if used == n {
            break;
        }
        let p = face.at(z).map_err(|e| format!("{z}: {e}"))?;
        if (p.g.norm() - 1.0).abs() < 1e-3 || !p.big_g.is_finite() {
            continue;
        }
        let m = gauss_maps_at(&p).map_err(|e| format!("{z}: {e}"))?;
        let Some(l) = m.light_cone.and_then(|l| l.finite()) else {
            return Err(format!("{z}: light-cone image at infinity"));
        };
        // relative to the size of G for large values
        worst = worst.max((l - p.big_g).norm() / p.big_g.norm().max(1.0));
        let expect = if p.g.norm() > 1.0 {
            crate::surface::Boundary::Future
        } else {
            crate::surface::Boundary::Past
        };
        sides &= m.boundary == Some(expect);
        used += 1;
    }
    Ok((used > 0).then_some((worst, sides, used)))
}

/// Largest relative error of `d sigma^2 ds^2 = 4 |Q|^2` over random points.
pub fn metric_identity_error(face: &Face, w: &Window, n: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for z in random_points(w, n, &mut rng) {
        let p = face.at(z).map_err(|e| format!("{z}: {e}"))?;
        if (p.g.norm() - 1.0).abs() < 1e-6 {
            continue;
        }
        let m = metrics_at(&p);
        let q = 4.0 * m.q.norm_sqr();
        worst = worst.max((m.dsigma2 * m.ds2 - q).abs() / q.max(1e-300).max(m.dsigma2 * m.ds2));
        if q == 0.0 && m.dsigma2 * m.ds2 == 0.0 {
            continue;
        }
    }
    Ok(worst)
}

/// Largest relative error of `S(g) - S(G) = 2Q` over random points.
pub fn schwarzian_identity_error(face: &Face, w: &Window, n: usize, seed: u64) -> Result<f64, String> {
    let big_g = face.big_g.as_ref().ok_or("no symbolic G")?;
    let sg = schwarzian(&face.g).map_err(|e| e.to_string())?;
    let sbig = schwarzian(big_g).map_err(|e| e.to_string())?;
    let tape = Tape::new(&[sg.coeff, sbig.coeff, face.hopf.coeff.clone()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for z in random_points(w, n, &mut rng) {
        let v = tape.eval_fresh(z).map_err(|e| format!("{z}: {e}"))?.0;
        let get = |k: usize| v[k].c().ok_or(format!("{z}: pole"));
        let (a, b, q) = (get(0)?, get(1)?, get(2)?);
        let scale = a.norm().max(b.norm()).max(2.0 * q.norm()).max(1e-300);
        worst = worst.max((a - b - 2.0 * q).norm() / scale);
    }
    Ok(worst)
}

fn check_end(ch: &mut Checks, exp: &ExpectedEnd, rep: &EndReport) {
    let label = format!("end {} ({})", exp.puncture, rep.puncture);
    match rep.end_type {
        Some(t) => ch.push(format!("{label}: type"), exp.kind.matches(&t), format!("{t:?}, expected {:?}", exp.kind)),
        None => ch.push(format!("{label}: type"), false, format!("unclassified: {:?}", rep.notes)),
    }
    if let Some(tr) = exp.trace {
        let got = rep.monodromy.normalized.trace();
        ch.push(format!("{label}: trace"), (got - tr).norm() < 1e-6, format!("{got} vs {tr}"));
    }
    if let Some(acc) = exp.accumulation {
        let ok = match (acc, rep.accumulation) {
            (ExpectedAccumulation::None, Accumulation::None) => true,
            (ExpectedAccumulation::EveryRay, Accumulation::EveryRay) => true,
            (ExpectedAccumulation::Sectors { m, delta }, Accumulation::Sectors { m: gm, delta: gd, band, .. }) => {
                let period = PI / m as f64;
                m == gm
                    && delta.map_or(true, |d| {
                        let x = (gd - d).rem_euclid(period);
                        x.min(period - x) <= band
                    })
            }
            _ => false,
        };
        ch.push(format!("{label}: accumulation"), ok, format!("{:?}", rep.accumulation));
    }
}

fn check_singular(ch: &mut Checks, face: &Face, d: &SingularDescriptor, spec: &SurfaceSpec) {
    match d {
        SingularDescriptor::Degenerate => {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let worst = random_points(&spec.domain.window, 20, &mut rng)
                .into_iter()
                .map(|z| face.at(z).map(|p| (p.g.norm() - 1.0).abs()).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            ch.push("singular: |g| = 1 everywhere", worst < 1e-12, format!("max ||g| - 1| = {worst:.2e}"));
        }
        SingularDescriptor::Circle { window, center, r, tol } => match trace_singular_set(face, window, 64, &TraceOptions::default()) {
            Ok(curves) => {
                let ok = curves.len() == 1
                    && curves[0].closed
                    && curves[0].points.iter().all(|z| ((z - center).norm() - r).abs() < *tol);
                let ann = curves.first().map(|c| c.annotation);
                let circle = matches!(ann, Some(Annotation::Circle { .. }));
                ch.push("singular: one circle", ok && circle, format!("{} curves, {:?}", curves.len(), ann));
            }
            Err(e) => ch.push("singular: one circle", false, e.to_string()),
        },
        SingularDescriptor::RayCrossings { theta, r0, r1, radii, tol } => {
            let got = ray_crossings(face, c(0.0, 0.0), *theta, *r0, *r1, 400);
            let mut want = radii.clone();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ok = got.len() == want.len() && got.iter().zip(&want).all(|(a, b)| (a - b).abs() < *tol);
            ch.push("singular: ray crossings", ok, format!("{got:?}"));
        }
        SingularDescriptor::LogSpiral { mu, thetas, r0, r1, tol } => {
            let mut ok = true;
            let mut detail = String::new();
            for &t in thetas {
                let got = ray_crossings(face, c(0.0, 0.0), t, *r0, *r1, 400);
                // (t + mu log r) / pi is an integer; one crossing per pi/mu of log r
                let worst = got
                    .iter()
                    .map(|r| {
                        let k = (t + mu * r.ln()) / PI;
                        (k - k.round()).abs() * PI / mu * r
                    })
                    .fold(0.0, f64::max);
                let expect_n = ((mu * (r1.ln() - r0.ln())) / PI).round() as usize;
                ok &= worst < *tol && got.len().abs_diff(expect_n) <= 1 && !got.is_empty();
                detail += &format!("theta {t}: {} crossings, worst {worst:.1e}; ", got.len());
            }
            ch.push("singular: log-spiral", ok, detail);
        }
        SingularDescriptor::PowerLevelSet {
            m,
            window,
            tol,
            sector,
            r_max,
        } => match trace_singular_set(face, window, 96, &TraceOptions::default()) {
            Ok(curves) => {
                let pts: Vec<Complex64> = curves.iter().flat_map(|c| c.points.clone()).collect();
                let res = pts
                    .iter()
                    .map(|z| (z.norm().powi(2 * *m as i32) - 2.0 * z.powi(*m as i32).re).abs())
                    .fold(0.0, f64::max);
                let inner: Vec<&Complex64> = pts.iter().filter(|z| z.norm() < *r_max).collect();
                let contained = inner.iter().all(|z| sector.contains(c(0.0, 0.0), **z));
                ch.push("singular: level-set residual", !pts.is_empty() && res < *tol, format!("{} points, max residual {res:.2e}", pts.len()));
                ch.push(
                    "singular: sector containment",
                    !inner.is_empty() && contained,
                    format!("{} points within r < {r_max}", inner.len()),
                );
            }
            Err(e) => ch.push("singular: trace", false, e.to_string()),
        },
    }
}

/// Runs every comparison attached to `entry`.
pub fn verify_entry(entry: &GalleryEntry, opts: &VerifyOptions) -> Vec<Check> {
    let spec = &entry.spec;
    let mut ch = Checks {
        entry: spec.name.clone(),
        out: Vec::new(),
    };
    let face = match spec.face() {
        Ok(f) => f,
        Err(e) => {
            ch.push("build", false, e.to_string());
            return ch.out;
        }
    };
    let window = spec.domain.window;
    let exp = &entry.expected;

    if exp.lightlike_line {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst = 0.0f64;
        for z in random_points(&window, 20, &mut rng) {
            match face.start(z).map_err(|e| e.to_string()).and_then(|s| project_to_s31(&s.frame).map_err(|e| e.to_string())) {
                Ok(x) => {
                    let h = x.to_herm().0;
                    let want = crate::mink::Mat2::from_real(2.0 * z.re, -1.0, -1.0, 0.0);
                    worst = worst.max((h - want).norm());
                }
                Err(_) => worst = f64::INFINITY,
            }
        }
        ch.push("lightlike line: f = ((2 Re z, -1), (-1, 0))", worst < 1e-12, format!("max error {worst:.2e}"));
    }

    // local identities at random points
    match gauss_coherence(&face, &window, opts.points, opts.seed) {
        Ok(Some((err, sides, n))) => ch.push("gauss maps: |pi(L) - G| < 1e-6", err < 1e-6 && sides, format!("{n} points, max {err:.2e}, boundary sides agree: {sides}")),
        Ok(None) => ch.push("gauss maps: |pi(L) - G| < 1e-6", true, "no regular points (degenerate)"),
        Err(e) => ch.push("gauss maps: |pi(L) - G| < 1e-6", false, e),
    }
    if !exp.lightlike_line {
        match metric_identity_error(&face, &window, 100, opts.seed + 1) {
            Ok(e) => ch.push("metrics: d sigma^2 ds^2 = 4|Q|^2", e < 1e-8, format!("max relative error {e:.2e}")),
            Err(e) => ch.push("metrics: d sigma^2 ds^2 = 4|Q|^2", false, e),
        }
    }
    if spec.gauss_pair().is_some() {
        match schwarzian_identity_error(&face, &window, 100, opts.seed + 2) {
            Ok(e) => ch.push("schwarzian: S(g) - S(G) = 2Q", e < 1e-8, format!("max relative error {e:.2e}")),
            Err(e) => ch.push("schwarzian: S(g) - S(G) = 2Q", false, e),
        }
    }
    if exp.umbilic {
        let p = face.at(c(0.3, 0.2));
        let ok = p.as_ref().map(|p| p.q.norm() == 0.0 && metrics_at(p).dsigma2 == 0.0).unwrap_or(false);
        ch.push("umbilic: Q = 0, d sigma^2 = 0", ok, format!("{:?}", p.map(|p| p.q)));
    }

    // ends
    let punctures = spec.punctures();
    let obstacles = spec.obstacles();
    let eopts = EndOptions {
        steps: opts.steps,
        ..Default::default()
    };
    let reports: Vec<Result<EndReport, String>> = punctures
        .par_iter()
        .map(|p| end_classify(&face, p, &obstacles, &eopts).map_err(|e| e.to_string()))
        .collect();
    for (k, r) in reports.iter().enumerate() {
        match r {
            Ok(rep) => {
                ch.push(
                    format!("end {k}: monodromy residual < 1e-6"),
                    rep.monodromy.residual.form_residual < 1e-6 && rep.monodromy.residual.det_residual < 1e-6,
                    format!("{:.2e}", rep.monodromy.residual.form_residual),
                );
                // regular singularity and no hyperbolic monodromy where the
                // hyperbolic metric is nonsingular near the end
                let radius = rep.monodromy.radius;
                if !singular_set_accumulates(&face.g, &rep.puncture, radius) {
                    let sg = schwarzian(&face.g).ok();
                    let ord = sg.and_then(|s| pole_order_of_two_differential(&s, &rep.puncture).ok()).map(|o| o.order);
                    let regular = rep.g_regular && ord.map_or(true, |o| o >= -2);
                    ch.push(format!("end {k}: S(g) has a regular singularity"), regular, format!("order {ord:?}"));
                    let hyperbolic = matches!(rep.end_type, Some(EndType::Hyperbolic { .. }));
                    ch.push(format!("end {k}: not hyperbolic"), !hyperbolic, format!("{:?}", rep.end_type));
                }
            }
            Err(e) => ch.push(format!("end {k}: classify"), false, e.clone()),
        }
    }
    for e in &exp.ends {
        match reports.get(e.puncture) {
            Some(Ok(rep)) => check_end(&mut ch, e, rep),
            Some(Err(err)) => ch.push(format!("end {}", e.puncture), false, err.clone()),
            None => ch.push(format!("end {}", e.puncture), false, "no such puncture"),
        }
    }

    let ok_reports: Vec<EndReport> = reports.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    if let Some(o) = exp.osserman {
        match global_report(&face, spec.genus, spec.flags.complete, &ok_reports, opts.seed) {
            Ok(g) => {
                let ok = g.core.lhs == o.lhs && g.core.rhs == o.rhs && g.core.verdict == o.verdict && g.consistent;
                ch.push("osserman", ok, format!("{} vs {}: {:?}", g.core.lhs, g.core.rhs, g.core.verdict));
            }
            Err(e) => ch.push("osserman", false, e.to_string()),
        }
    }
    for w in &exp.windings {
        match ok_reports.get(w.puncture) {
            Some(rep) => {
                let got = end_winding(&face, rep);
                // the same count on a loop half as large
                let again = got.as_ref().ok().map(|(_, r)| winding_number(&face, &rep.puncture, r / 2.0, 1024));
                let ok = matches!(got, Ok((n, _)) if n.unsigned_abs() == w.winding) && matches!((&got, &again), (Ok((a, _)), Some(Ok(b))) if a == b);
                ch.push(format!("end {}: winding", w.puncture), ok, format!("{got:?}, half radius {again:?}"));
                if let Some(v) = w.local {
                    let got = local_order_check(rep);
                    ch.push(format!("end {}: local order", w.puncture), matches!(got, Ok(l) if l.status == v), format!("{got:?}"));
                }
            }
            None => ch.push(format!("end {}: winding", w.puncture), false, "no report"),
        }
    }
    for d in &exp.singular {
        check_singular(&mut ch, &face, d, spec);
    }
    for cexp in &exp.completeness {
        let rep = if spec.flags.horosphere {
            Ok(crate::monodromy::CompletenessReport::by_definition())
        } else {
            match cexp.puncture.and_then(|k| punctures.get(k)) {
                Some(p) => completeness_probe(&face, p, &obstacles, 6, None).map_err(|e| e.to_string()),
                None => Err("completeness needs a puncture".to_string()),
            }
        };
        let label = format!("completeness {:?}", cexp.puncture);
        match rep {
            Ok(r) => {
                let div_ok = cexp.diverging.map_or(true, |d| r.rays.iter().all(|x| x.diverging) == d);
                let v_ok = cexp.verdict.map_or(true, |v| r.verdict == v);
                ch.push(label, div_ok && v_ok, format!("{:?}", r.verdict));
            }
            Err(e) => ch.push(label, false, e),
        }
    }
    // complete ends are never hyperbolic
    if spec.flags.complete == Some(true) {
        let bad = ok_reports.iter().any(|r| matches!(r.end_type, Some(EndType::Hyperbolic { .. })));
        ch.push("complete ends are elliptic or parabolic", !bad, "");
    }
    ch.out
}

pub fn verify_all(opts: &VerifyOptions) -> Vec<Check> {
    gallery().par_iter().flat_map(|e| verify_entry(e, opts)).collect()
}
