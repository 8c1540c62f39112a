//! Global audit: `2 deg G >= -chi + 2n`, the local inequality
//! `m >= Ord Q + 3` at each end, and winding numbers of ends.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, Puncture, Rational, Tape, Value};
use crate::face::Face;
use crate::monodromy::{loop_path, EndReport};
use crate::surface::{project_to_s31, stereographic, SurfaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("loop radius must be positive (got {0})")]
    BadRadius(f64),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("loop passes within {0:.3e} of the X3-axis")]
    NearAxis(f64),
    #[error("image loop does not close (winding {0:.4} turns)")]
    NotClosed(f64),
    #[error("end is missing {0}")]
    Missing(&'static str),
    #[error("degree estimates disagree: {0} vs {1}")]
    DegreeMismatch(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equality,
    Strict,
    Violated,
}

fn compare(lhs: i64, rhs: i64) -> Verdict {
    match lhs.cmp(&rhs) {
        std::cmp::Ordering::Equal => Verdict::Equality,
        std::cmp::Ordering::Greater => Verdict::Strict,
        std::cmp::Ordering::Less => Verdict::Violated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OssermanCore {
    pub deg_g: u32,
    pub euler_char: i64,
    pub n_ends: u32,
    pub lhs: i64,
    pub rhs: i64,
    pub verdict: Verdict,
}

/// `2 deg(G)` against `-chi + 2n` with `chi = 2 - 2 genus`.
pub fn osserman_check(deg_g: u32, genus: u32, n_ends: u32) -> OssermanCore {
    let euler_char = 2 - 2 * genus as i64;
    let lhs = 2 * deg_g as i64;
    let rhs = -euler_char + 2 * n_ends as i64;
    OssermanCore {
        deg_g,
        euler_char,
        n_ends,
        lhs,
        rhs,
        verdict: compare(lhs, rhs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalOrder {
    pub m: u32,
    pub ord_q: i32,
    pub bound: i32,
    pub status: Verdict,
}

pub fn local_order(m: u32, ord_q: i32) -> LocalOrder {
    let bound = ord_q + 3;
    LocalOrder {
        m,
        ord_q,
        bound,
        status: compare(m as i64, bound as i64),
    }
}

pub fn local_order_check(end: &EndReport) -> Result<LocalOrder, AuditError> {
    let m = end.ramification_m.ok_or(AuditError::Missing("the ramification order of G"))?;
    let q = end.ord_q.ok_or(AuditError::Missing("the order of Q"))?;
    Ok(local_order(m, q))
}

/// Winding of `X1 + i X2` of `Pi o f` around the loop `|w| = radius`.
///
/// An end that runs to past infinity is first sent through the antipodal
/// map, which negates `X1 + i X2` and so keeps the winding.
pub fn winding_number(face: &Face, p: &Puncture, radius: f64, steps: usize) -> Result<i32, AuditError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(AuditError::BadRadius(radius));
    }
    let path = loop_path(p, radius, steps.max(16));
    let s0 = face.start(path[0]).map_err(SurfaceError::from)?;
    let mut states = vec![s0.clone()];
    states.extend(face.walk(&s0, &path[1..]).map_err(SurfaceError::from)?);
    let points = states.iter().map(|st| project_to_s31(&st.frame)).collect::<Result<Vec<_>, _>>()?;
    let past = points.iter().all(|x| x.x0() < -1.0);
    let mut total = 0.0;
    let mut prev: Option<Complex64> = None;
    for x in &points {
        let x = stereographic(&if past { x.scale(-1.0) } else { *x })?;
        let planar = Complex64::new(x[0], x[1]);
        let size = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if planar.norm() < 1e-6 * size.max(1e-300) {
            return Err(AuditError::NearAxis(planar.norm()));
        }
        if let Some(q) = prev {
            total += (planar / q).arg();
        }
        prev = Some(planar);
    }
    let turns = total / (2.0 * PI);
    if (turns - turns.round()).abs() > 1e-3 {
        return Err(AuditError::NotClosed(turns));
    }
    Ok(turns.round() as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMethod {
    Rational,
    PreimageCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeEstimate {
    pub degree: u32,
    pub method: DegreeMethod,
}

/// Count of solutions of `G = c` in the unit square chart of `G o phi`,
/// located by the argument principle cell by cell.
fn count_in_chart(tape: &Tape, c: Complex64, inverted: bool, n: usize) -> Option<u32> {
    let sub = 8;
    let h = 2.0 / n as f64;
    let eval = |x: f64, y: f64| -> Option<Complex64> {
        let w = Complex64::new(x, y);
        let z = if inverted { w.inv() } else { w };
        match tape.eval_fresh(z).ok()?.0[0] {
            Value::Finite(v) if v.is_finite() => Some(v - c),
            _ => None,
        }
    };
    // offset the lattice so that no vertex hits a puncture or the origin
    let off = 0.5 * h * 0.137;
    let mut count = 0;
    for i in 0..n {
        for j in 0..n {
            let x0 = -1.0 + i as f64 * h + off;
            let y0 = -1.0 + j as f64 * h + off;
            let corners = [(x0, y0), (x0 + h, y0), (x0 + h, y0 + h), (x0, y0 + h), (x0, y0)];
            let mut total = 0.0;
            let mut prev = eval(x0, y0)?;
            for k in 0..4 {
                let (a, b) = (corners[k], corners[k + 1]);
                for s in 1..=sub {
                    let t = s as f64 / sub as f64;
                    let v = eval(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)?;
                    total += (v / prev).arg();
                    prev = v;
                }
            }
            let wind = (total / (2.0 * PI)).round() as i32;
            if wind > 0 {
                // keep only solutions in this chart's half of the sphere
                let centre = Complex64::new(x0 + h / 2.0, y0 + h / 2.0);
                if centre.norm() <= 1.0 {
                    count += wind as u32;
                }
            }
        }
    }
    Some(count)
}

fn preimage_count(g: &Expr, c: Complex64, n: usize) -> Option<u32> {
    let tape = Tape::new(std::slice::from_ref(g));
    Some(count_in_chart(&tape, c, false, n)? + count_in_chart(&tape, c, true, n)?)
}

/// Degree of `G` as a map of the sphere: exact for rational expressions,
/// otherwise by counting preimages of two random values.
pub fn degree_of(g: &Expr, seed: u64) -> Result<DegreeEstimate, AuditError> {
    if let Some(r) = Rational::from_expr(g) {
        return Ok(DegreeEstimate {
            degree: r.degree() as u32,
            method: DegreeMethod::Rational,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || Complex64::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
    let (c1, c2) = (pick(), pick());
    let n = 96;
    let a = preimage_count(g, c1, n).ok_or(AuditError::Missing("a finite G on the sampling lattice"))?;
    let b = preimage_count(g, c2, n).ok_or(AuditError::Missing("a finite G on the sampling lattice"))?;
    if a != b {
        return Err(AuditError::DegreeMismatch(a, b));
    }
    Ok(DegreeEstimate {
        degree: a,
        method: DegreeMethod::PreimageCount,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndAudit {
    pub puncture: Puncture,
    pub ord_q: Option<i32>,
    pub ramification_m: Option<u32>,
    pub local: Option<LocalOrder>,
    pub winding: Option<i32>,
    pub winding_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    #[serde(flatten)]
    pub core: OssermanCore,
    pub degree_method: DegreeMethod,
    pub declared_complete: Option<bool>,
    pub ends: Vec<EndAudit>,
    /// A violated inequality is only expected when completeness is not declared.
    pub consistent: bool,
}

/// Radius for the winding loop: a quarter of the monodromy loop radius.
pub fn winding_radius(end: &EndReport) -> f64 {
    end.monodromy.radius / 4.0
}

/// Winding at [`winding_radius`], shrinking the loop by factors of ten while
/// it still leaves the domain of `Pi`. Returns the winding and the radius used.
pub fn end_winding(face: &Face, end: &EndReport) -> Result<(i32, f64), AuditError> {
    let mut r = winding_radius(end);
    let mut last = None;
    for _ in 0..5 {
        match winding_number(face, &end.puncture, r, 1024) {
            Ok(n) => return Ok((n, r)),
            Err(e @ AuditError::Surface(SurfaceError::OutsideProjection(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
        r /= 10.0;
    }
    Err(last.expect("loop ran"))
}

pub fn global_report(face: &Face, genus: u32, declared_complete: Option<bool>, ends: &[EndReport], seed: u64) -> Result<GlobalReport, AuditError> {
    let big_g = face.big_g.as_ref().ok_or(AuditError::Missing("a symbolic hyperbolic Gauss map"))?;
    let deg = degree_of(big_g, seed)?;
    let core = osserman_check(deg.degree, genus, ends.len() as u32);
    let audits = ends
        .iter()
        .map(|e| {
            let w = end_winding(face, e).map(|(n, _)| n);
            EndAudit {
                puncture: e.puncture,
                ord_q: e.ord_q,
                ramification_m: e.ramification_m,
                local: local_order_check(e).ok(),
                winding: w.as_ref().ok().copied(),
                winding_error: w.err().map(|x| x.to_string()),
            }
        })
        .collect();
    Ok(GlobalReport {
        consistent: core.verdict != Verdict::Violated || declared_complete != Some(true),
        core,
        degree_method: deg.method,
        declared_complete,
        ends: audits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::frames::GaussPair;

    #[test]
    fn inequality_table() {
        let four = osserman_check(3, 0, 4);
        assert_eq!((four.lhs, four.rhs, four.verdict), (6, 6, Verdict::Equality));
        let three = osserman_check(1, 0, 3);
        assert_eq!((three.lhs, three.rhs, three.verdict), (2, 4, Verdict::Violated));
        assert_eq!(osserman_check(1, 0, 2).verdict, Verdict::Equality);
    }

    #[test]
    fn local_orders() {
        assert_eq!(local_order(1, -2).status, Verdict::Equality);
        assert_eq!(local_order(3, -2).status, Verdict::Strict);
    }

    #[test]
    fn numeric_degree_matches_rational() {
        // same map, written so that the rational path does not apply
        let g = parse("exp(log(z^2 + 1)) / (z - 2)").unwrap();
        let d = degree_of(&g, 7).unwrap();
        assert_eq!(d.method, DegreeMethod::PreimageCount);
        assert_eq!(d.degree, 2);
        assert_eq!(degree_of(&parse("(z^3 + 1)/(z - 1)").unwrap(), 0).unwrap().degree, 3);
    }

    #[test]
    fn catenoid_end_winds_once() {
        let face = Face::from_gauss_pair(GaussPair::new(parse("z").unwrap(), parse("z^0.5").unwrap()).unwrap()).unwrap();
        let p = Puncture::Finite(Complex64::new(0.0, 0.0));
        let a = winding_number(&face, &p, 0.05, 512).unwrap();
        let b = winding_number(&face, &p, 0.02, 512).unwrap();
        assert_eq!(a.abs(), 1);
        assert_eq!(a, b);
        assert!(matches!(winding_number(&face, &p, 0.0, 64), Err(AuditError::BadRadius(_))));
    }
}
