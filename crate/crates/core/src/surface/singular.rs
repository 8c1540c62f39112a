//! The singular set `{|g| = 1}`: marching squares on `log|g|` over a window,
//! with every edge crossing refined by bisection.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{sample_grid, GridSamples, TapeWalker, Walker, Window};
use super::SurfaceError;
use crate::expr::{BranchPoint, Tape, Value};
use crate::face::Face;
use crate::frames::mobius_parts;

/// Minimum number of bisection steps per crossing.
pub const MIN_BISECTIONS: usize = 16;
const MAX_BISECTIONS: usize = 60;
/// Target for `| |g| - 1 |` at a refined vertex.
pub const VERTEX_RESIDUAL: f64 = 1e-10;
/// Refined points worse than this are discarded.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;

/// `S(m, eps, delta)`: the `2m` sectors of half-width `eps` around the
/// directions `k pi / m + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSet {
    pub m: u32,
    pub eps: f64,
    pub delta: f64,
}

impl SectorSet {
    /// Angular distance from `theta` to the nearest sector axis.
    pub fn axis_distance(&self, theta: f64) -> f64 {
        let step = PI / self.m as f64;
        let x = (theta - self.delta).rem_euclid(step);
        x.min(step - x)
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        self.axis_distance(theta) < self.eps
    }

    pub fn contains(&self, center: Complex64, z: Complex64) -> bool {
        self.contains_angle((z - center).arg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Annotation {
    SectorContained { m: u32, delta: f64, eps: f64 },
    Circle { center: Complex64, r: f64 },
    Spiral,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularCurve {
    pub points: Vec<Complex64>,
    pub closed: bool,
    /// Largest `| |g| - 1 |` over the vertices.
    pub max_residual: f64,
    pub annotation: Annotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Sector prediction at a puncture; curves inside `radius` of it are
    /// tested for containment.
    pub sectors: Option<(Complex64, SectorSet, f64)>,
    /// Re-trace at twice the resolution and require the same curve count.
    pub cross_validate: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            sectors: None,
            cross_validate: false,
        }
    }
}

fn log_abs(v: &Value<Complex64>) -> f64 {
    match v {
        Value::Finite(c) if c.norm() == 0.0 => f64::NEG_INFINITY,
        Value::Finite(c) => c.norm().ln(),
        Value::Infinity => f64::INFINITY,
    }
}

/// Evaluates `log|g|`. When `g = (a h + b) / (c h + d)` the tape computes `h`
/// and `|ah + b|^2 - |ch + d|^2` is expanded as a Hermitian form in `h`, which
/// keeps the sign exact where `g` itself rounds to a unit number.
struct Level {
    tape: Tape,
    form: Option<[Complex64; 4]>,
}

impl Level {
    fn new(face: &Face) -> Self {
        match mobius_parts(&face.g) {
            Some((form, h)) => Level { tape: Tape::new(&[h]), form: Some(form) },
            None => Level { tape: face.g_tape(), form: None },
        }
    }

    fn phi(&self, v: &Value<Complex64>) -> f64 {
        let Some([a, b, c, d]) = self.form else {
            return log_abs(v);
        };
        let h = match v {
            Value::Infinity => return log_abs(&Value::Finite(a)) - log_abs(&Value::Finite(c)),
            Value::Finite(h) => *h,
        };
        let den = (c * h + d).norm_sqr();
        if den == 0.0 {
            return f64::INFINITY;
        }
        let form = (a.norm_sqr() - c.norm_sqr()) * h.norm_sqr() + 2.0 * ((a * b.conj() - c * d.conj()) * h).re + (b.norm_sqr() - d.norm_sqr());
        let t = form / den;
        if t <= -1.0 {
            f64::NEG_INFINITY
        } else {
            0.5 * t.ln_1p()
        }
    }

    fn at(&self, bp: &BranchPoint) -> Option<f64> {
        self.tape.eval_at(bp).ok().map(|v| self.phi(&v[0]))
    }

    /// With the exact form a small residual says little about the distance
    /// to the set, so bisection runs down to the step length instead.
    fn converged(&self, phi: f64, it: usize, step: f64, scale: f64) -> bool {
        match self.form {
            None => phi.abs() < VERTEX_RESIDUAL && it + 1 >= MIN_BISECTIONS,
            Some(_) => phi == 0.0 || step < 1e-13 * scale,
        }
    }
}

struct Node {
    bp: BranchPoint,
    phi: f64,
}

/// Bisects `log|g|` on the segment `a -> b` starting from the state at `a`.
fn refine(level: &Level, a: &Node, zb: Complex64) -> Option<(Complex64, f64)> {
    let mut lo = (a.bp.clone(), a.phi);
    let mut hi_z = zb;
    let mut best = (a.bp.z, a.phi.abs());
    let scale = 1.0 + zb.norm();
    for it in 0..MAX_BISECTIONS {
        let mid = (lo.0.z + hi_z) * 0.5;
        let (v, bp) = level.tape.step(&lo.0, mid).ok()?;
        let phi = level.phi(&v[0]);
        if phi.abs() < best.1 || it == 0 {
            best = (mid, phi.abs());
        }
        if level.converged(phi, it, (hi_z - mid).norm(), scale) {
            break;
        }
        if phi == 0.0 || (phi > 0.0) == (lo.1 > 0.0) {
            lo = (bp, phi);
        } else {
            hi_z = mid;
        }
    }
    // | |g| - 1 | ~ |log|g|| near the set
    let residual = best.1.exp_m1().abs();
    (residual < ACCEPT_RESIDUAL).then_some((best.0, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// `(i, j) - (i + 1, j)`
    Spine(usize, usize),
    /// `(i, j) - (i, j + 1)`
    Row(usize, usize),
}

fn crossings(level: &Level, grid: &GridSamples<Node>) -> HashMap<Edge, (Complex64, f64)> {
    let m = grid.window.row_len(grid.n2);
    let mut edges = Vec::new();
    for i in 0..=grid.n1 {
        for j in 0..m {
            if i < grid.n1 {
                edges.push((Edge::Spine(i, j), (i, j), (i + 1, j)));
            }
            if grid.window.periodic() || j + 1 < m {
                edges.push((Edge::Row(i, j), (i, j), (i, (j + 1) % m)));
            }
        }
    }
    use rayon::prelude::*;
    edges
        .into_par_iter()
        .filter_map(|(e, a, b)| {
            let na = grid.get(a.0, a.1)?;
            let nb = grid.get(b.0, b.1)?;
            if !(na.phi.is_finite() || nb.phi.is_finite()) || (na.phi > 0.0) == (nb.phi > 0.0) {
                return None;
            }
            refine(level, na, nb.bp.z).map(|p| (e, p))
        })
        .collect()
}

fn cell_segments(grid: &GridSamples<Node>, hits: &HashMap<Edge, (Complex64, f64)>) -> Vec<(Edge, Edge)> {
    let m = grid.window.row_len(grid.n2);
    let mut segs = Vec::new();
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let j1 = (j + 1) % m;
            let corners = [(i, j), (i + 1, j), (i + 1, j1), (i, j1)];
            let Some(phis) = corners
                .iter()
                .map(|&(a, b)| grid.get(a, b).map(|n| n.phi))
                .collect::<Option<Vec<f64>>>()
            else {
                continue;
            };
            // edges in cyclic order: c0c1, c1c2, c2c3, c3c0
            let es = [Edge::Spine(i, j), Edge::Row(i + 1, j), Edge::Spine(i, j1), Edge::Row(i, j)];
            let hit: Vec<Edge> = es.iter().copied().filter(|e| hits.contains_key(e)).collect();
            match hit.len() {
                2 => segs.push((hit[0], hit[1])),
                4 => {
                    let finite: Vec<f64> = phis.iter().copied().filter(|p| p.is_finite()).collect();
                    let center = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
                    if (center > 0.0) == (phis[0] > 0.0) {
                        segs.push((es[0], es[1]));
                        segs.push((es[2], es[3]));
                    } else {
                        segs.push((es[3], es[0]));
                        segs.push((es[1], es[2]));
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

fn stitch(segs: &[(Edge, Edge)]) -> Vec<(Vec<Edge>, bool)> {
    let mut adj: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let other = |k: usize, e: Edge| if segs[k].0 == e { segs[k].1 } else { segs[k].0 };
    let extend = |start: Edge, used: &mut Vec<bool>, chain: &mut Vec<Edge>| {
        let mut cur = start;
        while let Some(&k) = adj.get(&cur).and_then(|v| v.iter().find(|&&k| !used[k])) {
            used[k] = true;
            cur = other(k, cur);
            chain.push(cur);
        }
    };
    // open chains first, starting from their ends
    let ends: Vec<Edge> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(e, _)| *e).collect();
    for e in ends {
        if adj[&e].iter().all(|&k| used[k]) {
            continue;
        }
        let mut chain = vec![e];
        extend(e, &mut used, &mut chain);
        out.push((chain, false));
    }
    for k in 0..segs.len() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let mut chain = vec![segs[k].0, segs[k].1];
        extend(segs[k].1, &mut used, &mut chain);
        let closed = chain.first() == chain.last();
        if closed {
            chain.pop();
        }
        out.push((chain, closed));
    }
    out
}

fn annotate(points: &[Complex64], closed: bool, window: &Window, opts: &TraceOptions) -> Annotation {
    if let Some((p, s, radius)) = opts.sectors {
        let near: Vec<&Complex64> = points.iter().filter(|z| (*z - p).norm() < radius).collect();
        if !near.is_empty() && near.iter().all(|z| s.contains(p, **z)) {
            return Annotation::SectorContained {
                m: s.m,
                delta: s.delta,
                eps: s.eps,
            };
        }
    }
    if closed && points.len() >= 8 {
        let n = points.len() as f64;
        let c = points.iter().sum::<Complex64>() / n;
        let rs: Vec<f64> = points.iter().map(|z| (z - c).norm()).collect();
        let r = rs.iter().sum::<f64>() / n;
        let spread = rs.iter().map(|x| (x - r).abs()).fold(0.0, f64::max);
        if spread < 1e-3 * r {
            return Annotation::Circle { center: c, r };
        }
    }
    let center = match *window {
        Window::Annulus { center, .. } => center,
        Window::Rect { min, max } => (min + max) * 0.5,
    };
    let turn: f64 = points.windows(2).map(|w| ((w[1] - center) / (w[0] - center)).arg()).sum();
    if !closed && turn.abs() > 2.0 * PI {
        return Annotation::Spiral;
    }
    Annotation::Generic
}

fn trace_once(face: &Face, window: &Window, n: usize, opts: &TraceOptions) -> Vec<SingularCurve> {
    let level = Level::new(face);
    let grid = sample_grid(&TapeWalker(&level.tape), window, n, n, |bp: &BranchPoint| {
        level.at(bp).map(|phi| Node { bp: bp.clone(), phi })
    });
    let hits = crossings(&level, &grid);
    let segs = cell_segments(&grid, &hits);
    let mut curves: Vec<SingularCurve> = stitch(&segs)
        .into_iter()
        .map(|(chain, closed)| {
            let pts: Vec<(Complex64, f64)> = chain.iter().map(|e| hits[e]).collect();
            let points: Vec<Complex64> = pts.iter().map(|p| p.0).collect();
            SingularCurve {
                annotation: annotate(&points, closed, window, opts),
                max_residual: pts.iter().map(|p| p.1).fold(0.0, f64::max),
                points,
                closed,
            }
        })
        .collect();
    let key = |c: &SingularCurve| {
        let z = c.points.iter().sum::<Complex64>() / c.points.len() as f64;
        (z.norm(), z.arg())
    };
    curves.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
    curves
}

/// Traces `{|g| = 1}` over `window` on an `n x n` cell grid.
pub fn trace_singular_set(face: &Face, window: &Window, n: usize, opts: &TraceOptions) -> Result<Vec<SingularCurve>, SurfaceError> {
    window.validate().map_err(SurfaceError::BadWindow)?;
    let curves = trace_once(face, window, n, opts);
    if opts.cross_validate {
        let fine = trace_once(face, window, 2 * n, opts).len();
        if fine != curves.len() {
            return Err(SurfaceError::UnstableTopology {
                coarse: curves.len(),
                fine,
            });
        }
    }
    Ok(curves)
}

/// Radii in `[r0, r1)` where the ray `center + r e^{i theta}` meets the
/// singular set, refined by bisection.
pub fn ray_crossings(face: &Face, center: Complex64, theta: f64, r0: f64, r1: f64, samples: usize) -> Vec<f64> {
    let level = Level::new(face);
    let w = TapeWalker(&level.tape);
    let dir = Complex64::from_polar(1.0, theta);
    let pts: Vec<Complex64> = (0..=samples)
        .map(|k| center + dir * (r0 + (r1 - r0) * k as f64 / samples as f64))
        .collect();
    let mut nodes: Vec<Node> = Vec::with_capacity(pts.len());
    let mut last: Option<BranchPoint> = None;
    for &z in &pts {
        let bp = match &last {
            Some(s) => w.walk(s, z),
            None => w.start(z),
        };
        let Ok(bp) = bp else { continue };
        if let Some(phi) = level.at(&bp) {
            nodes.push(Node { bp: bp.clone(), phi });
        }
        last = Some(bp);
    }
    let mut out = Vec::new();
    let on_set = |phi: f64| phi.abs() < VERTEX_RESIDUAL;
    for (k, n) in nodes.iter().enumerate() {
        let r = (n.bp.z - center).norm();
        if on_set(n.phi) {
            if r < r1 {
                out.push(r);
            }
            continue;
        }
        let Some(next) = nodes.get(k + 1) else { break };
        if on_set(next.phi) || (n.phi > 0.0) == (next.phi > 0.0) {
            continue;
        }
        if let Some((z, _)) = refine(&level, n, next.bp.z) {
            let r = (z - center).norm();
            if r < r1 {
                out.push(r);
            }
        }
    }
    out
}
