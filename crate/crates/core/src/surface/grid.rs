//! Sampling windows by continuation.
//!
//! Vertex `(i, j)` is reached by walking the spine `j = 0` out to `i` and
//! then along row `i`. Rows are independent and run in parallel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::{BranchPoint, Tape};
use crate::frames::FrameError;

/// Anything that can be continued point to point along straight segments.
pub trait Walker: Sync {
    type State: Clone + Send + Sync;
    fn start(&self, z: Complex64) -> Result<Self::State, FrameError>;
    fn walk(&self, from: &Self::State, to: Complex64) -> Result<Self::State, FrameError>;
}

/// Continues a single-expression tape.
pub struct TapeWalker<'a>(pub &'a Tape);

impl Walker for TapeWalker<'_> {
    type State = BranchPoint;

    fn start(&self, z: Complex64) -> Result<BranchPoint, FrameError> {
        Ok(self.0.start(z)?)
    }

    fn walk(&self, from: &BranchPoint, to: Complex64) -> Result<BranchPoint, FrameError> {
        Ok(self.0.step(from, to)?.1)
    }
}

/// A sampling window in the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    /// `r_min <= |z - center| <= r_max`, angles from `theta0` (one turn).
    Annulus {
        center: Complex64,
        r_min: f64,
        r_max: f64,
        #[serde(default)]
        theta0: f64,
    },
    Rect { min: Complex64, max: Complex64 },
}

impl Window {
    pub fn annulus(center: Complex64, r_min: f64, r_max: f64) -> Window {
        Window::Annulus {
            center,
            r_min,
            r_max,
            theta0: 0.0,
        }
    }

    /// True when the second index wraps around.
    pub fn periodic(&self) -> bool {
        matches!(self, Window::Annulus { .. })
    }

    /// Number of distinct vertices along the second index for `n` cells.
    pub fn row_len(&self, n: usize) -> usize {
        if self.periodic() {
            n
        } else {
            n + 1
        }
    }

    /// Vertex `(i, j)` of an `n1 x n2` cell grid.
    pub fn vertex(&self, i: usize, j: usize, n1: usize, n2: usize) -> Complex64 {
        let s = i as f64 / n1 as f64;
        let t = j as f64 / n2 as f64;
        match *self {
            Window::Annulus {
                center,
                r_min,
                r_max,
                theta0,
            } => center + Complex64::from_polar(r_min + (r_max - r_min) * s, theta0 + 2.0 * PI * t),
            Window::Rect { min, max } => Complex64::new(min.re + (max.re - min.re) * s, min.im + (max.im - min.im) * t),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Window::Annulus { r_min, r_max, .. } if !(r_min > 0.0 && r_max > r_min) => {
                Err(format!("annulus radii {r_min}..{r_max}"))
            }
            Window::Rect { min, max } if !(max.re > min.re && max.im > min.im) => Err("empty rectangle".into()),
            _ => Ok(()),
        }
    }

    /// Distance from `p` to the window (0 inside).
    pub fn distance_to(&self, p: Complex64) -> f64 {
        match *self {
            Window::Annulus {
                center, r_min, r_max, ..
            } => {
                let r = (p - center).norm();
                (r_min - r).max(r - r_max).max(0.0)
            }
            Window::Rect { min, max } => {
                let dx = (min.re - p.re).max(p.re - max.re).max(0.0);
                let dy = (min.im - p.im).max(p.im - max.im).max(0.0);
                dx.hypot(dy)
            }
        }
    }
}

/// Values on an `(n1 + 1) x row_len` vertex grid; `None` where evaluation failed.
#[derive(Debug, Clone)]
pub struct GridSamples<T> {
    pub window: Window,
    pub n1: usize,
    pub n2: usize,
    pub rows: Vec<Vec<Option<T>>>,
}

impl<T> GridSamples<T> {
    pub fn get(&self, i: usize, j: usize) -> Option<&T> {
        let row = &self.rows[i];
        let j = if self.window.periodic() { j % row.len() } else { j };
        row.get(j).and_then(|x| x.as_ref())
    }

    pub fn vertex(&self, i: usize, j: usize) -> Complex64 {
        self.window.vertex(i, j, self.n1, self.n2)
    }

    pub fn valid_count(&self) -> usize {
        self.rows.iter().flatten().filter(|x| x.is_some()).count()
    }
}

fn walk_line<W: Walker>(w: &W, start: Option<W::State>, pts: &[Complex64]) -> Vec<Option<W::State>> {
    // failures only drop the offending vertex; the next one is reached
    // from the last good state
    let mut last = start;
    let mut out = Vec::with_capacity(pts.len());
    for &z in pts {
        let next = match &last {
            Some(s) => w.walk(s, z).ok(),
            None => w.start(z).ok(),
        };
        if next.is_some() {
            last.clone_from(&next);
        }
        out.push(next);
    }
    out
}

/// Samples `map(state)` over an `n1 x n2` cell grid of `window`.
pub fn sample_grid<W, T, F>(walker: &W, window: &Window, n1: usize, n2: usize, map: F) -> GridSamples<T>
where
    W: Walker,
    T: Send,
    F: Fn(&W::State) -> Option<T> + Sync,
{
    let spine_pts: Vec<Complex64> = (0..=n1).map(|i| window.vertex(i, 0, n1, n2)).collect();
    let spine = walk_line(walker, None, &spine_pts);
    let m = window.row_len(n2);
    let rows = spine
        .into_par_iter()
        .enumerate()
        .map(|(i, s0)| {
            let pts: Vec<Complex64> = (1..m).map(|j| window.vertex(i, j, n1, n2)).collect();
            let mut states = vec![s0.clone()];
            let base = s0.or_else(|| walker.start(window.vertex(i, 0, n1, n2)).ok());
            states.extend(walk_line(walker, base, &pts));
            states.into_iter().map(|s| s.and_then(|s| map(&s))).collect()
        })
        .collect();
    GridSamples {
        window: *window,
        n1,
        n2,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn annulus_grid_stays_on_one_sheet() {
        let tape = Tape::new(&[parse("log(z)").unwrap()]);
        let w = Window::Annulus {
            center: Complex64::new(0.0, 0.0),
            r_min: 0.5,
            r_max: 1.0,
            theta0: -3.0,
        };
        let g = sample_grid(&TapeWalker(&tape), &w, 4, 32, |bp: &BranchPoint| Some(bp.logs[0].im));
        for row in &g.rows {
            let args: Vec<f64> = row.iter().map(|x| x.unwrap()).collect();
            // continuous across the principal cut at -pi
            assert!(args.windows(2).all(|p| p[1] > p[0]));
            assert!((args[0] + 3.0).abs() < 1e-12);
            assert!(args.last().unwrap() > &2.0);
        }
        assert_eq!(g.valid_count(), 5 * 32);
    }
}
