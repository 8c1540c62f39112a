//! Numeric order of vanishing / pole order at a puncture.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expr, Puncture, Tape, TwoDifferential, Value};

/// Radii of the shrinking circles used for the regression.
pub const ORDER_RADII: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Distance from an integer beyond which the behaviour is deemed non-meromorphic.
pub const INTEGRALITY_TOL: f64 = 0.1;
const SAMPLES: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("expression is not evaluable on the circle of radius {0}")]
    Evaluation(f64),
    #[error("behaviour is not meromorphic (slope {slope:.4})")]
    NotMeromorphic { slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub order: i32,
    pub slope: f64,
    /// `1 - |slope - order| / INTEGRALITY_TOL`, clipped to `[0, 1]`.
    pub confidence: f64,
}

/// Mean of `ln|e|` over the circle `|w| = r` in the local coordinate. For
/// `e = w^k u(w)` with `u` holomorphic and zero-free on the disc, this is
/// exactly `k ln r + ln|u(0)|`.
fn mean_log_modulus(tape: &Tape, r: f64) -> Result<f64, OrderError> {
    let mut acc = 0.0;
    for j in 0..SAMPLES {
        let w = Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / SAMPLES as f64);
        let v = tape.eval_fresh(w).map_err(|_| OrderError::Evaluation(r))?.0;
        match &v[0] {
            Value::Finite(c) if c.norm() > 0.0 && c.is_finite() => acc += c.norm().ln(),
            _ => return Err(OrderError::Evaluation(r)),
        }
    }
    Ok(acc / SAMPLES as f64)
}

fn regress(local: &Expr) -> Result<OrderEstimate, OrderError> {
    let tape = Tape::new(std::slice::from_ref(local));
    let xs: Vec<f64> = ORDER_RADII.iter().map(|r| r.ln()).collect();
    let ys = ORDER_RADII
        .iter()
        .map(|&r| mean_log_modulus(&tape, r))
        .collect::<Result<Vec<_>, _>>()?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    // pairwise slopes must agree too; a log factor shows up as drift
    let worst = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .map(|s| (s - slope.round()).abs())
        .fold((slope - slope.round()).abs(), f64::max);
    if !slope.is_finite() || worst > INTEGRALITY_TOL {
        return Err(OrderError::NotMeromorphic { slope });
    }
    Ok(OrderEstimate {
        order: slope.round() as i32,
        slope,
        confidence: (1.0 - worst / INTEGRALITY_TOL).clamp(0.0, 1.0),
    })
}

/// Order of a function at a puncture (positive for zeros, negative for poles).
pub fn pole_order_at(e: &Expr, p: &Puncture) -> Result<OrderEstimate, OrderError> {
    regress(&p.localize(e))
}

/// Order of a 2-differential `q dz^2` at a puncture, in the local coordinate.
pub fn pole_order_of_two_differential(q: &TwoDifferential, p: &Puncture) -> Result<OrderEstimate, OrderError> {
    regress(&q.localize(p).coeff)
}
