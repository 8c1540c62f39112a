//! Embedded Dormand-Prince 5(4) integrator for complex-valued systems over a
//! real parameter.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("too many steps ({0})")]
    TooManySteps(usize),
    #[error("right-hand side failed at t = {t}: {msg}")]
    Rhs { t: f64, msg: String },
}

/// What a right-hand side can report besides a value.
#[derive(Debug, Clone, PartialEq)]
pub enum RhsFailure {
    /// Retry with a smaller step (e.g. ambiguous branch choice).
    Shrink,
    Fatal(String),
}

pub trait OdeSystem<const N: usize> {
    fn rhs(&mut self, t: f64, y: &[Complex64; N]) -> Result<[Complex64; N], RhsFailure>;

    /// Called once a step ending at `t` is accepted.
    fn accept(&mut self, _t: f64, _y: &[Complex64; N]) -> Result<(), RhsFailure> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
            h_min: 1e-14,
        }
    }
}

// Butcher tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; E = b5 - b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    pub fn with_tol(tol: f64) -> Self {
        Dopri5 {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }

    /// Integrates from `t0` to `t1` (either direction).
    pub fn integrate<const N: usize, S: OdeSystem<N>>(
        &self,
        sys: &mut S,
        t0: f64,
        t1: f64,
        y0: [Complex64; N],
    ) -> Result<([Complex64; N], OdeStats), OdeError> {
        let mut st = OdeStats::default();
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        if span == 0.0 {
            return Ok((y0, st));
        }
        let mut t = t0;
        let mut y = y0;
        let mut h = 0.01 * span;
        let fail = |t: f64, f: RhsFailure| match f {
            RhsFailure::Fatal(msg) => Some(OdeError::Rhs { t, msg }),
            RhsFailure::Shrink => None,
        };
        let mut k0 = sys.rhs(t, &y).map_err(|f| {
            fail(t, f).unwrap_or(OdeError::Rhs {
                t,
                msg: "cannot evaluate at the start point".into(),
            })
        })?;
        st.evaluations += 1;
        loop {
            if st.accepted + st.rejected >= self.max_steps {
                return Err(OdeError::TooManySteps(self.max_steps));
            }
            let remaining = (t1 - t).abs();
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h < self.h_min * span.max(1.0) && !last {
                return Err(OdeError::StepUnderflow(t));
            }
            let hs = dir * h;
            let mut k = [[Complex64::new(0.0, 0.0); N]; 7];
            k[0] = k0;
            let mut shrink = false;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += kj[i] * (hs * a);
                        }
                    }
                }
                let ts = if s == 6 { t + hs } else { t + C[s] * hs };
                match sys.rhs(ts, &ys) {
                    Ok(v) => k[s] = v,
                    Err(f) => match fail(ts, f) {
                        Some(e) => return Err(e),
                        None => {
                            shrink = true;
                            break;
                        }
                    },
                }
                st.evaluations += 1;
            }
            if shrink {
                st.rejected += 1;
                h *= 0.25;
                continue;
            }
            let mut y5 = y;
            for (s, ks) in k.iter().enumerate().take(6) {
                let b = A[6][s];
                if b != 0.0 {
                    for i in 0..N {
                        y5[i] += ks[i] * (hs * b);
                    }
                }
            }
            let mut err = 0.0f64;
            for i in 0..N {
                let mut e = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    e += k[s][i] * E[s];
                }
                let sc = self.atol + self.rtol * y[i].norm().max(y5[i].norm());
                err = err.max((e * hs).norm() / sc);
            }
            if err <= 1.0 {
                let tn = if last { t1 } else { t + hs };
                if let Err(f) = sys.accept(tn, &y5) {
                    match fail(tn, f) {
                        Some(e) => return Err(e),
                        None => {
                            st.rejected += 1;
                            h *= 0.25;
                            continue;
                        }
                    }
                }
                st.accepted += 1;
                t = tn;
                y = y5;
                k0 = k[6]; // first-same-as-last
                if last {
                    return Ok((y, st));
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= fac;
            } else {
                st.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h *= fac;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rot;
    impl OdeSystem<2> for Rot {
        fn rhs(&mut self, _t: f64, y: &[Complex64; 2]) -> Result<[Complex64; 2], RhsFailure> {
            let i = Complex64::new(0.0, 1.0);
            Ok([i * y[0], -y[1] * 2.0])
        }
    }

    #[test]
    fn exponential_solutions() {
        let (y, st) = Dopri5::with_tol(1e-12)
            .integrate(&mut Rot, 0.0, 3.0, [Complex64::new(1.0, 0.0); 2])
            .unwrap();
        assert!((y[0] - Complex64::from_polar(1.0, 3.0)).norm() < 1e-10);
        assert!((y[1] - (-6.0f64).exp()).norm() < 1e-10);
        assert!(st.accepted > 10);
        let (yb, _) = Dopri5::with_tol(1e-12).integrate(&mut Rot, 3.0, 0.0, y).unwrap();
        assert!((yb[0] - 1.0).norm() < 1e-9);
    }

    struct Fussy(u32);
    impl OdeSystem<1> for Fussy {
        fn rhs(&mut self, t: f64, y: &[Complex64; 1]) -> Result<[Complex64; 1], RhsFailure> {
            // refuses a handful of evaluations to exercise the shrink path
            if t > 0.5 && self.0 < 3 {
                self.0 += 1;
                return Err(RhsFailure::Shrink);
            }
            Ok([y[0]])
        }
    }

    #[test]
    fn shrink_requests_are_honoured() {
        let (y, st) = Dopri5::default().integrate(&mut Fussy(0), 0.0, 1.0, [Complex64::new(1.0, 0.0)]).unwrap();
        assert!((y[0] - 1f64.exp()).norm() < 1e-8);
        assert!(st.rejected >= 3);
    }
}
