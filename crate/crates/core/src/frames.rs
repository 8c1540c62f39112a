//! Holomorphic null lifts `F: M -> SL(2,C)`.
//!
//! A lift is either a closed-form matrix of expressions (from Small's formula
//! or given explicitly) or is integrated from Weierstrass data `(g, omega)`
//! along paths. In both cases
//! `F^{-1} dF = [[g, -g^2], [1, -g]] omega`.

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{
    hopf_from_gauss_pair, sqrt_simplified, BranchPoint, CalculusError, EvalError, Expr, Rational, Tape,
    TwoDifferential, Value,
};
use crate::mink::{e1, Mat2, I};
use crate::rk::{Dopri5, OdeError, OdeStats, OdeSystem, RhsFailure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error("lift has a pole at {0}")]
    Pole(Complex64),
    #[error("base frame has determinant {0}, expected 1")]
    BadBase(Complex64),
    #[error("{0} is constant")]
    Constant(&'static str),
}

/// Hyperbolic and secondary Gauss maps `(G, g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPair {
    pub big_g: Expr,
    pub g: Expr,
}

impl GaussPair {
    pub fn new(big_g: Expr, g: Expr) -> Result<Self, FrameError> {
        if big_g.diff().is_zero() {
            return Err(FrameError::Constant("G"));
        }
        if g.diff().is_zero() {
            return Err(FrameError::Constant("g"));
        }
        Ok(GaussPair { big_g, g })
    }

    /// `Q = (S(g) - S(G)) / 2`.
    pub fn hopf(&self) -> Result<TwoDifferential, FrameError> {
        Ok(hopf_from_gauss_pair(&self.big_g, &self.g)?)
    }

    /// `omega = Q / dg` as a coefficient of `dz`.
    pub fn omega(&self) -> Result<Expr, FrameError> {
        Ok(self.hopf()?.coeff / self.g.diff())
    }
}

/// Weierstrass data: `g` and the coefficient of `omega = omega_hat dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeierstrassData {
    pub g: Expr,
    pub omega: Expr,
}

impl WeierstrassData {
    pub fn hopf(&self) -> TwoDifferential {
        TwoDifferential::new(&self.omega * &self.g.diff())
    }

    /// Data of the time-reversed face: `(1/g, -g^2 omega)`.
    pub fn time_reverse(&self) -> WeierstrassData {
        WeierstrassData {
            g: Expr::real(1.0) / self.g.clone(),
            omega: -(self.g.powi(2) * self.omega.clone()),
        }
    }
}

/// `F^{-1} F'` coefficient matrix for secondary Gauss map `g` and `omega_hat`.
pub fn null_generator(g: Complex64, omega: Complex64) -> Mat2 {
    Mat2::new(g * omega, -g * g * omega, omega, -g * omega)
}

/// `i F e1`.
pub fn time_reverse_frame(f: &Mat2) -> Mat2 {
    (*f * e1()).scale(I)
}

/// A lift given by four expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLift {
    entries: [Expr; 4],
    derivs: [Expr; 4],
}

fn mat_entries(m: &Mat2) -> [Expr; 4] {
    [m.a11(), m.a12(), m.a21(), m.a22()].map(Expr::constant)
}

fn mat_mul_expr(a: &[Expr; 4], b: &[Expr; 4]) -> [Expr; 4] {
    [
        &a[0] * &b[0] + &a[1] * &b[2],
        &a[0] * &b[1] + &a[1] * &b[3],
        &a[2] * &b[0] + &a[3] * &b[2],
        &a[2] * &b[1] + &a[3] * &b[3],
    ]
}

impl ClosedLift {
    pub fn new(entries: [Expr; 4]) -> Self {
        let derivs = [0, 1, 2, 3].map(|k| entries[k].diff());
        ClosedLift { entries, derivs }
    }

    /// `F11, F12, F21, F22`.
    pub fn entries(&self) -> &[Expr; 4] {
        &self.entries
    }

    pub fn derivatives(&self) -> &[Expr; 4] {
        &self.derivs
    }

    /// Entries followed by their derivatives; the layout [`Self::frame_from`] expects.
    pub fn exprs(&self) -> Vec<Expr> {
        self.entries.iter().chain(&self.derivs).cloned().collect()
    }

    pub fn tape(&self) -> Tape {
        Tape::new(&self.exprs())
    }

    /// `(F22 F11' - F12 F21') / (F11 F21' - F21 F11')`.
    pub fn secondary_gauss_map(&self) -> Expr {
        let [_, f12, _, f22] = &self.entries;
        let [d11, _, d21, _] = &self.derivs;
        (f22 * d11 - f12 * d21) / self.omega()
    }

    /// `dF11 / dF21`.
    pub fn hyperbolic_gauss_map(&self) -> Expr {
        &self.derivs[0] / &self.derivs[2]
    }

    /// `omega_hat = F11 F21' - F21 F11'`.
    pub fn omega(&self) -> Expr {
        let [f11, _, f21, _] = &self.entries;
        let [d11, _, d21, _] = &self.derivs;
        f11 * d21 - f21 * d11
    }

    pub fn weierstrass(&self) -> WeierstrassData {
        WeierstrassData {
            g: self.secondary_gauss_map(),
            omega: self.omega(),
        }
    }

    pub fn time_reverse(&self) -> ClosedLift {
        let [f11, f12, f21, f22] = &self.entries;
        let i = Expr::constant(I);
        ClosedLift::new([&i * f12, &i * f11, &i * f22, &i * f21])
    }

    /// `B F`; projects to the rigidly moved surface `B f B*`.
    pub fn left_mul(&self, b: &Mat2) -> ClosedLift {
        ClosedLift::new(mat_mul_expr(&mat_entries(b), &self.entries))
    }

    /// `F A`; changes `g` to `A^{-1} * g`.
    pub fn right_mul(&self, a: &Mat2) -> ClosedLift {
        ClosedLift::new(mat_mul_expr(&self.entries, &mat_entries(a)))
    }

    /// Reads `F` (first four tape outputs) from evaluated values.
    pub fn frame_from(values: &[Value<Complex64>], z: Complex64) -> Result<Mat2, FrameError> {
        let c = |k: usize| values[k].c().ok_or(FrameError::Pole(z));
        Ok(Mat2::new(c(0)?, c(1)?, c(2)?, c(3)?))
    }

    /// Reads `dF/dz` (tape outputs 4..8).
    pub fn derivative_from(values: &[Value<Complex64>], z: Complex64) -> Result<Mat2, FrameError> {
        let c = |k: usize| values[k].c().ok_or(FrameError::Pole(z));
        Ok(Mat2::new(c(4)?, c(5)?, c(6)?, c(7)?))
    }

    /// Principal-branch value of `F`.
    pub fn eval_principal(&self, z: Complex64) -> Result<Mat2, FrameError> {
        let (v, _) = self.tape().eval_fresh(z)?;
        Self::frame_from(&v, z)
    }
}

/// Splits `g = (a h + b) / (c h + d)` into the raw coefficients and `h`.
pub fn mobius_parts(g: &Expr) -> Option<([Complex64; 4], Expr)> {
    let crate::expr::Node::Div(n, d) = g.node() else {
        return None;
    };
    let (h1, a, b) = crate::expr::affine_part(n);
    let (h2, c, dd) = crate::expr::affine_part(d);
    if h1 != h2 || h1.is_constant() || (a * dd - b * c).norm() < 1e-12 {
        return None;
    }
    Some(([a, b, c, dd], h1))
}

/// Recognises `g = (a h + b) / (c h + d)` and returns the unimodular
/// `[[a, b], [c, d]]` together with `h`.
pub fn peel_mobius(g: &Expr) -> Option<(Mat2, Expr)> {
    let ([a, b, c, d], h) = mobius_parts(g)?;
    let m = Mat2::new(a, b, c, d);
    Some((m.scale(m.det().sqrt().inv()), h))
}

fn small_with(big_g: &Expr, g: &Expr, a: Expr) -> ClosedLift {
    let dg = big_g.diff();
    let b = -(g * &a);
    let a_g = a.diff() / dg.clone();
    let b_g = b.diff() / dg;
    ClosedLift::new([big_g * &a_g - a, big_g * &b_g - b, a_g, b_g])
}

/// Small's formula: with `a = sqrt(dG/dg)`, `b = -g a` and `' = d/dG`,
/// `F = [[G a' - a, G b' - b], [a', b']]`.
///
/// The square root is taken exactly when `dG/dg` is the square of a rational
/// function. Failing that, a Möbius layer `g = B * h` is split off when the
/// inner `h` admits an exact root, and the result is `F_h B^{-1}`. Otherwise
/// the root stays a tracked branch node.
pub fn small_formula(p: &GaussPair) -> Result<ClosedLift, FrameError> {
    let ratio = p.big_g.diff() / p.g.diff();
    let exact = |r: &Expr| Rational::from_expr(r).and_then(|q| q.sqrt_exact(1e-12)).map(|s| s.to_expr());
    if let Some(a) = exact(&ratio) {
        return Ok(small_with(&p.big_g, &p.g, a));
    }
    if let Some((b, h)) = peel_mobius(&p.g) {
        let inner = GaussPair::new(p.big_g.clone(), h)?;
        let inner_ratio = inner.big_g.diff() / inner.g.diff();
        let a = exact(&inner_ratio).unwrap_or_else(|| sqrt_simplified(&inner_ratio));
        let f = small_with(&inner.big_g, &inner.g, a);
        let b_inv = b.inverse().expect("unimodular");
        return Ok(f.right_mul(&b_inv));
    }
    Ok(small_with(&p.big_g, &p.g, sqrt_simplified(&ratio)))
}

/// Frame at a point of a path, on the branch the path arrived at.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub bp: BranchPoint,
    pub frame: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationReport {
    pub samples: Vec<FrameSample>,
    /// Largest `|det F - 1|` seen at the path vertices.
    pub max_det_drift: f64,
    /// Euclidean length of the path in the domain.
    pub length: f64,
    pub stats: OdeStats,
}

/// Straight segment `za -> zb` parametrised over `[0, 1]`, tracking branches
/// of the tape outputs `[g, omega_hat, g']` as steps are accepted.
struct Tracked<'a, const N: usize, R> {
    tape: &'a Tape,
    za: Complex64,
    dz: Complex64,
    cur: BranchPoint,
    field: R,
}

impl<const N: usize, R> Tracked<'_, N, R> {
    fn at(&self, s: f64) -> Complex64 {
        self.za + self.dz * s
    }

    fn data(&self, z: Complex64) -> Result<(Vec<Complex64>, Vec<Complex64>), RhsFailure> {
        match self.tape.eval_generic(&z, Some(&self.cur.logs)) {
            Ok((v, logs)) => {
                let vals = v
                    .iter()
                    .map(|x| x.c().ok_or_else(|| RhsFailure::Fatal(format!("pole of the data at {z}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((vals, logs))
            }
            Err(EvalError::StepTooLarge(_)) => Err(RhsFailure::Shrink),
            Err(e) => Err(RhsFailure::Fatal(e.to_string())),
        }
    }
}

impl<const N: usize, R> OdeSystem<N> for Tracked<'_, N, R>
where
    R: Fn(&[Complex64], &[Complex64; N]) -> [Complex64; N],
{
    fn rhs(&mut self, s: f64, y: &[Complex64; N]) -> Result<[Complex64; N], RhsFailure> {
        let (vals, _) = self.data(self.at(s))?;
        Ok((self.field)(&vals, y).map(|v| v * self.dz))
    }

    fn accept(&mut self, s: f64, _y: &[Complex64; N]) -> Result<(), RhsFailure> {
        let z = self.at(s);
        let (_, logs) = self.data(z)?;
        self.cur = BranchPoint { z, logs };
        Ok(())
    }
}

/// A lift obtained by integrating the null ODE from Weierstrass data.
#[derive(Debug, Clone)]
pub struct OdeLift {
    pub data: WeierstrassData,
    pub solver: Dopri5,
    tape: Tape,
}

impl OdeLift {
    pub fn new(data: WeierstrassData) -> Self {
        let tape = Tape::new(&[data.g.clone(), data.omega.clone(), data.g.diff()]);
        OdeLift {
            data,
            solver: Dopri5::default(),
            tape,
        }
    }

    /// Tape with outputs `[g, omega_hat, g']`; branch points of this lift
    /// refer to its slots.
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn start(&self, z: Complex64) -> Result<BranchPoint, FrameError> {
        Ok(self.tape.start(z)?)
    }

    fn run<const N: usize, R>(
        &self,
        start: &BranchPoint,
        y0: [Complex64; N],
        path: &[Complex64],
        field: R,
        mut visit: impl FnMut(&BranchPoint, &[Complex64; N]),
    ) -> Result<OdeStats, FrameError>
    where
        R: Fn(&[Complex64], &[Complex64; N]) -> [Complex64; N] + Copy,
    {
        let mut cur = start.clone();
        let mut y = y0;
        let mut stats = OdeStats::default();
        for (k, &zb) in path.iter().enumerate() {
            if k == 0 && zb == cur.z {
                visit(&cur, &y);
                continue;
            }
            let mut sys = Tracked {
                tape: &self.tape,
                za: cur.z,
                dz: zb - cur.z,
                cur: cur.clone(),
                field,
            };
            let (yn, st) = self.solver.integrate(&mut sys, 0.0, 1.0, y)?;
            stats.accepted += st.accepted;
            stats.rejected += st.rejected;
            stats.evaluations += st.evaluations;
            // pin the endpoint exactly on the requested vertex
            cur = BranchPoint { z: zb, logs: sys.cur.logs };
            y = yn;
            visit(&cur, &y);
        }
        Ok(stats)
    }

    /// Integrates `F' = F [[g, -g^2], [1, -g]] omega_hat` along `path`,
    /// starting from `f0` at `start` (which should sit at `path[0]`).
    pub fn integrate(&self, start: &BranchPoint, f0: Mat2, path: &[Complex64]) -> Result<IntegrationReport, FrameError> {
        if (f0.det() - 1.0).norm() > 1e-9 {
            return Err(FrameError::BadBase(f0.det()));
        }
        let mut samples = Vec::with_capacity(path.len());
        let mut drift = 0.0f64;
        let field = |d: &[Complex64], y: &[Complex64; 4]| {
            let m = null_generator(d[0], d[1]);
            let f = Mat2::new(y[0], y[1], y[2], y[3]) * m;
            [f.a11(), f.a12(), f.a21(), f.a22()]
        };
        let stats = self.run(start, [f0.a11(), f0.a12(), f0.a21(), f0.a22()], path, field, |bp, y| {
            let frame = Mat2::new(y[0], y[1], y[2], y[3]);
            drift = drift.max((frame.det() - 1.0).norm());
            samples.push(FrameSample { bp: bp.clone(), frame });
        })?;
        let length = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Ok(IntegrationReport {
            samples,
            max_det_drift: drift,
            length,
            stats,
        })
    }

    /// Data values `(g, omega_hat, g')` at a branch point.
    pub fn data_at(&self, bp: &BranchPoint) -> Result<[Complex64; 3], FrameError> {
        let v = self.tape.eval_at(bp)?;
        let c = |k: usize| v[k].c().ok_or(FrameError::Pole(bp.z));
        Ok([c(0)?, c(1)?, c(2)?])
    }
}

/// Integrates the frame ODE for `w` along `path`; see [`OdeLift::integrate`].
pub fn integrate_frame(
    w: &WeierstrassData,
    base: &BranchPoint,
    f0: Mat2,
    path: &[Complex64],
) -> Result<IntegrationReport, FrameError> {
    OdeLift::new(w.clone()).integrate(base, f0, path)
}

/// Either construction of a null lift.
#[derive(Debug, Clone)]
pub enum NullLift {
    Closed(ClosedLift),
    Integrated(OdeLift),
}

impl NullLift {
    /// `F -> i F e1`. For integrated lifts the data becomes `(1/g, -g^2 omega)`;
    /// base frames must be mapped with [`time_reverse_frame`].
    pub fn time_reverse(&self) -> NullLift {
        match self {
            NullLift::Closed(c) => NullLift::Closed(c.time_reverse()),
            NullLift::Integrated(o) => NullLift::Integrated(OdeLift::new(o.data.time_reverse())),
        }
    }
}

/// `-a0 b0 + a1 b1 + a2 b2`, complex bilinear.
pub fn lorentz_bilinear(a: &[Complex64; 3], b: &[Complex64; 3]) -> Complex64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Integrand `(-2g, 1 + g^2, i(1 - g^2)) omega_hat` of the companion null curve.
pub fn maxface_integrand(g: Complex64, omega: Complex64) -> [Complex64; 3] {
    let one = Complex64::new(1.0, 0.0);
    [-2.0 * g * omega, (one + g * g) * omega, I * (one - g * g) * omega]
}

/// The null curve `F0 = int (-2g, 1+g^2, i(1-g^2)) omega` in `C^3`, with
/// `F0 = 0` at `path[0]`. Its real part is the maximal surface sharing the
/// data; it is null for [`lorentz_bilinear`].
pub fn maxface_null_curve(w: &WeierstrassData, start: &BranchPoint, path: &[Complex64]) -> Result<Vec<[Complex64; 3]>, FrameError> {
    let lift = OdeLift::new(w.clone());
    let mut out = Vec::with_capacity(path.len());
    lift.run(
        start,
        [Complex64::new(0.0, 0.0); 3],
        path,
        |d: &[Complex64], _y: &[Complex64; 3]| maxface_integrand(d[0], d[1]),
        |_, y| out.push(*y),
    )?;
    Ok(out)
}
