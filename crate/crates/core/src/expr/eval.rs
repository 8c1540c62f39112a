//! Compiled evaluation with branch tracking.
//!
//! A [`Tape`] flattens one or more expressions into a shared instruction list.
//! Every multivalued node (log, non-integer power, sqrt) is reduced to an
//! unwound logarithm of its argument, stored in a *slot*; nodes with the same
//! argument share a slot, so `z^0.3`, `sqrt(z)` and `log(z)` always sit on the
//! same sheet. Continuing a [`BranchPoint`] along a path keeps each slot on the
//! branch nearest to its previous value.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use thiserror::Error;

use super::{is_integer, Expr, Node};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EvalError {
    #[error("singularity of the expression at {0}")]
    Singularity(Complex64),
    #[error("undefined value (0/0, inf-inf or 0*inf) at {0}")]
    Undefined(Complex64),
    #[error("continuation step too large near {0}")]
    StepTooLarge(Complex64),
}

/// Number field used by the evaluator. Implemented for `Complex64` and for
/// the multiprecision [`super::BigComplex`].
pub trait Scalar: Clone {
    fn from_c64(c: Complex64) -> Self;
    fn to_c64(&self) -> Complex64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Division by a nonzero value.
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn exp(&self) -> Self;
    /// Principal logarithm of a nonzero value.
    fn ln(&self) -> Self;
    /// `2 pi i k`.
    fn two_pi_i(k: i64) -> Self;
}

impl Scalar for Complex64 {
    fn from_c64(c: Complex64) -> Self {
        c
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn two_pi_i(k: i64) -> Self {
        Complex64::new(0.0, 2.0 * PI * k as f64)
    }
}

/// A value on the Riemann sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<S> {
    Finite(S),
    Infinity,
}

impl<S: Scalar> Value<S> {
    pub fn finite(&self) -> Option<&S> {
        match self {
            Value::Finite(s) => Some(s),
            Value::Infinity => None,
        }
    }

    pub fn to_c64(&self) -> Value<Complex64> {
        match self {
            Value::Finite(s) => Value::Finite(s.to_c64()),
            Value::Infinity => Value::Infinity,
        }
    }
}

impl Value<Complex64> {
    /// Finite value or `None`.
    pub fn c(&self) -> Option<Complex64> {
        self.finite().copied()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Const(Complex64),
    Var,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    PowI(usize, i32),
    /// `exp(mu * L)`; the argument is implied by the slot.
    PowC(Complex64, usize),
    /// The slot log itself.
    Log(usize),
    Exp(usize),
}

/// A point of the universal cover seen by a particular tape: the base point
/// and one unwound logarithm per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub z: Complex64,
    pub logs: Vec<Complex64>,
}

/// Flattened, common-subexpression-shared evaluation program.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    /// Tape index of each slot's argument.
    slot_args: Vec<usize>,
    slot_keys: Vec<Expr>,
}

struct Builder {
    ops: Vec<Op>,
    index: HashMap<Expr, usize>,
    slots: HashMap<Expr, usize>,
    slot_args: Vec<usize>,
    slot_keys: Vec<Expr>,
}

impl Builder {
    fn slot(&mut self, arg: &Expr) -> usize {
        if let Some(&s) = self.slots.get(arg) {
            return s;
        }
        let a = self.emit(arg);
        let s = self.slot_args.len();
        self.slot_args.push(a);
        self.slot_keys.push(arg.clone());
        self.slots.insert(arg.clone(), s);
        s
    }

    fn emit(&mut self, e: &Expr) -> usize {
        if let Some(&i) = self.index.get(e) {
            return i;
        }
        let op = match e.node() {
            Node::Const(c) => Op::Const(*c),
            Node::Var => Op::Var,
            Node::Add(a, b) => Op::Add(self.emit(a), self.emit(b)),
            Node::Sub(a, b) => Op::Sub(self.emit(a), self.emit(b)),
            Node::Mul(a, b) => Op::Mul(self.emit(a), self.emit(b)),
            Node::Div(a, b) => Op::Div(self.emit(a), self.emit(b)),
            Node::Neg(a) => Op::Neg(self.emit(a)),
            Node::Pow(a, k) => match is_integer(*k) {
                Some(n) => Op::PowI(self.emit(a), n),
                None => Op::PowC(*k, self.slot(a)),
            },
            Node::Sqrt(a) => Op::PowC(Complex64::new(0.5, 0.0), self.slot(a)),
            Node::Log(a) => Op::Log(self.slot(a)),
            Node::Exp(a) => Op::Exp(self.emit(a)),
        };
        let i = self.ops.len();
        self.ops.push(op);
        self.index.insert(e.clone(), i);
        i
    }
}

fn mul_ext<S: Scalar>(a: &Value<S>, b: &Value<S>, z: Complex64) -> Result<Value<S>, EvalError> {
    Ok(match (a, b) {
        (Value::Finite(x), Value::Finite(y)) => Value::Finite(x.mul(y)),
        (Value::Infinity, Value::Finite(y)) | (Value::Finite(y), Value::Infinity) => {
            if y.is_zero() {
                return Err(EvalError::Undefined(z));
            }
            Value::Infinity
        }
        (Value::Infinity, Value::Infinity) => Value::Infinity,
    })
}

fn div_ext<S: Scalar>(a: &Value<S>, b: &Value<S>, z: Complex64) -> Result<Value<S>, EvalError> {
    Ok(match (a, b) {
        (Value::Finite(x), Value::Finite(y)) => {
            if y.is_zero() {
                if x.is_zero() {
                    return Err(EvalError::Undefined(z));
                }
                Value::Infinity
            } else {
                Value::Finite(x.div(y))
            }
        }
        (Value::Finite(_), Value::Infinity) => Value::Finite(S::from_c64(Complex64::new(0.0, 0.0))),
        (Value::Infinity, Value::Finite(_)) => Value::Infinity,
        (Value::Infinity, Value::Infinity) => return Err(EvalError::Undefined(z)),
    })
}

fn add_ext<S: Scalar>(a: &Value<S>, b: &Value<S>, neg: bool, z: Complex64) -> Result<Value<S>, EvalError> {
    Ok(match (a, b) {
        (Value::Finite(x), Value::Finite(y)) => Value::Finite(if neg { x.sub(y) } else { x.add(y) }),
        (Value::Infinity, Value::Infinity) => return Err(EvalError::Undefined(z)),
        _ => Value::Infinity,
    })
}

fn powi<S: Scalar>(x: &S, n: i32) -> S {
    let mut base = x.clone();
    let mut acc = S::from_c64(Complex64::new(1.0, 0.0));
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc = acc.mul(&base);
        }
        k >>= 1;
        if k > 0 {
            base = base.mul(&base);
        }
    }
    if n < 0 {
        S::from_c64(Complex64::new(1.0, 0.0)).div(&acc)
    } else {
        acc
    }
}

/// Chooses the branch of `ln a` nearest to `hint`.
fn branch_log<S: Scalar>(a: &S, hint: Option<Complex64>, z: Complex64) -> Result<S, EvalError> {
    let p = a.ln();
    let Some(h) = hint else {
        return Ok(p);
    };
    let pc = p.to_c64();
    let k = ((h.im - pc.im) / (2.0 * PI)).round();
    let l = if k == 0.0 { p } else { p.add(&S::two_pi_i(k as i64)) };
    let jump = (pc.im + 2.0 * PI * k - h.im).abs();
    if !(jump < FRAC_PI_2) {
        return Err(EvalError::StepTooLarge(z));
    }
    Ok(l)
}

/// Maximum bisection depth used by [`Tape::step`].
const MAX_BISECT: u32 = 40;

impl Tape {
    pub fn new(exprs: &[Expr]) -> Tape {
        let mut b = Builder {
            ops: Vec::new(),
            index: HashMap::new(),
            slots: HashMap::new(),
            slot_args: Vec::new(),
            slot_keys: Vec::new(),
        };
        let outputs = exprs.iter().map(|e| b.emit(e)).collect();
        Tape {
            ops: b.ops,
            outputs,
            slot_args: b.slot_args,
            slot_keys: b.slot_keys,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_slots(&self) -> usize {
        self.slot_args.len()
    }

    /// The argument expression whose logarithm each slot tracks.
    pub fn slot_keys(&self) -> &[Expr] {
        &self.slot_keys
    }

    /// Evaluates all outputs at `z` with each slot on the branch nearest to
    /// `hint` (principal branches when `hint` is `None`). Returns outputs and
    /// the slot logarithms as `Complex64`.
    pub fn eval_generic<S: Scalar>(
        &self,
        z: &S,
        hint: Option<&[Complex64]>,
    ) -> Result<(Vec<Value<S>>, Vec<Complex64>), EvalError> {
        let zc = z.to_c64();
        let mut vals: Vec<Value<S>> = Vec::with_capacity(self.ops.len());
        let mut logs: Vec<Option<S>> = vec![None; self.slot_args.len()];
        // Slot arguments always precede their users on the tape, so a slot
        // is resolved lazily the first time one of its users runs.
        let resolve = |slot: usize, vals: &Vec<Value<S>>, logs: &mut Vec<Option<S>>| -> Result<S, EvalError> {
            if let Some(l) = &logs[slot] {
                return Ok(l.clone());
            }
            let a = match &vals[self.slot_args[slot]] {
                Value::Finite(a) if !a.is_zero() => a.clone(),
                _ => return Err(EvalError::Singularity(zc)),
            };
            let l = branch_log(&a, hint.map(|h| h[slot]), zc)?;
            logs[slot] = Some(l.clone());
            Ok(l)
        };
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => Value::Finite(S::from_c64(*c)),
                Op::Var => Value::Finite(z.clone()),
                Op::Add(a, b) => add_ext(&vals[*a], &vals[*b], false, zc)?,
                Op::Sub(a, b) => add_ext(&vals[*a], &vals[*b], true, zc)?,
                Op::Mul(a, b) => mul_ext(&vals[*a], &vals[*b], zc)?,
                Op::Div(a, b) => div_ext(&vals[*a], &vals[*b], zc)?,
                Op::Neg(a) => match &vals[*a] {
                    Value::Finite(x) => Value::Finite(x.neg()),
                    Value::Infinity => Value::Infinity,
                },
                Op::PowI(a, n) => match &vals[*a] {
                    Value::Finite(x) if x.is_zero() && *n < 0 => Value::Infinity,
                    Value::Finite(x) => Value::Finite(powi(x, *n)),
                    Value::Infinity if *n > 0 => Value::Infinity,
                    Value::Infinity => Value::Finite(S::from_c64(Complex64::new(0.0, 0.0))),
                },
                Op::PowC(mu, slot) => {
                    let l = resolve(*slot, &vals, &mut logs)?;
                    Value::Finite(l.mul(&S::from_c64(*mu)).exp())
                }
                Op::Log(slot) => Value::Finite(resolve(*slot, &vals, &mut logs)?),
                Op::Exp(a) => match &vals[*a] {
                    Value::Finite(x) => Value::Finite(x.exp()),
                    Value::Infinity => return Err(EvalError::Singularity(zc)),
                },
            };
            vals.push(v);
        }
        let out = self.outputs.iter().map(|&i| vals[i].clone()).collect();
        let logs = logs
            .into_iter()
            .map(|l| l.map(|l| l.to_c64()).unwrap_or(Complex64::new(f64::NAN, f64::NAN)))
            .collect();
        Ok((out, logs))
    }

    /// Principal-branch evaluation; returns the outputs and the branch point.
    pub fn eval_fresh(&self, z: Complex64) -> Result<(Vec<Value<Complex64>>, BranchPoint), EvalError> {
        let (v, logs) = self.eval_generic(&z, None)?;
        Ok((v, BranchPoint { z, logs }))
    }

    /// Principal-branch start point.
    pub fn start(&self, z: Complex64) -> Result<BranchPoint, EvalError> {
        Ok(self.eval_fresh(z)?.1)
    }

    /// Values at the branch point itself.
    pub fn eval_at(&self, p: &BranchPoint) -> Result<Vec<Value<Complex64>>, EvalError> {
        Ok(self.eval_generic(&p.z, Some(&p.logs))?.0)
    }

    /// One continuation step with automatic bisection.
    pub fn step(&self, from: &BranchPoint, to: Complex64) -> Result<(Vec<Value<Complex64>>, BranchPoint), EvalError> {
        self.step_depth(from, to, 0)
    }

    fn step_depth(
        &self,
        from: &BranchPoint,
        to: Complex64,
        depth: u32,
    ) -> Result<(Vec<Value<Complex64>>, BranchPoint), EvalError> {
        match self.eval_generic(&to, Some(&from.logs)) {
            Ok((v, logs)) => Ok((v, BranchPoint { z: to, logs })),
            Err(EvalError::StepTooLarge(_)) if depth < MAX_BISECT => {
                let mid = (from.z + to) * 0.5;
                let (_, m) = self.step_depth(from, mid, depth + 1)?;
                self.step_depth(&m, to, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    /// Continues `start` along the polyline `path` (whose first vertex should
    /// be `start.z`). Returns values at every vertex and the final branch point.
    pub fn continue_path(
        &self,
        path: &[Complex64],
        start: &BranchPoint,
    ) -> Result<(Vec<Vec<Value<Complex64>>>, BranchPoint), EvalError> {
        let mut cur = start.clone();
        let mut out = Vec::with_capacity(path.len());
        for &q in path {
            let (v, next) = if q == cur.z {
                (self.eval_at(&cur)?, cur.clone())
            } else {
                self.step(&cur, q)?
            };
            out.push(v);
            cur = next;
        }
        Ok((out, cur))
    }
}

/// Counterclockwise circle `c + r e^{i theta}`, closed (last vertex equals the first).
pub fn circle_path(center: Complex64, radius: f64, steps: usize, phase: f64) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = (0..steps)
        .map(|k| center + Complex64::from_polar(radius, phase + 2.0 * PI * k as f64 / steps as f64))
        .collect();
    p.push(p[0]);
    p
}

/// Evaluates a single expression along a path, continuing from the principal
/// branch at `path[0]` unless `start` is given.
pub fn eval_continued(
    e: &Expr,
    path: &[Complex64],
    start: Option<&BranchPoint>,
) -> Result<(Vec<Value<Complex64>>, BranchPoint), EvalError> {
    let tape = Tape::new(std::slice::from_ref(e));
    let start = match start {
        Some(s) => s.clone(),
        None => tape.start(path[0])?,
    };
    let (vals, end) = tape.continue_path(path, &start)?;
    Ok((vals.into_iter().map(|mut v| v.remove(0)).collect(), end))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_gains_two_pi_i_around_origin() {
        let e = parse("log(z)").unwrap();
        let path = circle_path(c(0.0, 0.0), 1.0, 64, 0.0);
        let (vals, end) = eval_continued(&e, &path, None).unwrap();
        let d = vals.last().unwrap().c().unwrap() - vals[0].c().unwrap();
        assert!((d - c(0.0, 2.0 * PI)).norm() < 1e-12);
        assert!((end.logs[0] - c(0.0, 2.0 * PI)).norm() < 1e-12);
    }

    #[test]
    fn coarse_path_is_bisected() {
        // four vertices only: each step turns by pi/2, which must be subdivided
        let e = parse("log(z)").unwrap();
        let path = circle_path(c(0.0, 0.0), 2.0, 4, 0.0);
        let (vals, _) = eval_continued(&e, &path, None).unwrap();
        let d = vals[4].c().unwrap() - vals[0].c().unwrap();
        assert!((d - c(0.0, 2.0 * PI)).norm() < 1e-12);
    }

    #[test]
    fn fractional_power_monodromy() {
        let e = parse("z^0.3").unwrap();
        let path = circle_path(c(0.0, 0.0), 0.5, 200, 0.1);
        let (vals, _) = eval_continued(&e, &path, None).unwrap();
        let ratio = vals[200].c().unwrap() / vals[0].c().unwrap();
        assert!((ratio - Complex64::from_polar(1.0, 0.6 * PI)).norm() < 1e-12);
    }

    #[test]
    fn imaginary_power_is_real_on_circle() {
        let e = parse("z^(10i)").unwrap();
        let v = e.eval_c(c((-PI).exp(), 0.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
    }

    #[test]
    fn nullhomotopic_loop_restores_branch() {
        // a loop around 2 that does not enclose the branch point 0
        let e = parse("sqrt(z)*log(z-0.5i)").unwrap();
        let tape = Tape::new(&[e]);
        let path = circle_path(c(2.0, 0.0), 0.8, 100, 0.0);
        let start = tape.start(path[0]).unwrap();
        let (_, end) = tape.continue_path(&path, &start).unwrap();
        for (a, b) in start.logs.iter().zip(&end.logs) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn shared_slots() {
        let t = Tape::new(&[parse("z^0.3").unwrap(), parse("sqrt(z)+log(z)").unwrap()]);
        assert_eq!(t.n_slots(), 1);
        assert_eq!(t.n_outputs(), 2);
    }

    #[test]
    fn singular_points() {
        let e = parse("log(z)").unwrap();
        assert!(matches!(e.eval_principal(c(0.0, 0.0)), Err(EvalError::Singularity(_))));
        let e = parse("1/z").unwrap();
        assert!(matches!(e.eval_principal(c(0.0, 0.0)), Ok(Value::Infinity)));
        let e = parse("z/z").unwrap();
        assert!(matches!(e.eval_principal(c(0.0, 0.0)), Err(EvalError::Undefined(_))));
        let e = parse("(z-1)^-2+3").unwrap();
        assert!(matches!(e.eval_principal(c(1.0, 0.0)), Ok(Value::Infinity)));
    }
}
