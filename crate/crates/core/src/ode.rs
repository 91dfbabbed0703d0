//! Adaptive Dormand–Prince 5(4) integration with dense output, optionally
//! augmented with the matrix variational equation.
//!
//! The step controller follows the classical PI scheme (β = 0.04) on the
//! RMS-weighted embedded error estimate. Each accepted step stores the five
//! coefficient vectors of the fourth-order continuous extension so that the
//! solution can be sampled anywhere on the span without re-integration.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{lit, Scalar};

/// Right-hand side of a (possibly non-autonomous) ODE `x' = f(t, x)`.
pub trait VectorField<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: S, x: &[S], dx: &mut [S]);

    /// `∂f/∂x`; defaults to central finite differences.
    fn jacobian(&self, t: S, x: &[S], jac: &mut Matrix<S>) {
        finite_difference_jacobian(self, t, x, jac);
    }
}

impl<S: Scalar, F: VectorField<S> + ?Sized> VectorField<S> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        (**self).eval(t, x, dx)
    }
    fn jacobian(&self, t: S, x: &[S], jac: &mut Matrix<S>) {
        (**self).jacobian(t, x, jac)
    }
}

impl<S: Scalar, F: VectorField<S> + ?Sized> VectorField<S> for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        (**self).eval(t, x, dx)
    }
    fn jacobian(&self, t: S, x: &[S], jac: &mut Matrix<S>) {
        (**self).jacobian(t, x, jac)
    }
}

type EvalFn<S> = dyn Fn(S, &[S], &mut [S]) + Send + Sync;
type JacFn<S> = dyn Fn(S, &[S], &mut Matrix<S>) + Send + Sync;

/// Closure-backed vector field.
#[derive(Clone)]
pub struct FnField<S> {
    dim: usize,
    f: Arc<EvalFn<S>>,
    jac: Option<Arc<JacFn<S>>>,
}

impl<S: Scalar> FnField<S> {
    pub fn new(dim: usize, f: impl Fn(S, &[S], &mut [S]) + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(S, &[S], &mut Matrix<S>) + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }
}

impl<S: Scalar> std::fmt::Debug for FnField<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).field("analytic_jacobian", &self.jac.is_some()).finish()
    }
}

impl<S: Scalar> VectorField<S> for FnField<S> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        (self.f)(t, x, dx)
    }

    fn jacobian(&self, t: S, x: &[S], jac: &mut Matrix<S>) {
        match &self.jac {
            Some(j) => j(t, x, jac),
            None => finite_difference_jacobian(self, t, x, jac),
        }
    }
}

/// Central differences with `h = max(c, c·‖x‖)`, `c = 1e-6` for `f64`.
pub fn finite_difference_jacobian<S: Scalar, F: VectorField<S> + ?Sized>(field: &F, t: S, x: &[S], jac: &mut Matrix<S>) {
    let n = field.dim();
    let c = S::fd_base_step();
    let h = c.max(c * crate::linalg::norm(x));
    let two_h = h + h;
    let mut xp = x.to_vec();
    let mut fp = vec![S::zero(); n];
    let mut fm = vec![S::zero(); n];
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        field.eval(t, &xp, &mut fp);
        xp[j] = orig - h;
        field.eval(t, &xp, &mut fm);
        xp[j] = orig;
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / two_h;
        }
    }
}

/// Relative disagreement between the field's Jacobian and finite differences at `(t, x)`.
pub fn jacobian_check<S: Scalar, F: VectorField<S> + ?Sized>(field: &F, t: S, x: &[S]) -> S {
    let n = field.dim();
    let mut analytic = Matrix::zeros(n, n);
    let mut numeric = Matrix::zeros(n, n);
    field.jacobian(t, x, &mut analytic);
    finite_difference_jacobian(field, t, x, &mut numeric);
    analytic.sub(&numeric).max_abs() / S::one().max(analytic.max_abs())
}

/// Absolute and relative tolerance pair for the embedded error test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<S> {
    pub abs_tol: S,
    pub rel_tol: S,
}

impl<S: Scalar> Tolerances<S> {
    pub fn new(abs_tol: S, rel_tol: S) -> Self {
        Self { abs_tol, rel_tol }
    }

    pub fn uniform(tol: S) -> Self {
        Self { abs_tol: tol, rel_tol: tol }
    }

    pub fn scaled(self, factor: S) -> Self {
        Self { abs_tol: self.abs_tol * factor, rel_tol: self.rel_tol * factor }
    }

    pub fn validate(&self) -> Result<()> {
        for tol in [self.abs_tol, self.rel_tol] {
            let v = tol.as_f64();
            if !(1e-14..=1e-2).contains(&v) {
                return Err(Error::InvalidTolerance(v));
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Default for Tolerances<S> {
    fn default() -> Self {
        Self::uniform(lit(1e-10))
    }
}

const MAX_STEPS: usize = 1_000_000;

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Tableau<S> {
    c: [S; 4],
    a: [S; 19],
    e: [S; 6],
    d: [S; 6],
}

impl<S: Scalar> Tableau<S> {
    fn new() -> Self {
        Self {
            c: [lit(C2), lit(C3), lit(C4), lit(C5)],
            a: [
                lit(A21),
                lit(A31),
                lit(A32),
                lit(A41),
                lit(A42),
                lit(A43),
                lit(A51),
                lit(A52),
                lit(A53),
                lit(A54),
                lit(A61),
                lit(A62),
                lit(A63),
                lit(A64),
                lit(A65),
                lit(A71),
                lit(A73),
                lit(A74),
                lit(A75),
            ],
            e: [lit(E1), lit(E3), lit(E4), lit(E5), lit(E6), lit(E7)],
            d: [lit(D1), lit(D3), lit(D4), lit(D5), lit(D6), lit(D7)],
        }
    }
}

/// Dense solution of an initial value problem.
///
/// `times` is strictly monotone in the direction of integration. Sampling at a
/// stored grid time returns the stored state bit-for-bit.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    dim: usize,
    times: Vec<S>,
    states: Vec<S>,
    dense: Vec<S>,
    tolerances: Tolerances<S>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn tolerances(&self) -> Tolerances<S> {
        self.tolerances
    }

    pub fn t_start(&self) -> S {
        self.times[0]
    }

    pub fn t_end(&self) -> S {
        self.times[self.times.len() - 1]
    }

    pub fn state(&self, k: usize) -> &[S] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn initial_state(&self) -> &[S] {
        self.state(0)
    }

    pub fn final_state(&self) -> &[S] {
        self.state(self.times.len() - 1)
    }

    fn forward(&self) -> bool {
        self.t_end() >= self.t_start()
    }

    /// Index of the step containing `t`, or `None` when `t` is a grid time
    /// (returned as `Err(k)`).
    fn locate(&self, t: S) -> Result<std::result::Result<usize, usize>> {
        let (lo, hi) = if self.forward() { (self.t_start(), self.t_end()) } else { (self.t_end(), self.t_start()) };
        let slack = lit::<S>(64.0) * S::epsilon() * lo.abs().max(hi.abs()).max(S::one());
        if t < lo - slack || t > hi + slack || t.is_nan() {
            return Err(Error::OutOfRange { t: t.as_f64(), start: self.t_start().as_f64(), end: self.t_end().as_f64() });
        }
        let fwd = self.forward();
        // first index whose time is past t in the integration direction
        let idx = self.times.partition_point(|&g| if fwd { g <= t } else { g >= t });
        if idx > 0 && self.times[idx - 1] == t {
            return Ok(Err(idx - 1));
        }
        let step = idx.saturating_sub(1).min(self.steps().saturating_sub(1));
        Ok(Ok(step))
    }

    /// Writes the interpolated state at `t` into `out`.
    pub fn eval_into(&self, t: S, out: &mut [S]) -> Result<()> {
        let n = self.dim;
        if self.steps() == 0 {
            out.copy_from_slice(self.state(0));
            return Ok(());
        }
        match self.locate(t)? {
            Err(k) => out.copy_from_slice(self.state(k)),
            Ok(k) => {
                let h = self.times[k + 1] - self.times[k];
                let theta = (t - self.times[k]) / h;
                let theta1 = S::one() - theta;
                let r = &self.dense[k * 5 * n..(k + 1) * 5 * n];
                for i in 0..n {
                    out[i] = r[i]
                        + theta * (r[n + i] + theta1 * (r[2 * n + i] + theta * (r[3 * n + i] + theta1 * r[4 * n + i])));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: S) -> Result<Vec<S>> {
        let mut out = vec![S::zero(); self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Restricts the trajectory to the component range `start..start + dim`.
    pub fn project(&self, start: usize, dim: usize) -> Self {
        let n = self.dim;
        assert!(start + dim <= n, "projection out of bounds");
        let points = self.times.len();
        let mut states = Vec::with_capacity(points * dim);
        for k in 0..points {
            states.extend_from_slice(&self.states[k * n + start..k * n + start + dim]);
        }
        let mut dense = Vec::with_capacity(self.steps() * 5 * dim);
        for k in 0..self.steps() {
            for c in 0..5 {
                let base = k * 5 * n + c * n + start;
                dense.extend_from_slice(&self.dense[base..base + dim]);
            }
        }
        Self { dim, times: self.times.clone(), states, dense, tolerances: self.tolerances }
    }
}

/// Fundamental matrices `Y(t)` of the variational equation along a trajectory.
#[derive(Debug, Clone)]
pub struct FundamentalPath<S> {
    n: usize,
    path: Trajectory<S>,
}

impl<S: Scalar> FundamentalPath<S> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[S] {
        self.path.times()
    }

    pub fn matrix(&self, k: usize) -> Matrix<S> {
        Matrix::from_row_slice(self.n, self.n, self.path.state(k))
    }

    pub fn final_matrix(&self) -> Matrix<S> {
        Matrix::from_row_slice(self.n, self.n, self.path.final_state())
    }

    pub fn matrix_at(&self, t: S) -> Result<Matrix<S>> {
        Ok(Matrix::from_row_slice(self.n, self.n, &self.path.eval(t)?))
    }
}

/// Integrates `x' = f(t, x)` from `t0` to `t1` (either direction).
pub fn integrate<S: Scalar, F: VectorField<S> + ?Sized>(
    field: &F,
    t0: S,
    t1: S,
    x0: &[S],
    tolerances: Tolerances<S>,
) -> Result<Trajectory<S>> {
    tolerances.validate()?;
    if x0.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: x0.len() });
    }
    Dopri5::new(field, tolerances).run(t0, t1, x0)
}

/// Integrates the state together with `Y' = (∂f/∂x)(t, x(t)) Y`, `Y(t0) = I`,
/// under a single step-size controller.
pub fn integrate_with_variational<S: Scalar, F: VectorField<S> + ?Sized>(
    field: &F,
    t0: S,
    t1: S,
    x0: &[S],
    tolerances: Tolerances<S>,
) -> Result<(Trajectory<S>, FundamentalPath<S>)> {
    let n = field.dim();
    let aug = VariationalField::new(field, false);
    let traj = integrate(&aug, t0, t1, &aug.initial_state(x0)?, tolerances)?;
    Ok((traj.project(0, n), FundamentalPath { n, path: traj.project(n, n * n) }))
}

/// State plus variational matrix, and optionally the inverse matrix `Z`
/// solving the adjoint equation `Z' = −Z (∂f/∂x)`, `Z(t0) = I`.
pub struct VariationalField<'a, S: Scalar, F: VectorField<S> + ?Sized> {
    base: &'a F,
    with_inverse: bool,
    _scalar: std::marker::PhantomData<S>,
}

impl<'a, S: Scalar, F: VectorField<S> + ?Sized> VariationalField<'a, S, F> {
    pub fn new(base: &'a F, with_inverse: bool) -> Self {
        Self { base, with_inverse, _scalar: std::marker::PhantomData }
    }

    pub fn initial_state(&self, x0: &[S]) -> Result<Vec<S>> {
        let n = self.base.dim();
        if x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
        }
        let mut y = x0.to_vec();
        let eye = Matrix::<S>::identity(n);
        y.extend_from_slice(eye.as_slice());
        if self.with_inverse {
            y.extend_from_slice(eye.as_slice());
        }
        Ok(y)
    }
}

impl<S: Scalar, F: VectorField<S> + ?Sized> VectorField<S> for VariationalField<'_, S, F> {
    fn dim(&self) -> usize {
        let n = self.base.dim();
        if self.with_inverse {
            n + 2 * n * n
        } else {
            n + n * n
        }
    }

    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        let n = self.base.dim();
        self.base.eval(t, &x[..n], &mut dx[..n]);
        let mut jac = Matrix::zeros(n, n);
        self.base.jacobian(t, &x[..n], &mut jac);
        let y = &x[n..n + n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = S::zero();
                for k in 0..n {
                    s = s + jac[(i, k)] * y[k * n + j];
                }
                dx[n + i * n + j] = s;
            }
        }
        if self.with_inverse {
            let z = &x[n + n * n..];
            let off = n + n * n;
            for i in 0..n {
                for j in 0..n {
                    let mut s = S::zero();
                    for k in 0..n {
                        s = s + z[i * n + k] * jac[(k, j)];
                    }
                    dx[off + i * n + j] = -s;
                }
            }
        }
    }
}

struct Dopri5<'a, S: Scalar, F: VectorField<S> + ?Sized> {
    field: &'a F,
    tol: Tolerances<S>,
    tab: Tableau<S>,
}

impl<'a, S: Scalar, F: VectorField<S> + ?Sized> Dopri5<'a, S, F> {
    fn new(field: &'a F, tol: Tolerances<S>) -> Self {
        Self { field, tol, tab: Tableau::new() }
    }

    fn error_norm(&self, err: &[S], y0: &[S], y1: &[S]) -> S {
        let n = err.len();
        let sum: S = (0..n)
            .map(|i| {
                let sk = self.tol.abs_tol + self.tol.rel_tol * y0[i].abs().max(y1[i].abs());
                let r = err[i] / sk;
                r * r
            })
            .sum();
        (sum / lit(n as f64)).sqrt()
    }

    fn weighted_norm(&self, v: &[S], y: &[S]) -> S {
        let n = v.len();
        let sum: S = (0..n)
            .map(|i| {
                let r = v[i] / (self.tol.abs_tol + self.tol.rel_tol * y[i].abs());
                r * r
            })
            .sum();
        (sum / lit(n as f64)).sqrt()
    }

    fn initial_step(&self, t0: S, y0: &[S], f0: &[S], span: S) -> S {
        let n = y0.len();
        let d0 = self.weighted_norm(y0, y0);
        let d1 = self.weighted_norm(f0, y0);
        let tiny = lit::<S>(1e-10);
        let mut h0 = if d0 < tiny || d1 < tiny { lit(1e-6) } else { lit::<S>(0.01) * d0 / d1 };
        h0 = h0.min(span.abs());
        let dir = span.signum();
        let y1: Vec<S> = (0..n).map(|i| y0[i] + dir * h0 * f0[i]).collect();
        let mut f1 = vec![S::zero(); n];
        self.field.eval(t0 + dir * h0, &y1, &mut f1);
        let diff: Vec<S> = (0..n).map(|i| f1[i] - f0[i]).collect();
        let d2 = self.weighted_norm(&diff, y0) / h0;
        let dmax = d1.max(d2);
        let h1 = if !dmax.is_finite() {
            h0 * lit(1e-3)
        } else if dmax <= lit(1e-15) {
            lit::<S>(1e-6).max(h0 * lit(1e-3))
        } else {
            (lit::<S>(0.01) / dmax).powf(lit(0.2))
        };
        (lit::<S>(100.0) * h0).min(h1).min(span.abs())
    }

    fn run(&self, t0: S, t1: S, x0: &[S]) -> Result<Trajectory<S>> {
        let n = x0.len();
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t0.as_f64() });
        }
        let mut traj = Trajectory { dim: n, times: vec![t0], states: x0.to_vec(), dense: Vec::new(), tolerances: self.tol };
        if t1 == t0 {
            return Ok(traj);
        }
        let span = t1 - t0;
        let dir = span.signum();
        let tab = &self.tab;
        let a = &tab.a;

        let mut y = x0.to_vec();
        let mut k1 = vec![S::zero(); n];
        self.field.eval(t0, &y, &mut k1);
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t0.as_f64() });
        }
        let mut k2 = vec![S::zero(); n];
        let mut k3 = vec![S::zero(); n];
        let mut k4 = vec![S::zero(); n];
        let mut k5 = vec![S::zero(); n];
        let mut k6 = vec![S::zero(); n];
        let mut k7 = vec![S::zero(); n];
        let mut ys = vec![S::zero(); n];
        let mut y1 = vec![S::zero(); n];
        let mut err = vec![S::zero(); n];

        let beta = lit::<S>(0.04);
        let expo1 = lit::<S>(0.2) - beta * lit(0.75);
        let safe = lit::<S>(0.9);
        let facc1 = lit::<S>(5.0);
        let facc2 = lit::<S>(0.1);
        let mut facold = lit::<S>(1e-4);

        let mut t = t0;
        let mut h = self.initial_step(t0, &y, &k1, span).abs();
        let mut last_rejected = false;
        let mut steps = 0usize;

        loop {
            if steps >= MAX_STEPS {
                return Err(Error::MaxStepsExceeded { t: t.as_f64(), max_steps: MAX_STEPS });
            }
            let remaining = (t1 - t).abs();
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            if h <= lit::<S>(16.0) * S::epsilon() * t.abs().max(S::one()) {
                return Err(Error::StepSizeUnderflow { t: t.as_f64(), h: h.as_f64() });
            }
            let hs = dir * h;

            for i in 0..n {
                ys[i] = y[i] + hs * a[0] * k1[i];
            }
            self.field.eval(t + tab.c[0] * hs, &ys, &mut k2);
            for i in 0..n {
                ys[i] = y[i] + hs * (a[1] * k1[i] + a[2] * k2[i]);
            }
            self.field.eval(t + tab.c[1] * hs, &ys, &mut k3);
            for i in 0..n {
                ys[i] = y[i] + hs * (a[3] * k1[i] + a[4] * k2[i] + a[5] * k3[i]);
            }
            self.field.eval(t + tab.c[2] * hs, &ys, &mut k4);
            for i in 0..n {
                ys[i] = y[i] + hs * (a[6] * k1[i] + a[7] * k2[i] + a[8] * k3[i] + a[9] * k4[i]);
            }
            self.field.eval(t + tab.c[3] * hs, &ys, &mut k5);
            for i in 0..n {
                ys[i] = y[i] + hs * (a[10] * k1[i] + a[11] * k2[i] + a[12] * k3[i] + a[13] * k4[i] + a[14] * k5[i]);
            }
            let t_new = if last { t1 } else { t + hs };
            self.field.eval(t + hs, &ys, &mut k6);
            for i in 0..n {
                y1[i] = y[i] + hs * (a[15] * k1[i] + a[16] * k3[i] + a[17] * k4[i] + a[18] * k5[i] + lit::<S>(A76) * k6[i]);
            }
            self.field.eval(t + hs, &y1, &mut k7);
            steps += 1;

            let finite = y1.iter().chain(&k7).all(|v| v.is_finite());
            if !finite {
                h = h * lit(0.2);
                last_rejected = true;
                if h <= lit::<S>(16.0) * S::epsilon() * t.abs().max(S::one()) {
                    return Err(Error::NonFiniteState { t: t.as_f64() });
                }
                continue;
            }

            let e = &tab.e;
            for i in 0..n {
                err[i] = hs * (e[0] * k1[i] + e[1] * k3[i] + e[2] * k4[i] + e[3] * k5[i] + e[4] * k6[i] + e[5] * k7[i]);
            }
            let en = self.error_norm(&err, &y, &y1);
            let fac11 = en.powf(expo1);

            if en <= S::one() {
                let d = &tab.d;
                let base = traj.dense.len();
                traj.dense.resize(base + 5 * n, S::zero());
                let r = &mut traj.dense[base..];
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    r[i] = y[i];
                    r[n + i] = ydiff;
                    r[2 * n + i] = bspl;
                    r[3 * n + i] = ydiff - hs * k7[i] - bspl;
                    r[4 * n + i] =
                        hs * (d[0] * k1[i] + d[1] * k3[i] + d[2] * k4[i] + d[3] * k5[i] + d[4] * k6[i] + d[5] * k7[i]);
                }
                y.copy_from_slice(&y1);
                std::mem::swap(&mut k1, &mut k7);
                t = t_new;
                traj.times.push(t);
                traj.states.extend_from_slice(&y);
                if last {
                    return Ok(traj);
                }
                let mut fac = fac11 / facold.powf(beta);
                facold = en.max(lit(1e-4));
                fac = facc2.max(facc1.min(fac / safe));
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
                h = h_new;
            } else {
                h = h / facc1.min(fac11 / safe);
                last_rejected = true;
            }
        }
    }
}
