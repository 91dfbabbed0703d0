//! Linearized responses `ηᵢ(t, s, ξ)`: solutions of the variational equation
//! along `Ω(·, 0, ξ)` forced by `φᵢ` and vanishing at `s`.
//!
//! Two independent routes are provided. [`eta_direct`] integrates the
//! inhomogeneous linear ODE. [`eta_lemma1`] uses the variation-of-constants
//! representation `Y(t) ∫ₛᵗ Y(τ)⁻¹ φᵢ(τ, Ω(τ,0,ξ)) dτ`, with the integral
//! evaluated by adaptive Gauss–Kronrod quadrature on the dense output of the
//! cached `(x, Y, Y⁻¹)` track.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{flow_point, fundamental_track, FundamentalTrack, PerturbedSystem};
use crate::linalg::Matrix;
use crate::ode::{integrate, VectorField};
use crate::scalar::{lit, Scalar};

/// Which perturbation slot forces the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    /// `φ₁(t, x)`.
    First,
    /// `φ₂(t, x, 0)`; for one-term systems this is the single `φ`.
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaQuery<S> {
    pub which: Response,
    pub s: S,
    pub t: S,
    pub xi: Vec<S>,
}

impl<S: Scalar> EtaQuery<S> {
    pub fn new(which: Response, s: S, t: S, xi: Vec<S>) -> Self {
        Self { which, s, t, xi }
    }

    fn validate(&self, system: &PerturbedSystem<S>) -> Result<()> {
        let period = system.period();
        let slack = lit::<S>(1e-12) * period;
        for (name, v) in [("s", self.s), ("t", self.t)] {
            if !(v >= -slack && v <= period + slack) {
                return Err(Error::InvalidInput(format!("{name} = {v} outside [0, {period}]")));
            }
        }
        if self.xi.len() != system.dim() {
            return Err(Error::DimensionMismatch { expected: system.dim(), got: self.xi.len() });
        }
        Ok(())
    }
}

fn eval_forcing<S: Scalar>(system: &PerturbedSystem<S>, which: Response, t: S, x: &[S], out: &mut [S]) {
    match which {
        Response::First => system.phi1().eval(t, x, out),
        Response::Second => system.phi2().eval(t, x, S::zero(), S::zero(), out),
    }
}

/// `(x, y)` with `x' = ψ(t,x)` and `y' = ∂ψ/∂x(t,x) y + φᵢ(t,x)`.
struct ResponseField<'a, S: Scalar> {
    system: &'a PerturbedSystem<S>,
    which: Response,
}

impl<S: Scalar> VectorField<S> for ResponseField<'_, S> {
    fn dim(&self) -> usize {
        2 * self.system.dim()
    }

    fn eval(&self, t: S, state: &[S], d: &mut [S]) {
        let n = self.system.dim();
        let (x, y) = state.split_at(n);
        let (dx, dy) = d.split_at_mut(n);
        self.system.psi().eval(t, x, dx);
        let mut jac = Matrix::zeros(n, n);
        self.system.psi().jacobian(t, x, &mut jac);
        eval_forcing(self.system, self.which, t, x, dy);
        for i in 0..n {
            let mut s = dy[i];
            for k in 0..n {
                s = s + jac[(i, k)] * y[k];
            }
            dy[i] = s;
        }
    }
}

/// `ηᵢ(t, s, ξ)` by integrating the forced variational equation from `s` to `t`.
pub fn eta_direct<S: Scalar>(system: &PerturbedSystem<S>, q: &EtaQuery<S>) -> Result<Vec<S>> {
    q.validate(system)?;
    let n = system.dim();
    if q.t == q.s {
        return Ok(vec![S::zero(); n]);
    }
    let x_s = flow_point(system, q.s, S::zero(), &q.xi)?;
    let mut start = x_s;
    start.extend(std::iter::repeat(S::zero()).take(n));
    let field = ResponseField { system, which: q.which };
    let traj = integrate(&field, q.s, q.t, &start, system.tolerances())?;
    Ok(traj.final_state()[n..].to_vec())
}

const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: usize = 30;

// Gauss–Kronrod 7/15 nodes on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel of a vector integrand; returns (Kronrod, error estimate).
fn gk15<S: Scalar>(f: &mut dyn FnMut(S, &mut [S]) -> Result<()>, a: S, b: S, dim: usize) -> Result<(Vec<S>, S)> {
    let half = (b - a) * lit(0.5);
    let center = (a + b) * lit(0.5);
    let mut kron = vec![S::zero(); dim];
    let mut gauss = vec![S::zero(); dim];
    let mut v = vec![S::zero(); dim];
    f(center, &mut v)?;
    for i in 0..dim {
        kron[i] = v[i] * lit(WGK[7]);
        gauss[i] = v[i] * lit(WG[3]);
    }
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let wk = lit::<S>(WGK[j]);
        let wg = if j % 2 == 1 { Some(lit::<S>(WG[j / 2])) } else { None };
        for x in [center - dx, center + dx] {
            f(x, &mut v)?;
            for i in 0..dim {
                kron[i] = kron[i] + wk * v[i];
                if let Some(wg) = wg {
                    gauss[i] = gauss[i] + wg * v[i];
                }
            }
        }
    }
    let mut err = S::zero();
    for i in 0..dim {
        kron[i] = kron[i] * half;
        gauss[i] = gauss[i] * half;
        err = err.max((kron[i] - gauss[i]).abs());
    }
    Ok((kron, err))
}

fn adaptive_panel<S: Scalar>(
    f: &mut dyn FnMut(S, &mut [S]) -> Result<()>,
    a: S,
    b: S,
    dim: usize,
    tol: S,
    depth: usize,
) -> Result<Vec<S>> {
    let (val, err) = gk15(f, a, b, dim)?;
    let scale = S::one().max(crate::linalg::norm(&val));
    if err <= tol * scale || a == b {
        return Ok(val);
    }
    if depth >= QUAD_MAX_DEPTH {
        return Err(Error::QuadratureFailure { a: a.as_f64(), b: b.as_f64(), estimate: err.as_f64() });
    }
    let m = (a + b) * lit(0.5);
    let half_tol = tol * lit(0.5);
    let mut left = adaptive_panel(f, a, m, dim, half_tol, depth + 1)?;
    let right = adaptive_panel(f, m, b, dim, half_tol, depth + 1)?;
    for (l, r) in left.iter_mut().zip(right) {
        *l = *l + r;
    }
    Ok(left)
}

/// Running integral `C(τ) = ∫₀^τ Y(σ)⁻¹ φᵢ(σ, Ω(σ,0,ξ)) dσ` tabulated on the
/// track's step grid.
pub struct ResponseIntegral<'a, S: Scalar> {
    system: &'a PerturbedSystem<S>,
    track: Arc<FundamentalTrack<S>>,
    which: Response,
    cumulative: Vec<Vec<S>>,
}

impl<'a, S: Scalar> ResponseIntegral<'a, S> {
    pub fn new(system: &'a PerturbedSystem<S>, which: Response, xi: &[S]) -> Result<Self> {
        let track = fundamental_track(system, xi)?;
        let n = system.dim();
        let times = track.times().to_vec();
        let mut cumulative = Vec::with_capacity(times.len());
        let mut acc = vec![S::zero(); n];
        cumulative.push(acc.clone());
        let mut this = Self { system, track, which, cumulative: Vec::new() };
        let tol = this.panel_tolerance();
        for w in times.windows(2) {
            let piece = this.integrate_piece(w[0], w[1], tol)?;
            for (a, p) in acc.iter_mut().zip(&piece) {
                *a = *a + *p;
            }
            cumulative.push(acc.clone());
        }
        this.cumulative = cumulative;
        Ok(this)
    }

    pub fn track(&self) -> &FundamentalTrack<S> {
        &self.track
    }

    fn panel_tolerance(&self) -> S {
        let steps = (self.track.times().len().max(2) - 1) as f64;
        lit::<S>(QUAD_TOL) / lit(steps)
    }

    fn integrate_piece(&self, a: S, b: S, tol: S) -> Result<Vec<S>> {
        let n = self.system.dim();
        let track = &self.track;
        let system = self.system;
        let which = self.which;
        let mut aug = vec![S::zero(); track.augmented_dim()];
        let mut phi = vec![S::zero(); n];
        let mut integrand = |tau: S, out: &mut [S]| -> Result<()> {
            track.eval_into(tau, &mut aug)?;
            let (x, rest) = aug.split_at(n);
            let z = &rest[n * n..];
            eval_forcing(system, which, tau, x, &mut phi);
            for i in 0..n {
                out[i] = (0..n).map(|k| z[i * n + k] * phi[k]).sum();
            }
            Ok(())
        };
        adaptive_panel(&mut integrand, a, b, n, tol, 0)
    }

    /// `C(τ)` for `τ ∈ [0, T]`.
    pub fn integral_to(&self, tau: S) -> Result<Vec<S>> {
        let times = self.track.times();
        let mut k = times.partition_point(|&g| g <= tau).saturating_sub(1);
        if times[k] == tau {
            return Ok(self.cumulative[k].clone());
        }
        if k + 1 >= times.len() {
            k = times.len().saturating_sub(2);
        }
        let piece = self.integrate_piece(times[k], tau, self.panel_tolerance())?;
        Ok(self.cumulative[k].iter().zip(piece).map(|(&c, p)| c + p).collect())
    }

    /// `ηᵢ(t, s, ξ) = Y(t) (C(t) − C(s))`.
    pub fn eta(&self, t: S, s: S) -> Result<Vec<S>> {
        let n = self.system.dim();
        if t == s {
            return Ok(vec![S::zero(); n]);
        }
        let ct = self.integral_to(t)?;
        let cs = self.integral_to(s)?;
        let diff: Vec<S> = ct.iter().zip(&cs).map(|(&a, &b)| a - b).collect();
        Ok(self.track.fundamental_at(t)?.mul_vec(&diff))
    }

    /// `ηᵢ(T,s,ξ) − ηᵢ(0,s,ξ) = C(T) − (I − Y(T)) (C(T) − C(s))`.
    pub fn period_gap(&self, s: S) -> Result<Vec<S>> {
        let total = self.cumulative.last().expect("non-empty").clone();
        let cs = self.integral_to(s)?;
        let tail: Vec<S> = total.iter().zip(&cs).map(|(&a, &b)| a - b).collect();
        let n = self.system.dim();
        let i_minus_y = Matrix::identity(n).sub(&self.track.monodromy());
        let correction = i_minus_y.mul_vec(&tail);
        Ok(total.iter().zip(correction).map(|(&a, c)| a - c).collect())
    }

    /// `C(T)`, equal to the gap whenever `Y(T) = I`.
    pub fn full_period_integral(&self) -> &[S] {
        self.cumulative.last().expect("non-empty")
    }
}

/// `ηᵢ(t, s, ξ)` by the variation-of-constants quadrature.
pub fn eta_lemma1<S: Scalar>(system: &PerturbedSystem<S>, q: &EtaQuery<S>) -> Result<Vec<S>> {
    q.validate(system)?;
    if q.t == q.s {
        return Ok(vec![S::zero(); system.dim()]);
    }
    ResponseIntegral::new(system, q.which, &q.xi)?.eta(q.t, q.s)
}

/// `ηᵢ(T, s, ξ) − ηᵢ(0, s, ξ)`.
pub fn eta_period_gap<S: Scalar>(system: &PerturbedSystem<S>, which: Response, s: S, xi: &[S]) -> Result<Vec<S>> {
    EtaQuery::new(which, s, s, xi.to_vec()).validate(system)?;
    ResponseIntegral::new(system, which, xi)?.period_gap(s)
}
