//! The perturbed system and its unperturbed flow `Ω(t, t0, ξ)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ode::{integrate, integrate_with_variational, Tolerances, Trajectory, VariationalField, VectorField};
use crate::scalar::{lit, Scalar};

/// Field depending on the small parameter and the detuning, `φ(t, x, ε, μ)`.
pub trait ForcingField<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: S, x: &[S], eps: S, mu: S, dx: &mut [S]);

    fn jacobian(&self, t: S, x: &[S], eps: S, mu: S, jac: &mut Matrix<S>) {
        let frozen = Frozen { field: self, eps, mu };
        crate::ode::finite_difference_jacobian(&frozen, t, x, jac);
    }
}

/// A forcing field with `ε` and `μ` held fixed.
pub struct Frozen<'a, S: Scalar, F: ForcingField<S> + ?Sized> {
    pub field: &'a F,
    pub eps: S,
    pub mu: S,
}

impl<S: Scalar, F: ForcingField<S> + ?Sized> VectorField<S> for Frozen<'_, S, F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        self.field.eval(t, x, self.eps, self.mu, dx)
    }
    fn jacobian(&self, t: S, x: &[S], jac: &mut Matrix<S>) {
        self.field.jacobian(t, x, self.eps, self.mu, jac)
    }
}

type ForcingFn<S> = dyn Fn(S, &[S], S, S, &mut [S]) + Send + Sync;
type ForcingJacFn<S> = dyn Fn(S, &[S], S, S, &mut Matrix<S>) + Send + Sync;

/// Closure-backed [`ForcingField`].
#[derive(Clone)]
pub struct FnForcing<S> {
    dim: usize,
    f: Arc<ForcingFn<S>>,
    jac: Option<Arc<ForcingJacFn<S>>>,
}

impl<S: Scalar> FnForcing<S> {
    pub fn new(dim: usize, f: impl Fn(S, &[S], S, S, &mut [S]) + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(S, &[S], S, S, &mut Matrix<S>) + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// Lifts an `(ε, μ)`-independent field.
    pub fn from_field<F: VectorField<S> + 'static>(field: F) -> Self {
        let field = Arc::new(field);
        let jf = field.clone();
        Self::new(field.dim(), move |t, x, _, _, dx| field.eval(t, x, dx)).with_jacobian(move |t, x, _, _, j| jf.jacobian(t, x, j))
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_, _, _, _, dx| dx.fill(S::zero())).with_jacobian(|_, _, _, _, j| j.as_mut_slice().fill(S::zero()))
    }
}

impl<S: Scalar> ForcingField<S> for FnForcing<S> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: S, x: &[S], eps: S, mu: S, dx: &mut [S]) {
        (self.f)(t, x, eps, mu, dx)
    }

    fn jacobian(&self, t: S, x: &[S], eps: S, mu: S, jac: &mut Matrix<S>) {
        match &self.jac {
            Some(j) => j(t, x, eps, mu, jac),
            None => {
                let frozen = Frozen { field: self, eps, mu };
                crate::ode::finite_difference_jacobian(&frozen, t, x, jac);
            }
        }
    }
}

/// How the small parameter enters the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    /// `ψ + ε²φ₁ + ε³φ₂`.
    TwoTerm,
    /// `ψ + εφ`, with `φ` held in the second slot and the first slot zero.
    OneTerm,
}

impl Profile {
    /// Powers of `ε` multiplying the first and second perturbation slots.
    pub fn powers(self) -> (i32, i32) {
        match self {
            Profile::TwoTerm => (2, 3),
            Profile::OneTerm => (1, 1),
        }
    }
}

/// `x' = ψ(t,x) + ε²φ₁(t,x) + ε³φ₂(t,x,ε)` (or the one-term variant), all `T`-periodic in `t`.
#[derive(Clone)]
pub struct PerturbedSystem<S: Scalar> {
    dim: usize,
    psi: Arc<dyn VectorField<S>>,
    phi1: Arc<dyn VectorField<S>>,
    phi2: Arc<dyn ForcingField<S>>,
    period: S,
    profile: Profile,
    tolerances: Tolerances<S>,
    cache: Arc<FlowCache<S>>,
}

impl<S: Scalar> fmt::Debug for PerturbedSystem<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedSystem")
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("profile", &self.profile)
            .field("tolerances", &self.tolerances)
            .finish_non_exhaustive()
    }
}

struct ZeroField(usize);

impl<S: Scalar> VectorField<S> for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _: S, _: &[S], dx: &mut [S]) {
        dx.fill(S::zero());
    }
    fn jacobian(&self, _: S, _: &[S], jac: &mut Matrix<S>) {
        jac.as_mut_slice().fill(S::zero());
    }
}

impl<S: Scalar> PerturbedSystem<S> {
    pub fn two_term(
        psi: impl VectorField<S> + 'static,
        phi1: impl VectorField<S> + 'static,
        phi2: impl ForcingField<S> + 'static,
        period: S,
    ) -> Result<Self> {
        Self::build(Arc::new(psi), Arc::new(phi1), Arc::new(phi2), period, Profile::TwoTerm)
    }

    pub fn one_term(psi: impl VectorField<S> + 'static, phi: impl ForcingField<S> + 'static, period: S) -> Result<Self> {
        let n = psi.dim();
        Self::build(Arc::new(psi), Arc::new(ZeroField(n)), Arc::new(phi), period, Profile::OneTerm)
    }

    pub fn from_parts(
        psi: Arc<dyn VectorField<S>>,
        phi1: Arc<dyn VectorField<S>>,
        phi2: Arc<dyn ForcingField<S>>,
        period: S,
        profile: Profile,
    ) -> Result<Self> {
        Self::build(psi, phi1, phi2, period, profile)
    }

    fn build(
        psi: Arc<dyn VectorField<S>>,
        phi1: Arc<dyn VectorField<S>>,
        phi2: Arc<dyn ForcingField<S>>,
        period: S,
        profile: Profile,
    ) -> Result<Self> {
        let dim = psi.dim();
        for d in [phi1.dim(), phi2.dim()] {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
        }
        if !(period > S::zero() && period.is_finite()) {
            return Err(Error::InvalidInput(format!("period must be positive, got {period}")));
        }
        Ok(Self {
            dim,
            psi,
            phi1,
            phi2,
            period,
            profile,
            tolerances: Tolerances::default(),
            cache: Arc::new(FlowCache::default()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> S {
        self.period
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn tolerances(&self) -> Tolerances<S> {
        self.tolerances
    }

    pub fn psi(&self) -> &dyn VectorField<S> {
        self.psi.as_ref()
    }

    pub fn phi1(&self) -> &dyn VectorField<S> {
        self.phi1.as_ref()
    }

    pub fn phi2(&self) -> &dyn ForcingField<S> {
        self.phi2.as_ref()
    }

    pub(crate) fn phi1_arc(&self) -> Arc<dyn VectorField<S>> {
        self.phi1.clone()
    }

    pub(crate) fn phi2_arc(&self) -> Arc<dyn ForcingField<S>> {
        self.phi2.clone()
    }

    pub(crate) fn cache(&self) -> &FlowCache<S> {
        &self.cache
    }

    /// Same fields with a different period. The flow cache is not shared.
    pub fn with_period(&self, period: S) -> Result<Self> {
        let mut s = Self::build(self.psi.clone(), self.phi1.clone(), self.phi2.clone(), period, self.profile)?;
        s.tolerances = self.tolerances;
        Ok(s)
    }

    pub fn with_tolerances(&self, tolerances: Tolerances<S>) -> Result<Self> {
        tolerances.validate()?;
        let mut s = self.clone();
        s.tolerances = tolerances;
        s.cache = Arc::new(FlowCache::default());
        Ok(s)
    }

    /// Same `ψ`, period and tolerances (hence the same flow cache) with a new second-slot field.
    pub fn with_phi2(&self, phi2: Arc<dyn ForcingField<S>>) -> Result<Self> {
        if phi2.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: phi2.dim() });
        }
        let mut s = self.clone();
        s.phi2 = phi2;
        Ok(s)
    }

    /// Same `ψ`, period and cache with a new first-slot field.
    pub fn with_phi1(&self, phi1: Arc<dyn VectorField<S>>) -> Result<Self> {
        if phi1.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: phi1.dim() });
        }
        let mut s = self.clone();
        s.phi1 = phi1;
        Ok(s)
    }

    /// Largest sampled periodicity defect of ψ, φ₁, φ₂ relative to `1 + ‖f‖`,
    /// probed on `probes` quasi-random `(t, x)` points in `[0,T] × [-box, box]ⁿ`.
    pub fn periodicity_defect(&self, probes: usize, half_box: S) -> S {
        let n = self.dim;
        let mut worst = S::zero();
        let mut a = vec![S::zero(); n];
        let mut b = vec![S::zero(); n];
        let eps_probe = lit::<S>(0.5);
        for k in 0..probes {
            let t = self.period * quasi_random(k, 0);
            let x: Vec<S> = (0..n).map(|i| half_box * (lit::<S>(2.0) * quasi_random(k, i + 1) - S::one())).collect();
            let mut check = |a: &[S], b: &[S]| {
                let diff = crate::linalg::distance(a, b);
                let scale = S::one() + crate::linalg::norm(a);
                worst = worst.max(diff / scale);
            };
            self.psi.eval(t, &x, &mut a);
            self.psi.eval(t + self.period, &x, &mut b);
            check(&a, &b);
            self.phi1.eval(t, &x, &mut a);
            self.phi1.eval(t + self.period, &x, &mut b);
            check(&a, &b);
            self.phi2.eval(t, &x, eps_probe, S::zero(), &mut a);
            self.phi2.eval(t + self.period, &x, eps_probe, S::zero(), &mut b);
            check(&a, &b);
        }
        worst
    }

    /// Runs the sampled periodicity probe at the `1e-12` threshold.
    pub fn validate_periodicity(&self) -> Result<()> {
        let defect = self.periodicity_defect(64, lit(3.0));
        if defect > lit(1e-12) {
            return Err(Error::InvalidInput(format!("fields are not {}-periodic (defect {:e})", self.period, defect.as_f64())));
        }
        Ok(())
    }
}

/// Weyl sequence in `[0, 1)` used for deterministic probes.
pub(crate) fn quasi_random<S: Scalar>(k: usize, axis: usize) -> S {
    const ALPHAS: [f64; 6] = [
        0.618_033_988_749_894_8,
        0.414_213_562_373_095_1,
        0.732_050_807_568_877_2,
        0.236_067_977_499_789_7,
        0.645_751_311_064_590_6,
        0.316_624_790_355_399_8,
    ];
    let alpha = ALPHAS[axis % ALPHAS.len()] + 0.1 * (axis / ALPHAS.len()) as f64;
    lit(((k as f64 + 1.0) * alpha).fract())
}

fn check_horizon<S: Scalar>(system: &PerturbedSystem<S>, span: S) -> Result<()> {
    if span.abs() > lit::<S>(10.0) * system.period() {
        return Err(Error::InvalidInput(format!("time span {span} exceeds 10 periods")));
    }
    Ok(())
}

/// `Ω(t, t0, ξ)`: the unperturbed flow through `ξ` at time `t0`, evaluated at `t`.
pub fn flow_point<S: Scalar>(system: &PerturbedSystem<S>, t: S, t0: S, xi: &[S]) -> Result<Vec<S>> {
    check_horizon(system, t - t0)?;
    if xi.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: xi.len() });
    }
    if t == t0 {
        return Ok(xi.to_vec());
    }
    Ok(integrate(system.psi(), t0, t, xi, system.tolerances())?.final_state().to_vec())
}

/// `Y = ∂Ω/∂z(t,0,ξ)` and `Yinv = ∂Ω/∂z(0,t,Ω(t,0,ξ))`, the second from a
/// backward variational integration started at `Ω(t,0,ξ)`.
pub fn fundamental_pair<S: Scalar>(system: &PerturbedSystem<S>, t: S, xi: &[S]) -> Result<(Matrix<S>, Matrix<S>)> {
    check_horizon(system, t)?;
    let n = system.dim();
    if xi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: xi.len() });
    }
    if t == S::zero() {
        return Ok((Matrix::identity(n), Matrix::identity(n)));
    }
    let tol = system.tolerances();
    let (fwd, y) = integrate_with_variational(system.psi(), S::zero(), t, xi, tol)?;
    let (_, yinv) = integrate_with_variational(system.psi(), t, S::zero(), fwd.final_state(), tol)?;
    let (y, yinv) = (y.final_matrix(), yinv.final_matrix());
    if !y.is_finite() || !yinv.is_finite() {
        return Err(Error::NonFiniteState { t: t.as_f64() });
    }
    let defect = yinv.mul(&y).identity_defect();
    if defect > lit(1e-6) {
        return Err(Error::IdentityDefect { defect: defect.as_f64() });
    }
    Ok((y, yinv))
}

/// Augmented solution `(x, Y, Z)` over `[0, T]` from `ξ`, where `Y` is the
/// fundamental matrix and `Z = Y⁻¹` solves the adjoint equation.
#[derive(Debug)]
pub struct FundamentalTrack<S> {
    xi: Vec<S>,
    n: usize,
    traj: Trajectory<S>,
}

impl<S: Scalar> FundamentalTrack<S> {
    pub fn compute(system: &PerturbedSystem<S>, xi: &[S]) -> Result<Self> {
        let n = system.dim();
        if xi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: xi.len() });
        }
        let aug = VariationalField::new(system.psi(), true);
        let traj = integrate(&aug, S::zero(), system.period(), &aug.initial_state(xi)?, system.tolerances())?;
        Ok(Self { xi: xi.to_vec(), n, traj })
    }

    pub fn xi(&self) -> &[S] {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[S] {
        self.traj.times()
    }

    pub fn span_end(&self) -> S {
        self.traj.t_end()
    }

    /// Full augmented state at `t` (length `n + 2n²`).
    pub fn eval_into(&self, t: S, out: &mut [S]) -> Result<()> {
        self.traj.eval_into(t, out)
    }

    pub fn augmented_dim(&self) -> usize {
        self.traj.dim()
    }

    pub fn state_at(&self, t: S) -> Result<Vec<S>> {
        Ok(self.traj.eval(t)?[..self.n].to_vec())
    }

    pub fn fundamental_at(&self, t: S) -> Result<Matrix<S>> {
        let n = self.n;
        Ok(Matrix::from_row_slice(n, n, &self.traj.eval(t)?[n..n + n * n]))
    }

    pub fn inverse_at(&self, t: S) -> Result<Matrix<S>> {
        let n = self.n;
        Ok(Matrix::from_row_slice(n, n, &self.traj.eval(t)?[n + n * n..]))
    }

    /// `Ω(T, 0, ξ)`.
    pub fn return_state(&self) -> &[S] {
        &self.traj.final_state()[..self.n]
    }

    /// `∂Ω/∂z(T, 0, ξ)`.
    pub fn monodromy(&self) -> Matrix<S> {
        let n = self.n;
        Matrix::from_row_slice(n, n, &self.traj.final_state()[n..n + n * n])
    }
}

/// Insert-once cache of [`FundamentalTrack`]s keyed by `ξ` rounded to a
/// `2⁻⁴⁴` lattice. Tracks are always integrated from the rounded point so a
/// lookup never depends on which caller inserted first.
#[derive(Default)]
pub struct FlowCache<S> {
    tracks: RwLock<HashMap<Vec<i64>, Arc<FundamentalTrack<S>>>>,
}

const CACHE_QUANTUM: f64 = 1.0 / 17_592_186_044_416.0; // 2^-44

impl<S: Scalar> FlowCache<S> {
    fn key(xi: &[S]) -> Option<(Vec<i64>, Vec<S>)> {
        let mut key = Vec::with_capacity(xi.len());
        let mut canon = Vec::with_capacity(xi.len());
        for &v in xi {
            let q = (v.as_f64() / CACHE_QUANTUM).round();
            if !q.is_finite() || q.abs() > 9.0e15 {
                return None;
            }
            key.push(q as i64);
            canon.push(S::lit(q * CACHE_QUANTUM));
        }
        Some((key, canon))
    }

    pub fn len(&self) -> usize {
        self.tracks.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        if let Ok(mut m) = self.tracks.write() {
            m.clear();
        }
    }
}

/// Cached track for `ξ` over one period.
pub fn fundamental_track<S: Scalar>(system: &PerturbedSystem<S>, xi: &[S]) -> Result<Arc<FundamentalTrack<S>>> {
    let cache = system.cache();
    let Some((key, canon)) = FlowCache::<S>::key(xi) else {
        return Ok(Arc::new(FundamentalTrack::compute(system, xi)?));
    };
    if let Some(hit) = cache.tracks.read().ok().and_then(|m| m.get(&key).cloned()) {
        return Ok(hit);
    }
    let track = Arc::new(FundamentalTrack::compute(system, &canon)?);
    let mut map = cache.tracks.write().map_err(|_| Error::InvalidInput("flow cache poisoned".into()))?;
    Ok(map.entry(key).or_insert(track).clone())
}
