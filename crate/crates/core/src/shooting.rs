//! Finite-`ε` verification: Newton shooting on the period map of the full
//! system and the membership test `Ω(0,t,x(t)) ∈ U`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::degree::{Containment, PlanarRegion, Point};
use crate::error::{Error, Result};
use crate::flow::{flow_point, PerturbedSystem};
use crate::linalg::{distance, norm, Matrix};
use crate::ode::{integrate, integrate_with_variational, Tolerances, Trajectory, VectorField};
use crate::scalar::{lit, Scalar};
use crate::theorem::{Certificate, TheoremId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingSettings<S> {
    pub tolerances: Tolerances<S>,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub residual_tol: S,
    /// Minimum distance of every monodromy eigenvalue from `1`.
    pub singular_tol: S,
    /// Time samples per period for the membership test.
    pub membership_samples: usize,
}

impl<S: Scalar> Default for ShootingSettings<S> {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::uniform(lit(1e-12)),
            max_iterations: 50,
            max_halvings: 8,
            residual_tol: lit(1e-9),
            singular_tol: lit(1e-8),
            membership_samples: 128,
        }
    }
}

/// `x' = ψ(t,x) + εᵃ φ₁(t,x) + εᵇ φ₂(t/(1+εᵇμ), x, ε, μ)` with the profile's powers.
pub struct FullField<'a, S: Scalar> {
    system: &'a PerturbedSystem<S>,
    eps: S,
    mu: S,
    c1: S,
    c2: S,
    time_scale: S,
}

impl<'a, S: Scalar> FullField<'a, S> {
    /// `mu = None` leaves the forcing time unscaled.
    pub fn new(system: &'a PerturbedSystem<S>, eps: S, mu: Option<S>) -> Self {
        let (a, b) = system.profile().powers();
        let c2 = eps.powi(b);
        let time_scale = mu.map_or(S::one(), |m| S::one() / (S::one() + c2 * m));
        Self { system, eps, mu: mu.unwrap_or(S::zero()), c1: eps.powi(a), c2, time_scale }
    }
}

impl<S: Scalar> VectorField<S> for FullField<'_, S> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        let n = x.len();
        let mut p1 = vec![S::zero(); n];
        let mut p2 = vec![S::zero(); n];
        self.system.psi().eval(t, x, dx);
        self.system.phi1().eval(t, x, &mut p1);
        self.system.phi2().eval(t * self.time_scale, x, self.eps, self.mu, &mut p2);
        for i in 0..n {
            dx[i] = dx[i] + self.c1 * p1[i] + self.c2 * p2[i];
        }
    }

    fn jacobian(&self, t: S, x: &[S], jac: &mut Matrix<S>) {
        let n = x.len();
        let mut j1 = Matrix::zeros(n, n);
        let mut j2 = Matrix::zeros(n, n);
        self.system.psi().jacobian(t, x, jac);
        self.system.phi1().jacobian(t, x, &mut j1);
        self.system.phi2().jacobian(t * self.time_scale, x, self.eps, self.mu, &mut j2);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = jac[(i, j)] + self.c1 * j1[(i, j)] + self.c2 * j2[(i, j)];
            }
        }
    }
}

/// `(x, ∫ tr ∂f/∂x)`, for the Liouville cross-check.
struct TraceField<'a, S: Scalar> {
    base: &'a FullField<'a, S>,
}

impl<S: Scalar> VectorField<S> for TraceField<'_, S> {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    fn eval(&self, t: S, x: &[S], dx: &mut [S]) {
        let n = self.base.dim();
        self.base.eval(t, &x[..n], &mut dx[..n]);
        let mut j = Matrix::zeros(n, n);
        self.base.jacobian(t, &x[..n], &mut j);
        dx[n] = j.trace();
    }
}

/// Period of the orbit sought: `T(1 + εᵇμ)` with detuning, `T` otherwise.
pub fn orbit_period<S: Scalar>(system: &PerturbedSystem<S>, eps: S, mu: Option<S>) -> S {
    let (_, b) = system.profile().powers();
    match mu {
        Some(m) => system.period() * (S::one() + eps.powi(b) * m),
        None => system.period(),
    }
}

/// Eigenvalues of a square matrix: closed form for `n = 2`, Schur otherwise.
pub fn eigenvalues<S: Scalar>(m: &Matrix<S>) -> Vec<Complex<S>> {
    let n = m.rows();
    if n == 1 {
        return vec![Complex::new(m[(0, 0)], S::zero())];
    }
    if n == 2 {
        let half = m.trace() * lit(0.5);
        let disc = half * half - m.determinant();
        return if disc >= S::zero() {
            let r = disc.sqrt();
            vec![Complex::new(half + r, S::zero()), Complex::new(half - r, S::zero())]
        } else {
            let r = (-disc).sqrt();
            vec![Complex::new(half, r), Complex::new(half, -r)]
        };
    }
    let data: Vec<f64> = m.as_slice().iter().map(|v| v.as_f64()).collect();
    let dm = nalgebra::DMatrix::from_row_slice(n, n, &data);
    dm.complex_eigenvalues().iter().map(|z| Complex::new(lit(z.re), lit(z.im))).collect()
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit<S> {
    pub epsilon: S,
    pub mu: Option<S>,
    pub period: S,
    pub initial_state: Vec<S>,
    /// `‖Φ_T(ξ*) − ξ*‖`, re-evaluated at halved integration tolerance.
    pub residual: S,
    pub iterations: usize,
    pub monodromy: Matrix<S>,
    pub multipliers: Vec<Complex<S>>,
    /// `|det M − exp ∫ tr J| / max(1, |det M|)`.
    pub liouville_defect: S,
    /// `max ‖x(t)‖` over the period.
    pub amplitude: S,
    pub trajectory: Trajectory<S>,
}

impl<S: Scalar> PeriodicOrbit<S> {
    pub fn is_stable(&self) -> bool {
        self.multipliers.iter().all(|z| z.norm() < S::one())
    }
}

fn shoot<S: Scalar>(field: &FullField<'_, S>, period: S, xi: &[S], tol: Tolerances<S>) -> Result<(Vec<S>, Matrix<S>)> {
    let (traj, path) = integrate_with_variational(field, S::zero(), period, xi, tol)?;
    let g: Vec<S> = traj.final_state().iter().zip(xi).map(|(a, b)| *a - *b).collect();
    let m = path.final_matrix();
    if !m.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: period.as_f64() });
    }
    Ok((g, m))
}

fn residual_only<S: Scalar>(field: &FullField<'_, S>, period: S, xi: &[S], tol: Tolerances<S>) -> Result<S> {
    let traj = integrate(field, S::zero(), period, xi, tol)?;
    let r = distance(traj.final_state(), xi);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFiniteState { t: period.as_f64() })
    }
}

/// Damped Newton on `Φ_T(ξ) − ξ` for the full system.
pub fn find_periodic_orbit<S: Scalar>(
    system: &PerturbedSystem<S>,
    eps: S,
    mu: Option<S>,
    guess: &[S],
    settings: &ShootingSettings<S>,
) -> Result<PeriodicOrbit<S>> {
    if !(eps >= S::zero() && eps <= lit(0.5)) {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 0.5], got {eps}")));
    }
    if guess.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: guess.len() });
    }
    settings.tolerances.validate()?;
    let n = system.dim();
    let field = FullField::new(system, eps, mu);
    let period = orbit_period(system, eps, mu);
    let tol = settings.tolerances;
    let fine = tol.scaled(lit(0.5));
    let mut xi = guess.to_vec();
    let (mut g, mut m) = shoot(&field, period, &xi, tol)?;
    let mut res = norm(&g);
    for iter in 0..=settings.max_iterations {
        let multipliers = eigenvalues(&m);
        let closest = multipliers.iter().map(|z| (*z - Complex::new(S::one(), S::zero())).norm()).fold(S::infinity(), S::min);
        if closest < settings.singular_tol {
            return Err(Error::SingularJacobian { distance: closest.as_f64() });
        }
        if res < settings.residual_tol {
            let checked = residual_only(&field, period, &xi, fine)?;
            if checked < settings.residual_tol {
                return finish(&field, system, eps, mu, period, xi, checked, iter, m, multipliers, fine);
            }
        }
        if iter == settings.max_iterations {
            break;
        }
        let jac = m.sub(&Matrix::identity(n));
        let rhs: Vec<S> = g.iter().map(|v| -*v).collect();
        let step = jac.solve(&rhs).map_err(|_| Error::SingularJacobian { distance: closest.as_f64() })?;
        let mut alpha = S::one();
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<S> = xi.iter().zip(&step).map(|(x, d)| *x + alpha * *d).collect();
            if let Ok((g2, m2)) = shoot(&field, period, &trial, tol) {
                let r2 = norm(&g2);
                if r2 < res {
                    accepted = Some((trial, g2, m2, r2));
                    break;
                }
            }
            alpha = alpha * lit(0.5);
        }
        match accepted {
            Some((x2, g2, m2, r2)) => {
                xi = x2;
                g = g2;
                m = m2;
                res = r2;
            }
            None => return Err(Error::NewtonDiverged { iterations: iter + 1, residual: res.as_f64() }),
        }
    }
    Err(Error::NewtonDiverged { iterations: settings.max_iterations, residual: res.as_f64() })
}

#[allow(clippy::too_many_arguments)]
fn finish<S: Scalar>(
    field: &FullField<'_, S>,
    system: &PerturbedSystem<S>,
    eps: S,
    mu: Option<S>,
    period: S,
    xi: Vec<S>,
    residual: S,
    iterations: usize,
    monodromy: Matrix<S>,
    multipliers: Vec<Complex<S>>,
    tol: Tolerances<S>,
) -> Result<PeriodicOrbit<S>> {
    let n = system.dim();
    let aug = TraceField { base: field };
    let mut x0 = xi.clone();
    x0.push(S::zero());
    let full = integrate(&aug, S::zero(), period, &x0, tol)?;
    let trace_integral = full.final_state()[n];
    let det = monodromy.determinant();
    let liouville_defect = (det - trace_integral.exp()).abs() / det.abs().max(S::one());
    let trajectory = full.project(0, n);
    let mut amplitude = S::zero();
    for k in 0..trajectory.times().len() {
        amplitude = amplitude.max(norm(trajectory.state(k)));
    }
    let dense = 1024;
    let mut buf = vec![S::zero(); n];
    for k in 0..dense {
        trajectory.eval_into(period * lit(k as f64) / lit(dense as f64), &mut buf)?;
        amplitude = amplitude.max(norm(&buf));
    }
    Ok(PeriodicOrbit {
        epsilon: eps,
        mu,
        period,
        initial_state: xi,
        residual,
        iterations,
        monodromy,
        multipliers,
        liouville_defect,
        amplitude,
        trajectory,
    })
}

/// `z(t) = Ω(0, t, x(t))` on `samples` uniform times over one orbit period.
pub fn pulled_back_path<S: Scalar>(system: &PerturbedSystem<S>, orbit: &PeriodicOrbit<S>, samples: usize) -> Result<Vec<Vec<S>>> {
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let t = orbit.period * lit(k as f64) / lit(samples as f64);
            let x = orbit.trajectory.eval(t)?;
            flow_point(system, S::zero(), t, &x)
        })
        .collect()
}

/// `z(t) ∈ inside` for every sample and, if given, `z(t) ∉ cl excluded` for some sample.
pub fn orbit_in_target<S: Scalar>(
    system: &PerturbedSystem<S>,
    orbit: &PeriodicOrbit<S>,
    inside: &PlanarRegion<S>,
    excluded: Option<&PlanarRegion<S>>,
    samples: usize,
) -> Result<bool> {
    if system.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: system.dim() });
    }
    let path = pulled_back_path(system, orbit, samples)?;
    let pts: Vec<Point<S>> = path.iter().map(|z| [z[0], z[1]]).collect();
    let all_inside = pts.iter().all(|p| inside.contains(*p) == Containment::Inside);
    let escapes = match excluded {
        Some(ex) => pts.iter().any(|p| ex.contains(*p) == Containment::Outside),
        None => true,
    };
    Ok(all_inside && escapes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// A periodic orbit was found inside the certified set.
    Confirmed,
    /// Nonzero degree predicted, but no orbit was found in the set.
    NotConfirmed,
    /// Predicted degree zero: existence is not implied.
    NoConclusion,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Self::Confirmed => "confirmed",
            Self::NotConfirmed => "not_confirmed",
            Self::NoConclusion => "no_conclusion",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerificationRow<S> {
    pub epsilon: S,
    pub mu: Option<S>,
    pub found: bool,
    pub residual: Option<S>,
    pub amplitude: Option<S>,
    pub in_region: Option<bool>,
    pub stable: Option<bool>,
    pub initial_state: Option<Vec<S>>,
    pub liouville_defect: Option<S>,
    pub seeds_tried: usize,
    pub seeds_converged: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct VerificationTable<S> {
    pub theorem: TheoremId,
    pub predicted_degree: i64,
    pub rows: Vec<VerificationRow<S>>,
}

impl<S: Scalar> VerificationTable<S> {
    pub fn all_confirmed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Confirmed)
    }
}

/// Centroid of the outer boundary plus 8 points midway between the inner and
/// outer boundaries of the target set.
pub fn default_seeds<S: Scalar>(cert: &Certificate<S>) -> Vec<Vec<S>> {
    let (inside, excluded) = cert.membership_target();
    let outer = &inside.outer().geometry;
    let pts = inside.outer().sample_points();
    let inv = S::one() / lit(pts.len() as f64);
    let centroid = pts.iter().fold([S::zero(), S::zero()], |acc, p| [acc[0] + p[0] * inv, acc[1] + p[1] * inv]);
    let inner = excluded.map(|e| &e.outer().geometry).or_else(|| inside.holes().first().map(|h| &h.geometry));
    let mut seeds = vec![centroid.to_vec()];
    for k in 0..8 {
        let theta = lit::<S>(k as f64) / lit(8.0);
        let p = outer.point(theta);
        let q = inner.map_or(centroid, |g| g.point(theta));
        seeds.push(vec![(p[0] + q[0]) * lit(0.5), (p[1] + q[1]) * lit(0.5)]);
    }
    seeds
}

/// Runs shooting at each `ε` from every seed and reports whether an orbit
/// lands in the certified set. Stable orbits are preferred when several
/// seeds converge to orbits in the set.
pub fn verify_certificate<S: Scalar>(
    cert: &Certificate<S>,
    system: &PerturbedSystem<S>,
    epsilons: &[S],
    mu: Option<S>,
    seeds: Option<&[Vec<S>]>,
    settings: &ShootingSettings<S>,
) -> Result<VerificationTable<S>> {
    if !cert.valid {
        return Err(Error::InvalidInput("certificate is not valid".into()));
    }
    let predicted = cert.predicted_degree.unwrap_or(0);
    let sys = if matches!(cert.theorem, TheoremId::T3 | TheoremId::T4) && cert.period != system.period() {
        system.with_period(cert.period)?
    } else {
        system.clone()
    };
    let mu = mu.or(cert.mu);
    let seeds: Vec<Vec<S>> = match seeds {
        Some(s) => s.to_vec(),
        None => default_seeds(cert),
    };
    let (inside, excluded) = cert.membership_target();
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let attempts: Vec<Result<PeriodicOrbit<S>>> = seeds.par_iter().map(|g| find_periodic_orbit(&sys, eps, mu, g, settings)).collect();
        let mut candidates = Vec::new();
        for orbit in attempts.into_iter().flatten() {
            let member = orbit_in_target(&sys, &orbit, inside, excluded, settings.membership_samples)?;
            candidates.push((member, orbit));
        }
        let converged = candidates.len();
        let rank = |(member, orbit): &(bool, PeriodicOrbit<S>)| (!*member, !orbit.is_stable());
        let best = candidates.iter().enumerate().min_by_key(|(i, c)| (rank(c), *i)).map(|(_, c)| c);
        let found_in = best.is_some_and(|(m, _)| *m);
        let verdict = if predicted == 0 {
            Verdict::NoConclusion
        } else if found_in {
            Verdict::Confirmed
        } else {
            Verdict::NotConfirmed
        };
        rows.push(VerificationRow {
            epsilon: eps,
            mu,
            found: best.is_some(),
            residual: best.map(|(_, o)| o.residual),
            amplitude: best.map(|(_, o)| o.amplitude),
            in_region: best.map(|(m, _)| *m),
            stable: best.map(|(_, o)| o.is_stable()),
            initial_state: best.map(|(_, o)| o.initial_state.clone()),
            liouville_defect: best.map(|(_, o)| o.liouville_defect),
            seeds_tried: seeds.len(),
            seeds_converged: converged,
            verdict,
        });
    }
    Ok(VerificationTable { theorem: cert.theorem, predicted_degree: predicted, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    #[test]
    fn rotation_at_zero_eps_is_singular() {
        let sys = systems::rotation_system::<f64>();
        let err = find_periodic_orbit(&sys, 0.0, None, &[1.0, 0.5], &ShootingSettings::default()).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn eps_range_checked() {
        let sys = systems::vdp_two_term::<f64>();
        assert!(find_periodic_orbit(&sys, 0.7, None, &[2.0, 0.0], &ShootingSettings::default()).is_err());
        assert!(find_periodic_orbit(&sys, -0.1, None, &[2.0, 0.0], &ShootingSettings::default()).is_err());
    }

    #[test]
    fn forced_vdp_orbit_near_radius_two() {
        let sys = systems::vdp_two_term::<f64>();
        let orbit = find_periodic_orbit(&sys, 0.1, None, &[0.0, 3.0], &ShootingSettings::default()).unwrap();
        assert!(orbit.residual < 1e-9);
        assert!((orbit.amplitude - 2.0).abs() < 0.1, "{}", orbit.amplitude);
        assert!(orbit.liouville_defect < 1e-6);
        assert!(orbit.is_stable());
    }

    #[test]
    fn eigenvalues_closed_form_and_general() {
        let rot: Matrix<f64> = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let ev = eigenvalues(&rot);
        assert!((ev[0].im.abs() - 1.0).abs() < 1e-15);
        let diag = Matrix::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.5]]);
        let mut re: Vec<f64> = eigenvalues(&diag).iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(re.len(), 3);
        assert!((re[0] + 1.0).abs() < 1e-12 && (re[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detuned_period() {
        let sys = systems::vdp_two_term::<f64>();
        let t = orbit_period(&sys, 0.5, Some(0.2));
        assert!((t - 2.0 * std::f64::consts::PI * (1.0 + 0.125 * 0.2)).abs() < 1e-14);
    }
}
