//! Boundary hypotheses and degree certificates.
//!
//! For a boundary point `ξ` the checks are
//!
//! * `‖Ω(T,0,ξ) − ξ‖` (must vanish),
//! * `‖η₁(T,s,ξ) − η₁(0,s,ξ)‖` over an `s`-grid (must vanish on `∂U`, or stay
//!   away from zero on `∂U_δ` for the annular certificate),
//! * `‖η₂(T,s,ξ) − η₂(0,s,ξ)‖` over the same grid (must stay away from zero).
//!
//! Equalities are tested as `≤ tol_eq`, inequalities as `≥ floor_neq`, and
//! the raw extrema are always reported.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::degree::{region_degree, DegreeResult, PlanarRegion, Point};
use crate::error::{Error, Result};
use crate::flow::{quasi_random, ForcingField, PerturbedSystem, Profile};
use crate::linalg::{distance, norm, Matrix};
use crate::linearized::{Response, ResponseIntegral};
use crate::ode::VectorField;
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionSettings<S> {
    /// Number of anchor times `s_j = jT/(m−1)`, endpoints included.
    pub s_samples: usize,
    pub tol_eq: S,
    pub floor_neq: S,
    /// Use a single anchor when `Y(T) = I` to within `1e-9` (the gap is then `s`-independent).
    pub collapse_s_grid: bool,
}

impl<S: Scalar> Default for ConditionSettings<S> {
    fn default() -> Self {
        Self { s_samples: 16, tol_eq: lit(1e-7), floor_neq: lit(1e-4), collapse_s_grid: true }
    }
}

/// Margins at one boundary sample, extremized over the `s`-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMargin<S> {
    pub curve: usize,
    pub theta: S,
    pub xi: Vec<S>,
    pub return_defect: S,
    pub eta1_gap_max: S,
    pub eta1_gap_min: S,
    pub eta2_gap_max: S,
    pub eta2_gap_min: S,
    pub s_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<S> {
    /// `max ‖Ω(T,0,ξ) − ξ‖`.
    pub a1_max_defect: S,
    /// `max ‖η₁(T,s,ξ) − η₁(0,s,ξ)‖`.
    pub a2_max_gap: S,
    /// `min ‖η₂(T,s,ξ) − η₂(0,s,ξ)‖`.
    pub a3_min_gap: S,
    /// `min ‖η₁(T,s,ξ) − η₁(0,s,ξ)‖`, the margin of the annular non-vanishing check.
    pub a4_min_gap: S,
    pub a1_pass: bool,
    pub a2_pass: bool,
    pub a3_pass: bool,
    pub a4_pass: bool,
    pub boundary_samples: usize,
    pub s_samples: usize,
    pub tol_eq: S,
    pub floor_neq: S,
    pub samples: Vec<SampleMargin<S>>,
}

impl<S: Scalar> ConditionReport<S> {
    fn from_samples(samples: Vec<SampleMargin<S>>, settings: &ConditionSettings<S>) -> Self {
        let mut r = Self {
            a1_max_defect: S::zero(),
            a2_max_gap: S::zero(),
            a3_min_gap: S::infinity(),
            a4_min_gap: S::infinity(),
            a1_pass: false,
            a2_pass: false,
            a3_pass: false,
            a4_pass: false,
            boundary_samples: samples.len(),
            s_samples: 0,
            tol_eq: settings.tol_eq,
            floor_neq: settings.floor_neq,
            samples: Vec::new(),
        };
        for m in &samples {
            r.a1_max_defect = r.a1_max_defect.max(m.return_defect);
            r.a2_max_gap = r.a2_max_gap.max(m.eta1_gap_max);
            r.a3_min_gap = r.a3_min_gap.min(m.eta2_gap_min);
            r.a4_min_gap = r.a4_min_gap.min(m.eta1_gap_min);
            r.s_samples = r.s_samples.max(m.s_used);
        }
        r.a1_pass = r.a1_max_defect <= settings.tol_eq;
        r.a2_pass = r.a2_max_gap <= settings.tol_eq;
        r.a3_pass = r.a3_min_gap >= settings.floor_neq;
        r.a4_pass = r.a4_min_gap >= settings.floor_neq;
        r.samples = samples;
        r
    }
}

fn sample_margin<S: Scalar>(
    system: &PerturbedSystem<S>,
    xi: &[S],
    curve: usize,
    theta: S,
    settings: &ConditionSettings<S>,
) -> Result<SampleMargin<S>> {
    let first = ResponseIntegral::new(system, Response::First, xi)?;
    let second = ResponseIntegral::new(system, Response::Second, xi)?;
    let track = first.track();
    let return_defect = distance(track.return_state(), xi);
    let collapse = settings.collapse_s_grid && track.monodromy().identity_defect() <= lit(1e-9);
    let period = system.period();
    let anchors: Vec<S> = if collapse {
        vec![S::zero()]
    } else {
        let m = settings.s_samples;
        (0..m).map(|j| period * lit(j as f64) / lit((m - 1) as f64)).collect()
    };
    let mut out = SampleMargin {
        curve,
        theta,
        xi: xi.to_vec(),
        return_defect,
        eta1_gap_max: S::zero(),
        eta1_gap_min: S::infinity(),
        eta2_gap_max: S::zero(),
        eta2_gap_min: S::infinity(),
        s_used: anchors.len(),
    };
    for &s in &anchors {
        let g1 = norm(&first.period_gap(s)?);
        let g2 = norm(&second.period_gap(s)?);
        out.eta1_gap_max = out.eta1_gap_max.max(g1);
        out.eta1_gap_min = out.eta1_gap_min.min(g1);
        out.eta2_gap_max = out.eta2_gap_max.max(g2);
        out.eta2_gap_min = out.eta2_gap_min.min(g2);
    }
    Ok(out)
}

/// Evaluates the hypotheses at arbitrary points of `ℝⁿ` (any dimension).
pub fn check_conditions_at<S: Scalar>(
    system: &PerturbedSystem<S>,
    points: &[Vec<S>],
    settings: &ConditionSettings<S>,
) -> Result<ConditionReport<S>> {
    if settings.s_samples < 8 {
        return Err(Error::InvalidInput(format!("s-grid needs at least 8 anchors, got {}", settings.s_samples)));
    }
    let samples = points
        .par_iter()
        .enumerate()
        .map(|(k, xi)| sample_margin(system, xi, 0, lit(k as f64), settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport::from_samples(samples, settings))
}

/// Evaluates the hypotheses on every base sample of every boundary curve of `region`.
pub fn check_conditions<S: Scalar>(
    system: &PerturbedSystem<S>,
    region: &PlanarRegion<S>,
    settings: &ConditionSettings<S>,
) -> Result<ConditionReport<S>> {
    if system.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: system.dim() });
    }
    if settings.s_samples < 8 {
        return Err(Error::InvalidInput(format!("s-grid needs at least 8 anchors, got {}", settings.s_samples)));
    }
    let mut jobs = Vec::new();
    for (c, curve) in region.curves().enumerate() {
        if curve.samples < 64 {
            return Err(Error::InvalidInput(format!("boundary needs at least 64 samples, got {}", curve.samples)));
        }
        for theta in curve.sample_params() {
            let p = curve.param(theta);
            jobs.push((c, theta, vec![p[0], p[1]]));
        }
    }
    let samples = jobs
        .par_iter()
        .map(|(c, theta, xi)| sample_margin(system, xi, *c, *theta, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport::from_samples(samples, settings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoremId {
    T1,
    T2,
    T3,
    T4,
}

impl TheoremId {
    pub fn label(self) -> &'static str {
        match self {
            Self::T1 => "T1",
            Self::T2 => "T2",
            Self::T3 => "T3",
            Self::T4 => "T4",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledReport<S> {
    pub label: String,
    pub report: ConditionReport<S>,
    /// Conditions this certificate requires of the report, e.g. `["A1", "A2", "A3"]`.
    pub required: Vec<&'static str>,
}

impl<S: Scalar> LabeledReport<S> {
    fn failures(&self) -> Vec<String> {
        self.required
            .iter()
            .filter(|c| {
                !match **c {
                    "A1" => self.report.a1_pass,
                    "A2" => self.report.a2_pass,
                    "A3" => self.report.a3_pass,
                    "A4" => self.report.a4_pass,
                    _ => true,
                }
            })
            .map(|c| format!("{c} on {}", self.label))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDegree<S> {
    pub label: String,
    /// `None` when the map vanished (or could not be resolved) on the boundary.
    pub result: Option<DegreeResult<S>>,
    pub error: Option<String>,
}

/// Outcome of a theorem check: condition reports, degrees and the predicted
/// degree of the periodic-problem operator on the certified set.
#[derive(Debug, Clone)]
pub struct Certificate<S> {
    pub theorem: TheoremId,
    pub period: S,
    /// `U` (T1/T2) or `U₀` (T3/T4).
    pub region: PlanarRegion<S>,
    /// `U_δ` for T3/T4.
    pub outer_region: Option<PlanarRegion<S>>,
    pub delta: Option<S>,
    pub mu: Option<S>,
    pub reports: Vec<LabeledReport<S>>,
    pub degrees: Vec<LabeledDegree<S>>,
    /// Degree (T1/T2) or degree difference (T3/T4).
    pub predicted_degree: Option<i64>,
    pub valid: bool,
    pub failures: Vec<String>,
}

impl<S: Scalar> Certificate<S> {
    /// `(U, excluded)`: certified orbits satisfy `z(t) ∈ U` for all `t`, and,
    /// for the annular certificates, `z(t) ∉ cl U₀` for some `t`.
    pub fn membership_target(&self) -> (&PlanarRegion<S>, Option<&PlanarRegion<S>>) {
        match &self.outer_region {
            Some(outer) => (outer, Some(&self.region)),
            None => (&self.region, None),
        }
    }

    pub fn report(&self, label: &str) -> Option<&ConditionReport<S>> {
        self.reports.iter().find(|r| r.label == label).map(|r| &r.report)
    }

    pub fn degree(&self, label: &str) -> Option<&DegreeResult<S>> {
        self.degrees.iter().find(|d| d.label == label).and_then(|d| d.result.as_ref())
    }

    fn finalize(mut self) -> Self {
        let mut failures: Vec<String> = self.reports.iter().flat_map(LabeledReport::failures).collect();
        for d in &self.degrees {
            if d.result.is_none() {
                failures.push(format!("degree of {} not computable", d.label));
            }
        }
        self.valid = failures.is_empty() && self.predicted_degree.is_some();
        self.failures = failures;
        self
    }
}

#[derive(Debug, Error)]
pub enum CertificateError<S: Scalar> {
    #[error("certificate hypotheses failed: {}", .0.failures.join(", "))]
    ConditionsFailed(Box<Certificate<S>>),
    #[error("base case (μ = 0) certificate invalid: {}", .0.failures.join(", "))]
    BaseCaseInvalid(Box<Certificate<S>>),
    #[error(transparent)]
    Numeric(#[from] Error),
}

fn eta_map_degree<S: Scalar>(
    system: &PerturbedSystem<S>,
    which: Response,
    region: &PlanarRegion<S>,
    label: String,
) -> Result<LabeledDegree<S>> {
    let period = system.period();
    let map = |p: Point<S>| -> Result<Point<S>> {
        let v = ResponseIntegral::new(system, which, &[p[0], p[1]])?.eta(period, S::zero())?;
        Ok([v[0], v[1]])
    };
    match region_degree(&map, region) {
        Ok(d) => Ok(LabeledDegree { label, result: Some(d), error: None }),
        Err(e @ (Error::ZeroOnBoundary { .. } | Error::RefinementExhausted { .. })) => {
            Ok(LabeledDegree { label, result: None, error: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}

fn require_profile<S: Scalar>(system: &PerturbedSystem<S>, profile: Profile) -> Result<()> {
    if system.profile() != profile {
        return Err(Error::InvalidInput(format!("expected a {profile:?} system, got {:?}", system.profile())));
    }
    Ok(())
}

fn single_region_certificate<S: Scalar>(
    theorem: TheoremId,
    system: &PerturbedSystem<S>,
    region: &PlanarRegion<S>,
    settings: &ConditionSettings<S>,
    required: Vec<&'static str>,
) -> Result<Certificate<S>> {
    let report = check_conditions(system, region, settings)?;
    let degree = eta_map_degree(system, Response::Second, region, "eta2(T,0,.) on U".into())?;
    let predicted = degree.result.as_ref().map(|d| d.degree);
    Ok(Certificate {
        theorem,
        period: system.period(),
        region: region.clone(),
        outer_region: None,
        delta: None,
        mu: None,
        reports: vec![LabeledReport { label: "U".into(), report, required }],
        degrees: vec![degree],
        predicted_degree: predicted,
        valid: false,
        failures: Vec::new(),
    }
    .finalize())
}

fn accept<S: Scalar>(cert: Certificate<S>) -> std::result::Result<Certificate<S>, CertificateError<S>> {
    if cert.valid {
        Ok(cert)
    } else {
        Err(CertificateError::ConditionsFailed(Box::new(cert)))
    }
}

/// Two-term certificate on `U`: returns the certificate whether or not it is valid.
pub fn evaluate_theorem1<S: Scalar>(
    system: &PerturbedSystem<S>,
    region: &PlanarRegion<S>,
    settings: &ConditionSettings<S>,
) -> Result<Certificate<S>> {
    require_profile(system, Profile::TwoTerm)?;
    single_region_certificate(TheoremId::T1, system, region, settings, vec!["A1", "A2", "A3"])
}

/// `deg(F_ε, W(T,U)) = deg(η₂(T,0,·), U)` under the three boundary hypotheses.
pub fn theorem1_certificate<S: Scalar>(
    system: &PerturbedSystem<S>,
    region: &PlanarRegion<S>,
    settings: &ConditionSettings<S>,
) -> std::result::Result<Certificate<S>, CertificateError<S>> {
    accept(evaluate_theorem1(system, region, settings)?)
}

pub fn evaluate_theorem2<S: Scalar>(
    system: &PerturbedSystem<S>,
    region: &PlanarRegion<S>,
    settings: &ConditionSettings<S>,
) -> Result<Certificate<S>> {
    require_profile(system, Profile::OneTerm)?;
    single_region_certificate(TheoremId::T2, system, region, settings, vec!["A1", "A3"])
}

/// One-term certificate: `deg(F_ε, W(T,U)) = deg(η(T,0,·), U)`.
pub fn theorem2_certificate<S: Scalar>(
    system: &PerturbedSystem<S>,
    region: &PlanarRegion<S>,
    settings: &ConditionSettings<S>,
) -> std::result::Result<Certificate<S>, CertificateError<S>> {
    accept(evaluate_theorem2(system, region, settings)?)
}

/// Linear part `A` of an autonomous linear `ψ` and `λ` with spectrum `±iλ`.
pub fn linear_center_spectrum<S: Scalar>(system: &PerturbedSystem<S>) -> Result<(Matrix<S>, S)> {
    if system.dim() != 2 {
        return Err(Error::SpectrumMismatch(format!("planar system required, got dimension {}", system.dim())));
    }
    let psi = system.psi();
    let mut a = Matrix::zeros(2, 2);
    psi.jacobian(S::zero(), &[S::zero(), S::zero()], &mut a);
    let mut fx = [S::zero(); 2];
    for k in 0..16 {
        let t = system.period() * quasi_random(k, 0);
        let x = [lit::<S>(4.0) * quasi_random::<S>(k, 1) - lit(2.0), lit::<S>(4.0) * quasi_random::<S>(k, 2) - lit(2.0)];
        psi.eval(t, &x, &mut fx);
        let ax = a.mul_vec(&x);
        if distance(&fx, &ax) > lit::<S>(1e-9) * (S::one() + norm(&x)) {
            return Err(Error::SpectrumMismatch("ψ is not an autonomous linear field".into()));
        }
    }
    let half_trace = a.trace() * lit(0.5);
    let disc = a.determinant() - half_trace * half_trace;
    if half_trace.abs() > lit(1e-10) || !(disc > S::zero()) {
        return Err(Error::SpectrumMismatch(format!("eigenvalues {half_trace} ± sqrt({})", -disc)));
    }
    Ok((a, disc.sqrt()))
}

fn center_system<S: Scalar>(system: &PerturbedSystem<S>) -> Result<(PerturbedSystem<S>, Matrix<S>)> {
    require_profile(system, Profile::TwoTerm)?;
    let (a, lambda) = linear_center_spectrum(system)?;
    let period = (S::PI() + S::PI()) / lambda;
    let sys = if (period - system.period()).abs() <= lit::<S>(1e-12) * period {
        system.clone()
    } else {
        system.with_period(period)?
    };
    Ok((sys, a))
}

struct AnnularParts<S: Scalar> {
    outer_region: PlanarRegion<S>,
    outer_report: LabeledReport<S>,
    outer_degree: LabeledDegree<S>,
}

fn annular_parts<S: Scalar>(
    sys: &PerturbedSystem<S>,
    u0: &PlanarRegion<S>,
    delta: S,
    settings: &ConditionSettings<S>,
) -> Result<AnnularParts<S>> {
    if !(delta > S::zero() && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let outer_region = u0.scaled(S::one() + delta);
    let report = check_conditions(sys, &outer_region, settings)?;
    let outer_degree = eta_map_degree(sys, Response::First, &outer_region, "eta1(T,0,.) on U_delta".into())?;
    Ok(AnnularParts {
        outer_region,
        outer_report: LabeledReport { label: "U_delta".into(), report, required: vec!["A1", "A4"] },
        outer_degree,
    })
}

fn annular_certificate<S: Scalar>(
    theorem: TheoremId,
    sys: &PerturbedSystem<S>,
    u0: &PlanarRegion<S>,
    delta: S,
    mu: Option<S>,
    parts: &AnnularParts<S>,
    settings: &ConditionSettings<S>,
) -> Result<Certificate<S>> {
    let inner_report = check_conditions(sys, u0, settings)?;
    let inner_degree = eta_map_degree(sys, Response::Second, u0, "eta2(T,0,.) on U0".into())?;
    let predicted = match (&parts.outer_degree.result, &inner_degree.result) {
        (Some(d1), Some(d2)) => Some(d1.degree - d2.degree),
        _ => None,
    };
    Ok(Certificate {
        theorem,
        period: sys.period(),
        region: u0.clone(),
        outer_region: Some(parts.outer_region.clone()),
        delta: Some(delta),
        mu,
        reports: vec![
            LabeledReport { label: "U0".into(), report: inner_report, required: vec!["A1", "A2", "A3"] },
            parts.outer_report.clone(),
        ],
        degrees: vec![parts.outer_degree.clone(), inner_degree],
        predicted_degree: predicted,
        valid: false,
        failures: Vec::new(),
    }
    .finalize())
}

/// Annular certificate for a planar linear center perturbed at two orders.
pub fn evaluate_theorem3<S: Scalar>(
    system: &PerturbedSystem<S>,
    u0: &PlanarRegion<S>,
    delta: S,
    settings: &ConditionSettings<S>,
) -> Result<Certificate<S>> {
    let (sys, _) = center_system(system)?;
    let parts = annular_parts(&sys, u0, delta, settings)?;
    annular_certificate(TheoremId::T3, &sys, u0, delta, None, &parts, settings)
}

/// `deg(F_ε, W(T,U_δ) \ cl W(T,U₀)) = deg(η₁(T,0,·), U_δ) − deg(η₂(T,0,·), U₀)`,
/// with `T = 2π/λ` and `U_δ = (1+δ)·U₀`.
pub fn theorem3_certificate<S: Scalar>(
    system: &PerturbedSystem<S>,
    u0: &PlanarRegion<S>,
    delta: S,
    settings: &ConditionSettings<S>,
) -> std::result::Result<Certificate<S>, CertificateError<S>> {
    accept(evaluate_theorem3(system, u0, delta, settings)?)
}

/// Second-slot field of the time-rescaled detuned system,
/// `φ₂(t,ξ,ε,μ) + μAξ + ε²μφ₁(ξ) + ε³μφ₂(t,ξ,ε,μ)`.
struct DetunedForcing<S: Scalar> {
    phi1: Arc<dyn VectorField<S>>,
    phi2: Arc<dyn ForcingField<S>>,
    a: Matrix<S>,
    mu: S,
}

impl<S: Scalar> ForcingField<S> for DetunedForcing<S> {
    fn dim(&self) -> usize {
        self.phi2.dim()
    }

    fn eval(&self, t: S, x: &[S], eps: S, _mu: S, dx: &mut [S]) {
        let n = x.len();
        let mut p1 = vec![S::zero(); n];
        self.phi1.eval(t, x, &mut p1);
        self.phi2.eval(t, x, eps, self.mu, dx);
        let ax = self.a.mul_vec(x);
        let e2 = eps * eps;
        let e3 = e2 * eps;
        for i in 0..n {
            dx[i] = dx[i] + self.mu * ax[i] + e2 * self.mu * p1[i] + e3 * self.mu * dx[i];
        }
    }

    fn jacobian(&self, t: S, x: &[S], eps: S, _mu: S, jac: &mut Matrix<S>) {
        let n = x.len();
        let mut j1 = Matrix::zeros(n, n);
        self.phi1.jacobian(t, x, &mut j1);
        self.phi2.jacobian(t, x, eps, self.mu, jac);
        let e2 = eps * eps;
        let e3 = e2 * eps;
        let scale = S::one() + e3 * self.mu;
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = jac[(i, j)] * scale + self.mu * self.a[(i, j)] + e2 * self.mu * j1[(i, j)];
            }
        }
    }
}

/// Builds the time-rescaled detuned system with fixed period `T₀ = 2π/λ`.
pub fn detuned_system<S: Scalar>(system: &PerturbedSystem<S>, mu: S) -> Result<PerturbedSystem<S>> {
    let (sys, a) = center_system(system)?;
    sys.with_phi2(Arc::new(DetunedForcing { phi1: sys.phi1_arc(), phi2: sys.phi2_arc(), a, mu }))
}

#[derive(Debug, Clone)]
pub struct MuScanRow<S> {
    pub mu: S,
    pub certificate: Certificate<S>,
    /// `min ‖η₂,μ gap‖` on `∂U₀`.
    pub a3_margin: S,
    /// `min ‖η₁ gap‖` on `∂U_δ`.
    pub a4_margin: S,
    pub degree_difference: Option<i64>,
    pub matches_base: bool,
}

#[derive(Debug, Clone)]
pub struct MuScan<S> {
    pub base: Certificate<S>,
    pub rows: Vec<MuScanRow<S>>,
    /// Largest grid value `μ̂` such that every grid `μ` with `|μ| ≤ μ̂` keeps a
    /// valid certificate with the base degree difference.
    pub mu_hat: S,
}

/// Reruns the annular certificate on the detuned system for each `μ`.
pub fn theorem4_scan<S: Scalar>(
    system: &PerturbedSystem<S>,
    u0: &PlanarRegion<S>,
    delta: S,
    mu_grid: &[S],
    settings: &ConditionSettings<S>,
) -> std::result::Result<MuScan<S>, CertificateError<S>> {
    let (sys, _) = center_system(system)?;
    let parts = annular_parts(&sys, u0, delta, settings)?;
    let base = annular_certificate(TheoremId::T3, &sys, u0, delta, None, &parts, settings)?;
    if !base.valid {
        return Err(CertificateError::BaseCaseInvalid(Box::new(base)));
    }
    let mut rows = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let detuned = detuned_system(&sys, mu)?;
        let cert = annular_certificate(TheoremId::T4, &detuned, u0, delta, Some(mu), &parts, settings)?;
        let a3 = cert.report("U0").map_or(S::zero(), |r| r.a3_min_gap);
        let a4 = cert.report("U_delta").map_or(S::zero(), |r| r.a4_min_gap);
        let diff = cert.predicted_degree;
        rows.push(MuScanRow {
            mu,
            a3_margin: a3,
            a4_margin: a4,
            degree_difference: diff,
            matches_base: cert.valid && diff == base.predicted_degree,
            certificate: cert,
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| rows[i].mu.abs().partial_cmp(&rows[j].mu.abs()).unwrap_or(std::cmp::Ordering::Equal));
    let mut mu_hat = S::zero();
    let mut k = 0;
    while k < order.len() {
        let level = rows[order[k]].mu.abs();
        let mut all_ok = true;
        let mut j = k;
        while j < order.len() && rows[order[j]].mu.abs() == level {
            all_ok &= rows[order[j]].matches_base;
            j += 1;
        }
        if !all_ok {
            break;
        }
        mu_hat = level;
        k = j;
    }
    Ok(MuScan { base, rows, mu_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FnForcing;
    use crate::systems;
    use std::f64::consts::PI;

    fn coarse() -> ConditionSettings<f64> {
        ConditionSettings { s_samples: 8, ..ConditionSettings::default() }
    }

    #[test]
    fn rotation_return_defect() {
        let sys = systems::rotation_system::<f64>();
        let region = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap();
        let r = check_conditions(&sys, &region, &ConditionSettings::default()).unwrap();
        assert!(r.a1_max_defect <= 1e-9);
        assert!(r.a1_pass);
        assert_eq!(r.boundary_samples, 256);
    }

    #[test]
    fn guards_on_grid_sizes() {
        let sys = systems::rotation_system::<f64>();
        let region = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap();
        let small = ConditionSettings { s_samples: 4, ..ConditionSettings::default() };
        assert!(check_conditions(&sys, &region, &small).is_err());
        assert!(check_conditions(&sys, &region.clone().with_samples(32), &coarse()).is_err());
    }

    #[test]
    fn synthetic_identity_forcing_has_degree_one() {
        let sys = PerturbedSystem::two_term(
            systems::rotation(),
            systems::vdp_damping(0.0),
            FnForcing::new(2, |_, x: &[f64], _, _, dx: &mut [f64]| dx.copy_from_slice(x)),
            2.0 * PI,
        )
        .unwrap();
        let region = PlanarRegion::disc([0.0, 0.0], 1.0).unwrap().with_samples(64);
        let cert = theorem1_certificate(&sys, &region, &coarse()).unwrap();
        assert_eq!(cert.predicted_degree, Some(1));
        let d = cert.degree("eta2(T,0,.) on U").unwrap();
        assert!((d.boundary_margin - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn constant_gap_has_degree_zero() {
        let sys = PerturbedSystem::two_term(
            systems::rotation(),
            systems::vdp_damping(0.0),
            FnForcing::new(2, |t: f64, _, _, _, dx: &mut [f64]| {
                dx[0] = t.cos();
                dx[1] = 0.0;
            }),
            2.0 * PI,
        )
        .unwrap();
        let region = PlanarRegion::disc([0.5, -0.2], 1.5).unwrap().with_samples(64);
        let cert = theorem1_certificate(&sys, &region, &coarse()).unwrap();
        assert_eq!(cert.predicted_degree, Some(0));
    }

    #[test]
    fn profile_mismatch_rejected() {
        let region = PlanarRegion::disc([0.0, 0.0], 1.0).unwrap().with_samples(64);
        let one = systems::vdp_one_term::<f64>();
        assert!(matches!(theorem1_certificate(&one, &region, &coarse()), Err(CertificateError::Numeric(Error::InvalidInput(_)))));
        let two = systems::vdp_two_term::<f64>();
        assert!(matches!(theorem2_certificate(&two, &region, &coarse()), Err(CertificateError::Numeric(Error::InvalidInput(_)))));
    }

    #[test]
    fn spectrum_checks() {
        let (a, lambda) = linear_center_spectrum(&systems::vdp_two_term_scaled::<f64>(2.0)).unwrap();
        assert!((lambda - 2.0).abs() < 1e-12);
        assert_eq!(a[(0, 1)], 2.0);
        let err = linear_center_spectrum(&systems::cubic_system::<f64>()).unwrap_err();
        assert!(matches!(err, Error::SpectrumMismatch(_)));
        let damped = PerturbedSystem::two_term(
            systems::linear_field(Matrix::from_rows(&[vec![-0.1, 1.0], vec![-1.0, -0.1]])),
            systems::vdp_damping(1.0),
            FnForcing::zero(2),
            2.0 * PI,
        )
        .unwrap();
        assert!(matches!(linear_center_spectrum(&damped), Err(Error::SpectrumMismatch(_))));
    }

    #[test]
    fn zero_mean_forcing_fails_a3() {
        let sys = PerturbedSystem::two_term(systems::rotation(), systems::vdp_damping(1.0), systems::sine_forcing(1.0, 2.0), 2.0 * PI).unwrap();
        let u0 = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap().with_samples(64);
        match theorem3_certificate(&sys, &u0, 1.0, &coarse()) {
            Err(CertificateError::ConditionsFailed(cert)) => {
                assert!(cert.failures.iter().any(|f| f.starts_with("A3")), "{:?}", cert.failures);
                assert!(cert.report("U0").unwrap().a3_min_gap < 1e-8);
            }
            other => panic!("expected ConditionsFailed, got {other:?}"),
        }
    }

    #[test]
    fn negative_delta_rejected() {
        let sys = systems::vdp_two_term::<f64>();
        let u0 = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap().with_samples(64);
        assert!(matches!(theorem3_certificate(&sys, &u0, -0.5, &coarse()), Err(CertificateError::Numeric(Error::InvalidInput(_)))));
    }
}
