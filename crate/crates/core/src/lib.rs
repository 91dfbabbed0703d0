//! Degree certificates for periodic solutions of small-parameter perturbed
//! periodic ODE systems
//!
//! ```text
//! x' = ψ(t, x) + ε² φ₁(t, x) + ε³ φ₂(t, x, ε)
//! ```
//!
//! The crate computes the linearized responses `η₁`, `η₂` along the
//! unperturbed flow, checks the boundary hypotheses that make the degree of
//! the periodic-problem operator computable from `ηᵢ(T, 0, ·)`, evaluates the
//! planar Brouwer degree of those maps, and verifies predictions at finite
//! `ε` by Newton shooting on the period map.
//!
//! Numerics are generic over [`Scalar`] (`f32`/`f64`); the `*F64` aliases
//! below name the double-precision instantiations.

pub mod degree;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod linearized;
pub mod ode;
pub mod scalar;
pub mod shooting;
pub mod systems;
pub mod theorem;

pub use degree::{boundary_winding, region_degree, BoundaryCurve, Containment, CurveGeometry, DegreeResult, Orientation, PlanarRegion, WindingResult};
pub use error::{Error, Result};
pub use flow::{flow_point, fundamental_pair, FnForcing, ForcingField, PerturbedSystem, Profile};
pub use linalg::Matrix;
pub use linearized::{eta_direct, eta_lemma1, eta_period_gap, EtaQuery, Response};
pub use ode::{integrate, integrate_with_variational, FnField, FundamentalPath, Tolerances, Trajectory, VectorField};
pub use scalar::Scalar;
pub use shooting::{find_periodic_orbit, verify_certificate, PeriodicOrbit, ShootingSettings, VerificationRow, VerificationTable, Verdict};
pub use theorem::{
    check_conditions, theorem1_certificate, theorem2_certificate, theorem3_certificate, theorem4_scan, Certificate, CertificateError,
    ConditionReport, ConditionSettings, MuScan, MuScanRow, TheoremId,
};

pub type TrajectoryF64 = Trajectory<f64>;
pub type FundamentalPathF64 = FundamentalPath<f64>;
pub type PerturbedSystemF64 = PerturbedSystem<f64>;
pub type PlanarRegionF64 = PlanarRegion<f64>;
pub type DegreeResultF64 = DegreeResult<f64>;
pub type ConditionReportF64 = ConditionReport<f64>;
pub type CertificateF64 = Certificate<f64>;
pub type PeriodicOrbitF64 = PeriodicOrbit<f64>;
pub type MuScanF64 = MuScan<f64>;
pub type VerificationTableF64 = VerificationTable<f64>;
