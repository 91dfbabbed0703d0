//! Scenario runners: the van der Pol benchmark, custom systems and `μ` scans.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use periodic_cert::theorem::{evaluate_theorem1, evaluate_theorem2, evaluate_theorem3};
use periodic_cert::{
    region_degree, systems, theorem4_scan, verify_certificate, Certificate, CertificateError, ConditionSettings, CurveGeometry,
    DegreeResult, PerturbedSystem, PlanarRegion, Profile, ShootingSettings, Tolerances,
};

use crate::config::{ProfileSpec, RegionConfig, ScenarioConfig, SystemConfig, TheoremSpec};
use crate::custom::ExprField;
use crate::expr::{self, Env};
use crate::report::{mu_scan_records, CertificateRecord, NormalFormEcho, RunReport, VerificationRecord};

pub const PROP1: &str = "proposition_1";
pub const PROP2: &str = "proposition_2";

fn condition_settings(cfg: &ScenarioConfig) -> ConditionSettings<f64> {
    ConditionSettings {
        s_samples: cfg.grids.s_samples,
        tol_eq: cfg.tolerances.tol_eq,
        floor_neq: cfg.tolerances.floor_neq,
        collapse_s_grid: true,
    }
}

fn shooting_settings(cfg: &ScenarioConfig) -> ShootingSettings<f64> {
    ShootingSettings {
        tolerances: Tolerances::uniform(cfg.tolerances.shooting),
        residual_tol: cfg.tolerances.residual,
        membership_samples: cfg.grids.membership_samples,
        ..ShootingSettings::default()
    }
}

fn with_tolerances(sys: PerturbedSystem<f64>, cfg: &ScenarioConfig) -> anyhow::Result<PerturbedSystem<f64>> {
    let tol = Tolerances::new(cfg.tolerances.abs, cfg.tolerances.rel);
    if tol == sys.tolerances() {
        Ok(sys)
    } else {
        Ok(sys.with_tolerances(tol)?)
    }
}

pub fn build_region(spec: &RegionConfig, samples: usize) -> anyhow::Result<PlanarRegion<f64>> {
    let region = match spec {
        RegionConfig::Disc { center, radius } => PlanarRegion::disc(*center, *radius)?,
        RegionConfig::Annulus { center, inner, outer } => PlanarRegion::annulus(*center, *inner, *outer)?,
        RegionConfig::Polygon { vertices } => PlanarRegion::from_curves(CurveGeometry::polygon(vertices.clone())?, vec![], samples)?,
    };
    let region = region.with_samples(samples);
    region.validate()?;
    Ok(region)
}

/// `disc:cx,cy,r`, `annulus:cx,cy,r_in,r_out` or `poly:x,y;x,y;...`.
pub fn parse_region_spec(spec: &str) -> anyhow::Result<RegionConfig> {
    let (kind, body) = spec.split_once(':').ok_or_else(|| anyhow!("region spec needs a kind prefix: {spec}"))?;
    let nums = |s: &str| -> anyhow::Result<Vec<f64>> {
        s.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number '{v}' in region spec"))).collect()
    };
    match kind {
        "disc" => match nums(body)?.as_slice() {
            [cx, cy, r] => Ok(RegionConfig::Disc { center: [*cx, *cy], radius: *r }),
            _ => bail!("disc spec is disc:cx,cy,r"),
        },
        "annulus" => match nums(body)?.as_slice() {
            [cx, cy, a, b] => Ok(RegionConfig::Annulus { center: [*cx, *cy], inner: *a, outer: *b }),
            _ => bail!("annulus spec is annulus:cx,cy,r_in,r_out"),
        },
        "poly" => {
            let vertices = body
                .split(';')
                .map(|p| match nums(p)?.as_slice() {
                    [x, y] => Ok([*x, *y]),
                    _ => bail!("polygon vertex must be x,y"),
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(RegionConfig::Polygon { vertices })
        }
        other => bail!("unknown region kind '{other}'"),
    }
}

/// Builds the system named by the config; returns it with any periodicity warnings.
pub fn build_system(cfg: &ScenarioConfig) -> anyhow::Result<(PerturbedSystem<f64>, Vec<String>)> {
    let sys = match &cfg.system {
        SystemConfig::Vdp => systems::vdp_two_term(),
        SystemConfig::Custom { psi, phi1, phi2, period, profile } => {
            let n = psi.len();
            if n == 0 {
                bail!("psi needs at least one component");
            }
            let phi1_src = phi1;
            if phi2.len() != n || !(phi1_src.is_empty() || phi1_src.len() == n) {
                bail!("field components must all have dimension {n}");
            }
            let psi = ExprField::parse(psi, n, false).context("psi")?;
            let phi1 = if phi1_src.is_empty() { ExprField::zero(n) } else { ExprField::parse(phi1_src, n, false).context("phi1")? };
            let phi2 = ExprField::parse(phi2, n, true).context("phi2")?;
            let profile = match profile {
                ProfileSpec::TwoTerm => Profile::TwoTerm,
                ProfileSpec::OneTerm => Profile::OneTerm,
            };
            if profile == Profile::OneTerm && !phi1_src.is_empty() {
                bail!("one-term systems take their perturbation in phi2; leave phi1 empty");
            }
            PerturbedSystem::from_parts(Arc::new(psi), Arc::new(phi1), Arc::new(phi2), period.resolve()?, profile)?
        }
    };
    let mut warnings = Vec::new();
    if let Err(e) = sys.validate_periodicity() {
        warnings.push(e.to_string());
    }
    Ok((with_tolerances(sys, cfg)?, warnings))
}

struct Clock {
    enabled: bool,
    start: Instant,
    marks: BTreeMap<String, f64>,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Self { enabled, start: Instant::now(), marks: BTreeMap::new() }
    }

    fn mark(&mut self, name: &str) {
        if self.enabled {
            let now = Instant::now();
            self.marks.insert(name.into(), (now - self.start).as_secs_f64());
            self.start = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.marks)
    }
}

fn empty_report(scenario: &str, cfg: &ScenarioConfig, warnings: Vec<String>) -> RunReport {
    RunReport {
        scenario: scenario.into(),
        config: cfg.clone(),
        normal_form: Vec::new(),
        warnings,
        certificates: Vec::new(),
        verification: Vec::new(),
        mu_scan: Vec::new(),
        frequency_pulling: None,
        errors: Vec::new(),
        valid: false,
        timings: None,
    }
}

fn run_scan(
    report: &mut RunReport,
    sys: &PerturbedSystem<f64>,
    u0: &PlanarRegion<f64>,
    delta: f64,
    grid: &[f64],
    settings: &ConditionSettings<f64>,
) -> anyhow::Result<()> {
    match theorem4_scan(sys, u0, delta, grid, settings) {
        Ok(scan) => {
            let (rows, range) = mu_scan_records(&scan);
            report.mu_scan = rows;
            report.frequency_pulling = Some(range);
            Ok(())
        }
        Err(CertificateError::BaseCaseInvalid(cert)) => {
            report.errors.push(format!("mu scan skipped: base certificate invalid ({})", cert.failures.join(", ")));
            Ok(())
        }
        Err(CertificateError::ConditionsFailed(cert)) => {
            report.errors.push(format!("mu scan failed: {}", cert.failures.join(", ")));
            Ok(())
        }
        Err(CertificateError::Numeric(e)) => Err(e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_verification(
    report: &mut RunReport,
    name: &str,
    cert: &Certificate<f64>,
    sys: &PerturbedSystem<f64>,
    reported_eps: &[f64],
    engine_eps: &[f64],
    mus: &[Option<f64>],
    settings: &ShootingSettings<f64>,
) -> anyhow::Result<()> {
    if !cert.valid || engine_eps.is_empty() {
        return Ok(());
    }
    for &mu in mus {
        let table = verify_certificate(cert, sys, engine_eps, mu, None, settings)?;
        report.verification.extend(VerificationRecord::from_table(name, reported_eps, &table));
    }
    Ok(())
}

/// Forced van der Pol benchmark: the one-term annulus certificate, the
/// annular two-term certificate on `U₀ = {‖ξ‖ < 2}`, the detuning scan and
/// shooting verification. Config `epsilons` are physical values.
pub fn run_vdp(cfg: &ScenarioConfig) -> anyhow::Result<RunReport> {
    let delta = cfg.theorem.delta;
    if !(delta > 0.0 && delta < 2.0) {
        bail!("delta must lie in (0, 2), got {delta}");
    }
    for &e in &cfg.epsilons {
        if !(e > 0.0 && e <= 0.25) {
            bail!("physical epsilon must lie in (0, 0.25], got {e}");
        }
    }
    let mut clock = Clock::new(cfg.output.timings);
    let settings = condition_settings(cfg);
    let samples = cfg.grids.boundary_samples;
    let mut report = empty_report("vdp", cfg, Vec::new());
    report.normal_form = cfg.epsilons.iter().map(|&e| NormalFormEcho::new(e)).collect();
    let engine_eps: Vec<f64> = report.normal_form.iter().map(|n| n.epsilon_engine).collect();

    let one = with_tolerances(systems::vdp_one_term(), cfg)?;
    let annulus = PlanarRegion::annulus([0.0, 0.0], 2.0 - delta, 2.0 + delta)?.with_samples(samples);
    let prop1 = evaluate_theorem2(&one, &annulus, &settings)?;
    report.certificates.push(CertificateRecord::new(PROP1, &prop1));
    clock.mark(PROP1);

    let two = with_tolerances(systems::vdp_two_term(), cfg)?;
    let u0 = PlanarRegion::disc([0.0, 0.0], 2.0)?.with_samples(samples);
    let prop2 = evaluate_theorem3(&two, &u0, delta, &settings)?;
    report.certificates.push(CertificateRecord::new(PROP2, &prop2));
    clock.mark(PROP2);

    let grid = cfg.mu_grid.values()?;
    if !grid.is_empty() {
        run_scan(&mut report, &two, &u0, delta, &grid, &settings)?;
    }
    clock.mark("mu_scan");

    let mus: Vec<Option<f64>> = cfg.mu_grid.verify_values().into_iter().map(Some).collect();
    run_verification(&mut report, PROP2, &prop2, &two, &cfg.epsilons, &engine_eps, &mus, &shooting_settings(cfg))?;
    clock.mark("verification");

    report.valid = prop1.valid && prop2.valid;
    report.timings = clock.finish();
    Ok(report)
}

/// Convenience form of [`run_vdp`] with default grids.
pub fn run_vdp_scenario(epsilon_physical: &[f64], mu_grid: &[f64], delta: f64) -> anyhow::Result<RunReport> {
    let mut cfg = ScenarioConfig::vdp_default();
    cfg.epsilons = epsilon_physical.to_vec();
    cfg.mu_grid = crate::config::MuGridConfig::List(mu_grid.to_vec());
    cfg.theorem.delta = delta;
    run_vdp(&cfg)
}

/// Runs the configured theorem on the configured system and region.
/// Custom `epsilons` are used as the engine parameter directly.
pub fn analyze(cfg: &ScenarioConfig) -> anyhow::Result<RunReport> {
    if matches!(cfg.system, SystemConfig::Vdp) {
        return run_vdp(cfg);
    }
    let mut clock = Clock::new(cfg.output.timings);
    let (sys, warnings) = build_system(cfg)?;
    let settings = condition_settings(cfg);
    let region = build_region(&cfg.region, cfg.grids.boundary_samples)?;
    let mut report = empty_report("analyze", cfg, warnings);
    let delta = cfg.theorem.delta;
    let cert = match cfg.theorem.id {
        TheoremSpec::T1 => evaluate_theorem1(&sys, &region, &settings)?,
        TheoremSpec::T2 => evaluate_theorem2(&sys, &region, &settings)?,
        TheoremSpec::T3 | TheoremSpec::T4 => evaluate_theorem3(&sys, &region, delta, &settings)?,
    };
    let name = format!("{:?}", cfg.theorem.id);
    report.certificates.push(CertificateRecord::new(&name, &cert));
    clock.mark("certificate");
    let mus: Vec<Option<f64>> = if cfg.theorem.id == TheoremSpec::T4 {
        let grid = cfg.mu_grid.values()?;
        if cert.valid && !grid.is_empty() {
            run_scan(&mut report, &sys, &region, delta, &grid, &settings)?;
        }
        clock.mark("mu_scan");
        cfg.mu_grid.verify_values().into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    run_verification(&mut report, &name, &cert, &sys, &cfg.epsilons, &cfg.epsilons, &mus, &shooting_settings(cfg))?;
    clock.mark("verification");
    report.valid = cert.valid;
    report.timings = clock.finish();
    Ok(report)
}

/// Detuning scan only; uses the vdp system or the configured custom one.
pub fn scan_mu(cfg: &ScenarioConfig) -> anyhow::Result<RunReport> {
    let (sys, warnings) = build_system(cfg)?;
    let settings = condition_settings(cfg);
    let u0 = match cfg.system {
        SystemConfig::Vdp => PlanarRegion::disc([0.0, 0.0], 2.0)?.with_samples(cfg.grids.boundary_samples),
        SystemConfig::Custom { .. } => build_region(&cfg.region, cfg.grids.boundary_samples)?,
    };
    let delta = cfg.theorem.delta;
    let mut report = empty_report("scan-mu", cfg, warnings);
    let base = evaluate_theorem3(&sys, &u0, delta, &settings)?;
    report.certificates.push(CertificateRecord::new(PROP2, &base));
    if base.valid {
        run_scan(&mut report, &sys, &u0, delta, &cfg.mu_grid.values()?, &settings)?;
    }
    report.valid = base.valid;
    Ok(report)
}

/// Degree of a planar map given as two comma-separated expressions in `x1, x2`.
pub fn degree_of_expression(map: &str, region: &RegionConfig, samples: usize) -> anyhow::Result<DegreeResult<f64>> {
    let comps = expr::parse_list(map)?;
    if comps.len() != 2 {
        bail!("map needs exactly two components, got {}", comps.len());
    }
    if comps.iter().any(|c| c.max_state_index().is_some_and(|k| k > 1)) {
        bail!("map may only use x1 and x2");
    }
    let region = build_region(region, samples)?;
    let f = |p: [f64; 2]| {
        let env = Env { t: 0.0, x: &p, eps: 0.0, mu: 0.0 };
        Ok([comps[0].eval(&env), comps[1].eval(&env)])
    };
    Ok(region_degree(&f, &region)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_specs() {
        assert_eq!(parse_region_spec("disc:0,0,2").unwrap(), RegionConfig::Disc { center: [0.0, 0.0], radius: 2.0 });
        assert_eq!(
            parse_region_spec("annulus:1,-1,0.5,2").unwrap(),
            RegionConfig::Annulus { center: [1.0, -1.0], inner: 0.5, outer: 2.0 }
        );
        assert!(matches!(parse_region_spec("poly:0,0;1,0;0,1").unwrap(), RegionConfig::Polygon { vertices } if vertices.len() == 3));
        assert!(parse_region_spec("disc:0,0").is_err());
        assert!(parse_region_spec("square:1").is_err());
        assert!(parse_region_spec("disc0,0,1").is_err());
    }

    #[test]
    fn expression_degrees() {
        let disc = RegionConfig::Disc { center: [0.0, 0.0], radius: 1.0 };
        assert_eq!(degree_of_expression("x1^3 - 3*x1*x2^2, 3*x1^2*x2 - x2^3", &disc, 64).unwrap().degree, 3);
        assert_eq!(degree_of_expression("x1, -x2", &disc, 64).unwrap().degree, -1);
        assert_eq!(degree_of_expression("x1 + 5, x2", &disc, 64).unwrap().degree, 0);
        assert!(degree_of_expression("x1", &disc, 64).is_err());
    }

    #[test]
    fn vdp_input_ranges() {
        assert!(run_vdp_scenario(&[0.3], &[], 1.0).is_err());
        assert!(run_vdp_scenario(&[0.05], &[], 2.0).is_err());
        assert!(run_vdp_scenario(&[0.0], &[], 1.0).is_err());
    }

    #[test]
    fn custom_dimension_mismatch() {
        let cfg = ScenarioConfig::from_json(
            r#"{"system": {"kind": "custom", "psi": ["x2", "-x1"], "phi2": ["0"], "period": 6.283185307179586}}"#,
        )
        .unwrap();
        assert!(build_system(&cfg).is_err());
    }

    #[test]
    fn aperiodic_forcing_warns() {
        let cfg = ScenarioConfig::from_json(
            r#"{"system": {"kind": "custom", "psi": ["x2", "-x1"], "phi2": ["0", "sin(t/3)"], "period": "2*pi"}}"#,
        )
        .unwrap();
        let (_, warnings) = build_system(&cfg).unwrap();
        assert_eq!(warnings.len(), 1);
    }
}
