//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use periodic_cert::linalg::distance;
use periodic_cert::shooting::{find_periodic_orbit, FullField};
use periodic_cert::theorem::evaluate_theorem2;
use periodic_cert::{
    eta_direct, eta_lemma1, eta_period_gap, flow_point, fundamental_pair, integrate, region_degree, systems, ConditionSettings, EtaQuery,
    PerturbedSystemF64, PlanarRegion, Response, ShootingSettings, Tolerances,
};
use periodic_cert_bench::config::ScenarioConfig;
use periodic_cert_bench::report::RunReport;
use periodic_cert_bench::scenario::{run_vdp, PROP1, PROP2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn eta_map(sys: &PerturbedSystemF64, which: Response) -> impl Fn([f64; 2]) -> periodic_cert::Result<[f64; 2]> + Sync + '_ {
    move |p| {
        let v = eta_lemma1(sys, &EtaQuery::new(which, 0.0, sys.period(), p.to_vec()))?;
        Ok([v[0], v[1]])
    }
}

fn route_equivalence() -> Outcome {
    let sys = systems::vdp_two_term::<f64>();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let which = if k % 2 == 0 { Response::First } else { Response::Second };
        let q = EtaQuery::new(which, r.gen_range(0.0..2.0 * PI), r.gen_range(0.0..2.0 * PI), vec![r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)]);
        let a = eta_direct(&sys, &q).map_err(|e| e.to_string())?;
        let b = eta_lemma1(&sys, &q).map_err(|e| e.to_string())?;
        worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
    }
    check(worst <= 1e-8, format!("max |direct - lemma| = {worst:.3e} over 200 queries (tol 1e-8)"))
}

fn gap_formula() -> Outcome {
    let sys = systems::vdp_two_term::<f64>();
    let mut r = rng(2);
    let (mut formula, mut spread) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let xi = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
        let k = PI - PI / 4.0 * (xi[0] * xi[0] + xi[1] * xi[1]);
        let mut first: Option<Vec<f64>> = None;
        for j in 0..16 {
            let s = 2.0 * PI * j as f64 / 15.0;
            let g = eta_period_gap(&sys, Response::First, s, &xi).map_err(|e| e.to_string())?;
            formula = formula.max((g[0] - k * xi[0]).abs()).max((g[1] - k * xi[1]).abs());
            match &first {
                Some(f) => spread = spread.max(distance(f, &g)),
                None => first = Some(g),
            }
        }
    }
    check(
        formula <= 1e-6 && spread <= 1e-8,
        format!("formula error {formula:.3e} (tol 1e-6), s-spread {spread:.3e} (tol 1e-8)"),
    )
}

fn degree_values() -> Outcome {
    let sys = systems::vdp_two_term::<f64>();
    let mut parts = Vec::new();
    let mut ok = true;
    for delta in [0.25, 1.0] {
        let outer = PlanarRegion::disc([0.0, 0.0], 2.0 * (1.0 + delta)).unwrap();
        let d1 = region_degree(&eta_map(&sys, Response::First), &outer).map_err(|e| e.to_string())?.degree;
        let inner = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap();
        let d2 = region_degree(&eta_map(&sys, Response::Second), &inner).map_err(|e| e.to_string())?.degree;
        ok &= d1 == 1 && d2 == 0;
        parts.push(format!("delta {delta}: deg eta1 = {d1}, deg eta2 = {d2}"));
    }
    check(ok, parts.join("; "))
}

fn proposition_1(report: &RunReport) -> Outcome {
    let c = report.certificate(PROP1).ok_or("missing proposition_1")?;
    let sys = systems::vdp_one_term::<f64>();
    let annulus = PlanarRegion::annulus([0.0, 0.0], 1.0, 3.0).unwrap();
    let direct = evaluate_theorem2(&sys, &annulus, &ConditionSettings::default()).map_err(|e| e.to_string())?;
    check(
        c.valid && c.predicted_degree == Some(0) && direct.predicted_degree == Some(0),
        format!("annulus (1,3) degree {:?}, valid {}", c.predicted_degree, c.valid),
    )
}

fn proposition_2(report: &RunReport) -> Outcome {
    let c = report.certificate(PROP2).ok_or("missing proposition_2")?;
    let margins: Vec<String> = c
        .conditions
        .iter()
        .map(|r| format!("{}: A1 {:.1e} A2 {:.1e} A3 {:.3} A4 {:.3}", r.boundary, r.a1_max_defect, r.a2_max_gap, r.a3_min_gap, r.a4_min_gap))
        .collect();
    check(
        c.valid && c.failures.is_empty() && c.predicted_degree == Some(1),
        format!("degree difference {:?}; {}", c.predicted_degree, margins.join("; ")),
    )
}

fn lemma_identity() -> Outcome {
    let mut worst = 0.0f64;
    for (seed, sys, box_half) in [(3, systems::vdp_two_term::<f64>(), 3.0), (4, systems::cubic_system(), 0.4)] {
        let mut r = rng(seed);
        for _ in 0..100 {
            let t = r.gen_range(0.0..2.0 * PI);
            let xi = [r.gen_range(-box_half..box_half), r.gen_range(-box_half..box_half)];
            let (y, yinv) = fundamental_pair(&sys, t, &xi).map_err(|e| e.to_string())?;
            worst = worst.max(yinv.mul(&y).identity_defect());
        }
    }
    check(worst <= 1e-8, format!("max |Yinv Y - I| = {worst:.3e} (tol 1e-8)"))
}

fn flow_group_law() -> Outcome {
    let sys = systems::rotation_system::<f64>();
    let region = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap();
    let mut ret = 0.0f64;
    for p in region.outer().sample_points() {
        let x = flow_point(&sys, 2.0 * PI, 0.0, &p).map_err(|e| e.to_string())?;
        ret = ret.max(distance(&x, &p));
    }
    let mut r = rng(5);
    let mut group = 0.0f64;
    for _ in 0..100 {
        let (t, s) = (r.gen_range(0.0..2.0 * PI), r.gen_range(0.0..2.0 * PI));
        let xi = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
        let via = flow_point(&sys, t, s, &flow_point(&sys, s, 0.0, &xi).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        group = group.max(distance(&via, &flow_point(&sys, t, 0.0, &xi).map_err(|e| e.to_string())?));
    }
    check(ret <= 1e-9 && group <= 1e-8, format!("return defect {ret:.3e} on 256 samples (tol 1e-9), group law {group:.3e} (tol 1e-8)"))
}

/// Iterates the period map of the full system from a displaced start until it
/// settles and returns the distance to the shooting solution.
fn transient_oracle(sys: &PerturbedSystemF64, eps: f64, mu: f64, xi: &[f64]) -> Result<f64, String> {
    let orbit = find_periodic_orbit(sys, eps, Some(mu), xi, &ShootingSettings::default()).map_err(|e| e.to_string())?;
    let field = FullField::new(sys, eps, Some(mu));
    let mut x: Vec<f64> = orbit.initial_state.iter().map(|v| 1.1 * v).collect();
    for k in 0..20000 {
        let t0 = k as f64 * orbit.period;
        let next = integrate(&field, t0, t0 + orbit.period, &x, Tolerances::uniform(1e-12)).map_err(|e| e.to_string())?;
        let next = next.final_state().to_vec();
        let moved = distance(&next, &x);
        x = next;
        if moved < 1e-12 {
            return Ok(distance(&x, &orbit.initial_state));
        }
    }
    Err(format!("period map at eps {eps} mu {mu} did not settle"))
}

fn shooting_verification(report: &RunReport) -> Outcome {
    let sys = systems::vdp_two_term::<f64>();
    let mut parts = Vec::new();
    let mut ok = report.verification.len() == 9;
    let mut oracle = 0.0f64;
    for mu in [-0.1, 0.0, 0.1] {
        let rows: Vec<_> = report.verification.iter().filter(|r| r.mu == Some(mu)).collect();
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        ok &= eps == [0.01, 0.05, 0.1];
        let mut dev = Vec::new();
        for r in &rows {
            ok &= r.found && r.residual.is_some_and(|v| v < 1e-9) && r.in_region == Some(true);
            let amp = r.amplitude.unwrap_or(f64::NAN);
            dev.push((amp - 2.0).abs());
            let xi = r.initial_state.clone().unwrap_or_default();
            oracle = oracle.max(transient_oracle(&sys, r.epsilon_engine, mu, &xi)?);
        }
        // |amplitude − 2| shrinks as ε decreases
        ok &= dev.windows(2).all(|w| w[0] < w[1]);
        parts.push(format!("mu {mu:+}: |amp-2| = [{}]", dev.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ")));
    }
    ok &= oracle <= 1e-6;
    check(ok, format!("{}; transient oracle distance {oracle:.2e} (tol 1e-6)", parts.join("; ")))
}

fn mu_scan(report: &RunReport) -> Outcome {
    let range = report.frequency_pulling.as_ref().ok_or("no mu scan in report")?;
    // gap of the detuned forcing on ‖ξ‖ = 2: c + 2πμ Aξ with c the verified forcing gap,
    // which first vanishes when 2π|μ|·2 = |c|
    let sys = systems::vdp_two_term::<f64>();
    let c = eta_period_gap(&sys, Response::Second, 0.0, &[0.0, 0.0]).map_err(|e| e.to_string())?;
    let verified = (c[0] - PI).abs() < 1e-8 && c[1].abs() < 1e-8;
    let root = (c[0] * c[0] + c[1] * c[1]).sqrt() / (2.0 * PI * 2.0);
    let step = 0.05;
    check(
        verified && (range.mu_hat - root).abs() <= step + 1e-12,
        format!("empirical mu_hat {} vs oracle root {root:.6} (grid step {step})", range.mu_hat),
    )
}

fn degree_robustness() -> Outcome {
    let two = systems::vdp_two_term::<f64>();
    let one = systems::vdp_one_term::<f64>();
    let cases: Vec<(&str, &PerturbedSystemF64, Response, PlanarRegion<f64>)> = vec![
        ("eta1 on disc 4", &two, Response::First, PlanarRegion::disc([0.0, 0.0], 4.0).unwrap()),
        ("eta1 on disc 2.5", &two, Response::First, PlanarRegion::disc([0.0, 0.0], 2.5).unwrap()),
        ("eta2 on disc 2", &two, Response::Second, PlanarRegion::disc([0.0, 0.0], 2.0).unwrap()),
        ("one-term on annulus (1,3)", &one, Response::Second, PlanarRegion::annulus([0.0, 0.0], 1.0, 3.0).unwrap()),
        ("one-term on disc 1", &one, Response::Second, PlanarRegion::disc([0.0, 0.0], 1.0).unwrap()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sys, which, region) in cases {
        let map = eta_map(sys, which);
        let base = region_degree(&map, &region).map_err(|e| e.to_string())?.degree;
        let mut seen = vec![base];
        for samples in [64, 512] {
            seen.push(region_degree(&map, &region.clone().with_samples(samples)).map_err(|e| e.to_string())?.degree);
        }
        for c in [0.37, 4.2] {
            let scaled = |p: [f64; 2]| map(p).map(|v| [c * v[0], c * v[1]]);
            seen.push(region_degree(&scaled, &region).map_err(|e| e.to_string())?.degree);
        }
        ok &= seen.iter().all(|&d| d == base);
        parts.push(format!("{name}: {base}"));
    }
    check(ok, format!("identical under resampling (64/256/512) and scaling: {}", parts.join(", ")))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_pcert");
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut bodies = Vec::new();
    for d in &dirs {
        let status = Command::new(bin).current_dir(d.path()).args(["vdp", "--out", "out"]).output().map_err(|e| e.to_string())?;
        if status.status.code() != Some(0) {
            return Err(format!("vdp exited with {:?}", status.status.code()));
        }
        bodies.push(std::fs::read(d.path().join("out/report.json")).map_err(|e| e.to_string())?);
    }
    check(bodies[0] == bodies[1], format!("two runs, report.json {} bytes, identical: {}", bodies[0].len(), bodies[0] == bodies[1]))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let report = run_vdp(&ScenarioConfig::vdp_default());
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance: default vdp scenario failed: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("eta route equivalence", Box::new(route_equivalence)),
        ("damping gap formula", Box::new(gap_formula)),
        ("degree values", Box::new(degree_values)),
        ("proposition 1", Box::new(|| proposition_1(&report))),
        ("proposition 2", Box::new(|| proposition_2(&report))),
        ("fundamental pair identity", Box::new(lemma_identity)),
        ("flow group law and return", Box::new(flow_group_law)),
        ("shooting verification", Box::new(|| shooting_verification(&report))),
        ("theorem 4 scan", Box::new(|| mu_scan(&report))),
        ("degree robustness", Box::new(degree_robustness)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed in {:.1}s", criteria.len() - failed, criteria.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
