use periodic_cert_bench::config::{GridConfig, MuGridConfig, RegionConfig, ScenarioConfig, TheoremSpec};
use periodic_cert_bench::report::{from_json, to_json, MARGINS_HEADER, MU_SCAN_HEADER, VERIFY_HEADER};
use periodic_cert_bench::report::{emit_report, Format};
use periodic_cert_bench::scenario::{analyze, run_vdp, scan_mu, PROP2};

fn reduced_vdp() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::vdp_default();
    cfg.grids = GridConfig { boundary_samples: 64, s_samples: 8, membership_samples: 64 };
    cfg.epsilons = Vec::new();
    cfg.mu_grid = MuGridConfig::List(Vec::new());
    cfg
}

fn custom_vdp() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_json(
        r#"{
            "system": {"kind": "custom", "psi": ["x2", "-x1"], "phi1": ["0", "(1 - x1^2)*x2"], "phi2": ["0", "-sin(t)"], "period": "2*pi"},
            "region": {"kind": "disc", "center": [0, 0], "radius": 2},
            "theorem": {"id": "T3", "delta": 1},
            "epsilons": []
        }"#,
    )
    .unwrap();
    cfg.grids = reduced_vdp().grids;
    cfg
}

#[test]
fn custom_expressions_match_builtin_vdp() {
    let builtin = run_vdp(&reduced_vdp()).unwrap();
    let custom = analyze(&custom_vdp()).unwrap();
    let a = builtin.certificate(PROP2).unwrap();
    let b = &custom.certificates[0];
    assert_eq!(a.predicted_degree, b.predicted_degree);
    assert_eq!(a.valid, b.valid);
    assert_eq!(a.conditions.len(), b.conditions.len());
    for (x, y) in a.conditions.iter().zip(&b.conditions) {
        assert_eq!(x.boundary, y.boundary);
        for (p, q) in [(x.a1_max_defect, y.a1_max_defect), (x.a2_max_gap, y.a2_max_gap), (x.a3_min_gap, y.a3_min_gap), (x.a4_min_gap, y.a4_min_gap)] {
            assert!((p - q).abs() <= 1e-10, "{}: {p} vs {q}", x.boundary);
        }
    }
}

#[test]
fn empty_mu_grid_yields_empty_scan() {
    let report = run_vdp(&reduced_vdp()).unwrap();
    assert!(report.mu_scan.is_empty());
    assert!(report.frequency_pulling.is_none());
    let json = to_json(&report).unwrap();
    assert!(json.contains("\"mu_scan\": []"));
}

#[test]
fn reduced_report_round_trips_through_json_and_csv() {
    let mut cfg = reduced_vdp();
    cfg.epsilons = vec![0.05];
    cfg.mu_grid = MuGridConfig::Range { start: -0.3, stop: 0.3, step: 0.1, verify: vec![0.0] };
    let report = run_vdp(&cfg).unwrap();
    assert!(report.valid);
    assert_eq!(report.verification.len(), 1);
    assert_eq!(report.mu_scan.len(), 7);

    let back = from_json(&to_json(&report).unwrap()).unwrap();
    assert_eq!(back, report);

    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&report, Format::Csv, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    let verify = read("verify.csv");
    assert!(verify.starts_with(&VERIFY_HEADER.join(",")));
    assert_eq!(verify.lines().count(), 2);
    assert!(read("margins.csv").starts_with(&MARGINS_HEADER.join(",")));
    let scan = read("mu_scan.csv");
    assert!(scan.starts_with(&MU_SCAN_HEADER.join(",")));
    assert_eq!(scan.lines().count(), 8);
}

#[test]
fn scan_mu_on_custom_system_matches_vdp() {
    let mut custom = custom_vdp();
    custom.mu_grid = MuGridConfig::Range { start: 0.0, stop: 0.3, step: 0.05, verify: Vec::new() };
    let mut builtin = reduced_vdp();
    builtin.mu_grid = custom.mu_grid.clone();
    let a = scan_mu(&builtin).unwrap().frequency_pulling.unwrap();
    let b = scan_mu(&custom).unwrap().frequency_pulling.unwrap();
    assert_eq!(a.mu_hat, b.mu_hat);
    assert!((a.mu_hat - 0.2).abs() < 1e-12);
}

#[test]
fn one_term_custom_annulus() {
    let mut cfg = ScenarioConfig::from_json(
        r#"{
            "system": {"kind": "custom", "psi": ["x2", "-x1"], "phi2": ["0", "(1 - x1^2)*x2"], "period": 6.283185307179586, "profile": "one_term"},
            "region": {"kind": "annulus", "center": [0, 0], "inner": 1, "outer": 3},
            "theorem": {"id": "T2"},
            "epsilons": [0.1]
        }"#,
    )
    .unwrap();
    cfg.grids.boundary_samples = 64;
    cfg.grids.s_samples = 8;
    let report = analyze(&cfg).unwrap();
    assert!(report.valid);
    assert_eq!(report.certificates[0].predicted_degree, Some(0));
    assert_eq!(cfg.theorem.id, TheoremSpec::T2);
    assert!(matches!(cfg.region, RegionConfig::Annulus { .. }));
}
