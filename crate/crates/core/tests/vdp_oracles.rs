//! Closed-form checks on the van der Pol normal form.

use std::f64::consts::PI;

use periodic_cert::theorem::{detuned_system, evaluate_theorem2};
use periodic_cert::{
    eta_direct, eta_lemma1, eta_period_gap, flow_point, region_degree, systems, theorem3_certificate, theorem4_scan, ConditionSettings,
    CurveGeometry, EtaQuery, PlanarRegion, Response,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rotate(t: f64, xi: [f64; 2]) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    [c * xi[0] + s * xi[1], -s * xi[0] + c * xi[1]]
}

#[test]
fn rotation_flow_closed_form() {
    let sys = systems::rotation_system::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let t = rng.gen_range(0.0..2.0 * PI);
        let xi = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let x = flow_point(&sys, t, 0.0, &xi).unwrap();
        let r = rotate(t, xi);
        assert!((x[0] - r[0]).abs() < 1e-9 && (x[1] - r[1]).abs() < 1e-9);
    }
}

#[test]
fn damping_gap_closed_form() {
    let sys = systems::vdp_two_term::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let xi = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let k = PI - PI / 4.0 * (xi[0] * xi[0] + xi[1] * xi[1]);
        for s in [0.0, 1.0, 2.0 * PI] {
            let g = eta_period_gap(&sys, Response::First, s, &xi).unwrap();
            assert!((g[0] - k * xi[0]).abs() < 1e-6 && (g[1] - k * xi[1]).abs() < 1e-6, "{g:?} at {xi:?}");
        }
    }
}

#[test]
fn forcing_gap_is_constant() {
    // ∫₀^{2π} R(−τ)(0, −sin τ) dτ = (π, 0)
    let sys = systems::vdp_two_term::<f64>();
    for xi in [[0.0, 0.0], [1.0, -2.0], [2.5, 0.3]] {
        let g = eta_period_gap(&sys, Response::Second, 0.7, &xi).unwrap();
        assert!((g[0] - PI).abs() < 1e-8 && g[1].abs() < 1e-8, "{g:?}");
    }
}

#[test]
fn routes_agree_on_random_queries() {
    let sys = systems::vdp_two_term::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..40 {
        let which = if k % 2 == 0 { Response::First } else { Response::Second };
        let s = rng.gen_range(0.0..2.0 * PI);
        let t = rng.gen_range(0.0..2.0 * PI);
        let q = EtaQuery::new(which, s, t, vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
        let a = eta_direct(&sys, &q).unwrap();
        let b = eta_lemma1(&sys, &q).unwrap();
        assert!((a[0] - b[0]).abs() <= 1e-8 && (a[1] - b[1]).abs() <= 1e-8, "{a:?} vs {b:?}");
    }
}

#[test]
fn one_term_annulus_has_degree_zero() {
    let sys = systems::vdp_one_term::<f64>();
    let region = PlanarRegion::annulus([0.0, 0.0], 1.0, 3.0).unwrap().with_samples(128);
    let settings = ConditionSettings { s_samples: 8, ..ConditionSettings::default() };
    let cert = evaluate_theorem2(&sys, &region, &settings).unwrap();
    assert!(cert.valid, "{:?}", cert.failures);
    assert_eq!(cert.predicted_degree, Some(0));
}

#[test]
fn annular_certificate_degree_difference_is_one() {
    let sys = systems::vdp_two_term::<f64>();
    let u0 = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap().with_samples(64);
    let settings = ConditionSettings { s_samples: 8, ..ConditionSettings::default() };
    let cert = theorem3_certificate(&sys, &u0, 1.0, &settings).unwrap();
    assert_eq!(cert.predicted_degree, Some(1));
    assert_eq!(cert.degree("eta1(T,0,.) on U_delta").unwrap().degree, 1);
    assert_eq!(cert.degree("eta2(T,0,.) on U0").unwrap().degree, 0);
    let outer = cert.report("U_delta").unwrap();
    // |π − π(1+δ)²| · 2(1+δ) at δ = 1
    assert!((outer.a4_min_gap - 3.0 * PI * 4.0).abs() < 1e-6);
}

#[test]
fn scaled_center_matches_unit_center() {
    let settings = ConditionSettings { s_samples: 8, ..ConditionSettings::default() };
    let u0 = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap().with_samples(64);
    let cert = theorem3_certificate(&systems::vdp_two_term_scaled::<f64>(2.0), &u0, 1.0, &settings).unwrap();
    assert!((cert.period - PI).abs() < 1e-12);
    assert_eq!(cert.predicted_degree, Some(1));
}

#[test]
fn detuned_gap_adds_rotation_term() {
    let mu = 0.1;
    let sys = detuned_system(&systems::vdp_two_term::<f64>(), mu).unwrap();
    let xi = [1.0, 2.0];
    let g = eta_period_gap(&sys, Response::Second, 0.0, &xi).unwrap();
    // (π, 0) + 2πμ (ξ₂, −ξ₁)
    assert!((g[0] - (PI + 2.0 * PI * mu * xi[1])).abs() < 1e-8);
    assert!((g[1] + 2.0 * PI * mu * xi[0]).abs() < 1e-8);
}

#[test]
fn mu_scan_boundary_near_quarter() {
    let sys = systems::vdp_two_term::<f64>();
    let u0 = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap().with_samples(64);
    let settings = ConditionSettings { s_samples: 8, ..ConditionSettings::default() };
    let grid: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.05).collect();
    let scan = theorem4_scan(&sys, &u0, 1.0, &grid, &settings).unwrap();
    assert!((scan.mu_hat - 0.2).abs() < 1e-12, "{}", scan.mu_hat);
    let zero = scan.rows.iter().find(|r| r.mu == 0.0).unwrap();
    assert_eq!(zero.degree_difference, scan.base.predicted_degree);
    assert_eq!(zero.a3_margin, scan.base.report("U0").unwrap().a3_min_gap);
    // past the root the gap no longer vanishes inside U₀ and the difference drops to 0
    for row in scan.rows.iter().filter(|r| r.mu.abs() > 0.26) {
        assert!(!row.matches_base);
        assert_eq!(row.degree_difference, Some(0));
    }
    let edge = scan.rows.iter().find(|r| (r.mu - 0.25).abs() < 1e-12).unwrap();
    assert!(!edge.certificate.valid);
}

#[test]
fn polygon_square_degree() {
    let sys = systems::vdp_two_term::<f64>();
    let square = CurveGeometry::polygon(vec![[-3.0, -3.0], [3.0, -3.0], [3.0, 3.0], [-3.0, 3.0]]).unwrap();
    let region = PlanarRegion::from_curves(square, vec![], 128).unwrap();
    let map = |p: [f64; 2]| {
        let g = eta_period_gap(&sys, Response::First, 0.0, &p)?;
        Ok([g[0], g[1]])
    };
    // zeros at the origin (+1) and on the circle of radius 2 (not isolated),
    // but the square boundary sees −ξ scaled, which has degree 1.
    assert_eq!(region_degree(&map, &region).unwrap().degree, 1);
}
