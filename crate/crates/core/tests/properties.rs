use std::f64::consts::PI;

use periodic_cert::linalg::distance;
use periodic_cert::theorem::{evaluate_theorem1, evaluate_theorem2};
use periodic_cert::{
    check_conditions, eta_direct, eta_lemma1, flow_point, fundamental_pair, region_degree, systems, ConditionSettings, EtaQuery,
    FnForcing, PerturbedSystem, PlanarRegion, Response,
};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -2.5f64..2.5
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn group_law(x1 in coord(), x2 in coord(), t in 0.0..2.0 * PI, s in 0.0..2.0 * PI) {
        let sys = systems::vdp_two_term::<f64>();
        let xi = [x1, x2];
        let via = flow_point(&sys, t, s, &flow_point(&sys, s, 0.0, &xi).unwrap()).unwrap();
        let direct = flow_point(&sys, t, 0.0, &xi).unwrap();
        prop_assert!(distance(&via, &direct) <= 1e-8);
    }

    #[test]
    fn cubic_group_law(x1 in -0.4f64..0.4, x2 in -0.4f64..0.4, t in 0.0..2.0 * PI, s in 0.0..2.0 * PI) {
        let sys = systems::cubic_system::<f64>();
        let xi = [x1, x2];
        let via = flow_point(&sys, t, s, &flow_point(&sys, s, 0.0, &xi).unwrap()).unwrap();
        let direct = flow_point(&sys, t, 0.0, &xi).unwrap();
        prop_assert!(distance(&via, &direct) <= 1e-8);
    }

    #[test]
    fn fundamental_pair_inverts(x1 in -0.4f64..0.4, x2 in -0.4f64..0.4, t in 0.0..2.0 * PI) {
        for sys in [systems::vdp_two_term::<f64>(), systems::cubic_system()] {
            let (y, yinv) = fundamental_pair(&sys, t, &[x1, x2]).unwrap();
            prop_assert!(yinv.mul(&y).identity_defect() <= 1e-8);
        }
    }

    #[test]
    fn routes_agree(x1 in coord(), x2 in coord(), t in 0.0..2.0 * PI, s in 0.0..2.0 * PI, first in any::<bool>()) {
        let sys = systems::vdp_two_term::<f64>();
        let which = if first { Response::First } else { Response::Second };
        let q = EtaQuery::new(which, s, t, vec![x1, x2]);
        let a = eta_direct(&sys, &q).unwrap();
        let b = eta_lemma1(&sys, &q).unwrap();
        prop_assert!(distance(&a, &b) <= 1e-8);
    }

    #[test]
    fn cubic_routes_agree(x1 in -0.4f64..0.4, x2 in -0.4f64..0.4, t in 0.0..2.0 * PI, s in 0.0..2.0 * PI) {
        let sys = PerturbedSystem::two_term(systems::cubic(), systems::vdp_damping(1.0), systems::sine_forcing(1.0, 1.0), 2.0 * PI).unwrap();
        for which in [Response::First, Response::Second] {
            let q = EtaQuery::new(which, s, t, vec![x1, x2]);
            let a = eta_direct(&sys, &q).unwrap();
            let b = eta_lemma1(&sys, &q).unwrap();
            prop_assert!(distance(&a, &b) <= 1e-8);
        }
    }

    #[test]
    fn degree_resampling_and_scaling(cx in -0.5f64..0.5, cy in -0.5f64..0.5, r in 0.5f64..1.8, c in 0.2f64..5.0) {
        let sys = systems::vdp_two_term::<f64>();
        let map = |p: [f64; 2]| {
            let g = periodic_cert::eta_period_gap(&sys, Response::First, 0.0, &p)?;
            Ok([g[0], g[1]])
        };
        let scaled = |p: [f64; 2]| map(p).map(|v| [c * v[0], c * v[1]]);
        let region = PlanarRegion::disc([cx, cy], r).unwrap().with_samples(64);
        let base = region_degree(&map, &region);
        prop_assume!(base.is_ok());
        let d = base.unwrap().degree;
        prop_assert_eq!(region_degree(&map, &region.clone().with_samples(128)).unwrap().degree, d);
        prop_assert_eq!(region_degree(&scaled, &region).unwrap().degree, d);
    }
}

#[test]
fn periodicity_transport() {
    let sys = systems::vdp_two_term::<f64>();
    let xi = [1.3, -0.4];
    for (t, s) in [(1.0, 0.5), (3.0, 2.0), (0.2, 4.0)] {
        let a = flow_point(&sys, t + 2.0 * PI, s + 2.0 * PI, &xi).unwrap();
        let b = flow_point(&sys, t, s, &xi).unwrap();
        assert!(distance(&a, &b) <= 1e-9);
    }
}

#[test]
fn rotation_returns_on_boundary() {
    let sys = systems::rotation_system::<f64>();
    let region = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap();
    let r = check_conditions(&sys, &region, &ConditionSettings::default()).unwrap();
    assert_eq!(r.boundary_samples, 256);
    assert!(r.a1_max_defect <= 1e-9);
}

#[test]
fn finer_grids_do_not_grow_a3_margin() {
    let sys = systems::vdp_two_term::<f64>();
    let region = PlanarRegion::disc([0.3, 0.1], 1.5).unwrap();
    let settings = ConditionSettings { s_samples: 8, collapse_s_grid: false, ..ConditionSettings::default() };
    let coarse = check_conditions(&sys, &region.clone().with_samples(64), &settings).unwrap();
    let fine = check_conditions(&sys, &region.clone().with_samples(128), &ConditionSettings { s_samples: 15, ..settings }).unwrap();
    // 64 ⊂ 128 samples and 8 ⊂ 15 anchors, so the minimum can only drop
    assert!(fine.a3_min_gap <= coarse.a3_min_gap);
    assert!(fine.a2_max_gap >= coarse.a2_max_gap);
}

#[test]
fn deterministic_reports() {
    let sys = systems::vdp_two_term::<f64>();
    let region = PlanarRegion::disc([0.0, 0.0], 2.5).unwrap().with_samples(64);
    let settings = ConditionSettings { s_samples: 8, ..ConditionSettings::default() };
    let a = check_conditions(&sys, &region, &settings).unwrap();
    let b = check_conditions(&systems::vdp_two_term(), &region, &settings).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_term_is_two_term_without_damping() {
    let forcing = |_: f64, x: &[f64], _: f64, _: f64, dx: &mut [f64]| {
        dx[0] = 0.0;
        dx[1] = (1.0 - x[0] * x[0]) * x[1];
    };
    let two = PerturbedSystem::two_term(systems::rotation(), systems::vdp_damping(0.0), FnForcing::new(2, forcing), 2.0 * PI).unwrap();
    let one = PerturbedSystem::one_term(systems::rotation(), FnForcing::new(2, forcing), 2.0 * PI).unwrap();
    let region = PlanarRegion::disc([0.0, 0.0], 1.5).unwrap().with_samples(64);
    let settings = ConditionSettings { s_samples: 8, ..ConditionSettings::default() };
    let c1 = evaluate_theorem1(&two, &region, &settings).unwrap();
    let c2 = evaluate_theorem2(&one, &region, &settings).unwrap();
    assert!(c1.valid && c2.valid);
    assert_eq!(c1.predicted_degree, c2.predicted_degree);
    assert_eq!(c1.predicted_degree, Some(1));
}
