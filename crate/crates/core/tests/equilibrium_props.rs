use fekete_field::equilibrium::{
    lagrange_check, minimize_energy, problem_energy, verify_boundary, EquilibriumProblem, MinimizeOptions,
};
use fekete_field::geometry::ConductorDomain;
use fekete_field::pointcharge::{cavendish_bound, forces, ChargeConfiguration};
use fekete_field::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_ball() -> ConductorDomain {
    ConductorDomain::ball(Vec3::zeros(), 1.0)
}

fn random_in_ball(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v;
        }
    }
}

#[test]
fn minimum_beats_random_feasible_configurations() {
    let problem = EquilibriumProblem::single(unit_ball(), 10, 1.0);
    let best = minimize_energy(&problem).unwrap();
    assert!(best.converged);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let pts: Vec<Vec3> = (0..10).map(|_| random_in_ball(&mut rng)).collect();
        let w = problem_energy(&problem, &ChargeConfiguration::uniform(pts, 1.0).unwrap()).unwrap();
        assert!(best.energy <= w);
    }
}

#[test]
fn argmin_ignores_charge_scale() {
    let a = minimize_energy(&EquilibriumProblem::single(unit_ball(), 7, 1.0)).unwrap();
    let b = minimize_energy(&EquilibriumProblem::single(unit_ball(), 7, 3.5)).unwrap();
    assert!(a.converged && b.converged);
    assert!((b.energy - 3.5 * 3.5 * a.energy).abs() <= 1e-9 * b.energy);
    let da = a.config.distance_multiset();
    let db = b.config.distance_multiset();
    for (x, y) in da.iter().zip(&db) {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
}

#[test]
fn lagrange_multipliers_point_outward() {
    let problem = EquilibriumProblem::single(unit_ball(), 12, 1.0);
    let res = minimize_energy(&problem).unwrap();
    assert!(res.converged);
    assert!(res.lambda_min() >= -1e-8);
    assert!(verify_boundary(&res, &problem) <= 1e-6);
    for entry in lagrange_check(&res, &problem, 1e-6).unwrap() {
        assert!(entry.on_boundary);
        assert!(entry.lambda >= -1e-8);
        assert!(entry.residual <= 1e-6 * entry.force_norm.max(1.0));
    }
}

#[test]
fn same_seed_same_result() {
    let problem = EquilibriumProblem::single(ConductorDomain::sphere(Vec3::new(1.0, 2.0, 3.0), 2.0), 9, 0.5)
        .with_options(MinimizeOptions { rng_seed: 42, ..MinimizeOptions::default() });
    let a = minimize_energy(&problem).unwrap();
    let b = minimize_energy(&problem).unwrap();
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    assert_eq!(a.config.positions(), b.config.positions());
}

#[test]
fn cavendish_field_exceeds_bound() {
    let (n, q_total, radius, external, dist) = (50, 1.0, 1.0, 100.0, 2.0);
    let fixed = ChargeConfiguration::new(vec![Vec3::new(dist, 0.0, 0.0)], vec![external]).unwrap();
    let problem = EquilibriumProblem::single(ConductorDomain::ball(Vec3::zeros(), radius), n, q_total / n as f64)
        .with_fixed(fixed.clone());
    let res = minimize_energy(&problem).unwrap();
    assert!(res.converged);
    // field at the center from the ball charges and the external charge
    let probe = ChargeConfiguration::uniform(vec![Vec3::zeros()], 1.0).unwrap();
    let all = res.config.concat(&fixed).concat(&probe);
    let f = forces(&all).unwrap();
    let field = f.last().unwrap().norm();
    assert!(field >= cavendish_bound(external, dist, q_total, radius));
}

#[test]
fn charges_end_on_the_boundary() {
    let problem = EquilibriumProblem::single(unit_ball(), 20, 1.0);
    let res = minimize_energy(&problem).unwrap();
    for x in res.config.positions() {
        assert!((x.norm() - 1.0).abs() <= 1e-6);
    }
}
