use fekete_field::geometry::{kelvin_transform, spherical_lattice, ConductorDomain, SphericalLattice};
use fekete_field::Vec3;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-5.0f64..5.0).prop_map(Vec3::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kelvin_is_an_involution(c in point(), r in 0.1f64..4.0, x in point()) {
        prop_assume!((x - c).norm() > 1e-3);
        let y = kelvin_transform(&c, r, &x).unwrap();
        let back = kelvin_transform(&c, r, &y).unwrap();
        prop_assert!((back - x).norm() <= 1e-10 * x.norm().max(1.0));
        prop_assert!(((x - c).norm() * (y - c).norm() - r * r).abs() <= 1e-12 * r * r);
    }

    #[test]
    fn ball_signed_distance_is_exact(c in point(), r in 0.1f64..4.0, x in point()) {
        let ball = ConductorDomain::ball(c, r);
        prop_assert_eq!(ball.signed_distance(&x), (x - c).norm() - r);
    }
}

#[test]
fn kelvin_rejects_center() {
    assert!(kelvin_transform(&Vec3::zeros(), 1.0, &Vec3::zeros()).is_err());
}

#[test]
fn lattice_counts_follow_rings() {
    let lat = spherical_lattice(2, 1.0).unwrap();
    assert_eq!(lat.len(), 4);
    for n in 1..=24 {
        let lat = spherical_lattice(n, 1.0).unwrap();
        assert_eq!(lat.len(), SphericalLattice::ring_sizes(n).iter().sum::<usize>(), "n={n}");
    }
}

#[test]
fn lattice_points_are_separated() {
    for n in 1..=32 {
        let lat = spherical_lattice(n, 2.5).unwrap();
        for i in 0..lat.len() {
            assert!((lat.points[i].norm() - 2.5).abs() <= 1e-12);
            for j in 0..i {
                assert!((lat.points[i] - lat.points[j]).norm() >= lat.separation_bound(), "n={n}");
            }
        }
    }
}
