//! Charge recovery from surface and volume integrals.

use std::f64::consts::PI;

use serde::Serialize;

use super::potential::{evaluate, evaluate_gradient, Kernel, PotentialSource};
use crate::error::{FieldError, Result};
use crate::parallel::{pairwise_sum, try_map_indices};
use crate::Vec3;

/// Minimum clearance between a point source and the integration sphere.
pub const SURFACE_CLEARANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxResult {
    pub enclosed_charge: f64,
    pub quadrature_points: usize,
    /// Difference from the same rule at half the node counts.
    pub estimated_error: f64,
}

/// Unit vectors of the `n`-point Fibonacci sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden_angle = PI * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let s = i as f64 + 0.5;
            let z = 1.0 - 2.0 * s / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * s;
            Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

fn check_surface(source: &PotentialSource, center: &Vec3, radius: f64, n: usize) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(FieldError::InvalidParameter {
            name: "radius",
            reason: "must be positive".into(),
        });
    }
    if n < 2 {
        return Err(FieldError::InvalidParameter {
            name: "n_quad",
            reason: "at least 2 nodes required".into(),
        });
    }
    let min_distance = source
        .point_sources()
        .iter()
        .map(|(p, _)| ((p - center).norm() - radius).abs())
        .fold(f64::INFINITY, f64::min);
    if min_distance < SURFACE_CLEARANCE {
        return Err(FieldError::SourceOnSurface { min_distance });
    }
    Ok(())
}

/// `-1/(4 pi) * integral of dU/dn` over the sphere, as an equal-weight sum.
fn surface_term(kernel: Kernel, source: &PotentialSource, center: &Vec3, radius: f64, n: usize) -> Result<f64> {
    let nodes = fibonacci_sphere(n);
    let normal_derivs = try_map_indices(n, |i| {
        let normal = nodes[i];
        evaluate_gradient(kernel, source, &(center + normal * radius)).map(|g| g.dot(&normal))
    })?;
    Ok(-radius * radius * pairwise_sum(&normal_derivs) / n as f64)
}

fn gauss_estimate(source: &PotentialSource, center: &Vec3, radius: f64, n: usize) -> Result<f64> {
    surface_term(Kernel::Coulomb, source, center, radius, n)
}

/// Net charge inside the sphere by Gauss's law on a Fibonacci rule.
pub fn gauss_flux(source: &PotentialSource, center: &Vec3, radius: f64, n_quad: usize) -> Result<FluxResult> {
    check_surface(source, center, radius, n_quad)?;
    let full = gauss_estimate(source, center, radius, n_quad)?;
    let half = gauss_estimate(source, center, radius, (n_quad / 2).max(2))?;
    Ok(FluxResult {
        enclosed_charge: full,
        quadrature_points: n_quad,
        estimated_error: (full - half).abs(),
    })
}

// 3-D low-discrepancy additive recurrence; PLASTIC_3 is the real root of
// x^4 = x + 1.
const PLASTIC_3: f64 = 1.220_744_084_605_759_5;

/// Node `i` of the additive recurrence mapped uniformly into the unit ball.
fn ball_node(i: usize) -> Vec3 {
    let alpha = [1.0 / PLASTIC_3, 1.0 / PLASTIC_3.powi(2), 1.0 / PLASTIC_3.powi(3)];
    let k = (i + 1) as f64;
    let [u, v, w] = alpha.map(|a| (0.5 + a * k).fract());
    let r = u.cbrt();
    let cos_theta = 1.0 - 2.0 * v;
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = 2.0 * PI * w;
    Vec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta) * r
}

fn volume_term(source: &PotentialSource, center: &Vec3, radius: f64, n: usize) -> Result<f64> {
    let values = try_map_indices(n, |i| {
        let x = center + ball_node(i) * radius;
        match evaluate(Kernel::Yukawa, source, &x) {
            // a node landing on a point charge carries no weight in the limit
            Err(FieldError::SingularEvaluation { .. }) => Ok(0.0),
            other => other,
        }
    })?;
    let volume = 4.0 / 3.0 * PI * radius.powi(3);
    Ok(volume * pairwise_sum(&values) / n as f64 / (4.0 * PI))
}

fn yukawa_estimate(source: &PotentialSource, center: &Vec3, radius: f64, n_quad: usize, n_vol: usize) -> Result<f64> {
    Ok(volume_term(source, center, radius, n_vol)? + surface_term(Kernel::Yukawa, source, center, radius, n_quad)?)
}

/// Enclosed charge of a screened source:
/// `(1/4 pi) [ integral over the ball of U - integral over the sphere of dU/dn ]`.
///
/// The volume integral uses `n_vol` quasi-random nodes.
pub fn yukawa_flux(
    source: &PotentialSource,
    center: &Vec3,
    radius: f64,
    n_quad: usize,
    n_vol: usize,
) -> Result<FluxResult> {
    check_surface(source, center, radius, n_quad)?;
    if n_vol < 2 {
        return Err(FieldError::InvalidParameter {
            name: "n_vol",
            reason: "at least 2 nodes required".into(),
        });
    }
    let full = yukawa_estimate(source, center, radius, n_quad, n_vol)?;
    let half = yukawa_estimate(source, center, radius, (n_quad / 2).max(2), n_vol / 2)?;
    Ok(FluxResult {
        enclosed_charge: full,
        quadrature_points: n_quad + n_vol,
        estimated_error: (full - half).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcharge::ChargeConfiguration;

    fn charge_at(p: Vec3, q: f64) -> PotentialSource {
        PotentialSource::PointSet(ChargeConfiguration::new(vec![p], vec![q]).unwrap())
    }

    #[test]
    fn fibonacci_nodes_are_unit_and_balanced() {
        let nodes = fibonacci_sphere(1000);
        assert!(nodes.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
        let mean: Vec3 = nodes.iter().sum::<Vec3>() / 1000.0;
        assert!(mean.norm() < 1e-3);
    }

    #[test]
    fn ball_nodes_fill_the_ball() {
        let n = 20000;
        let inside = (0..n).map(ball_node).filter(|p| p.norm() <= 0.5).count();
        assert!((inside as f64 / n as f64 - 0.125).abs() < 2e-3);
    }

    #[test]
    fn gauss_recovers_point_charges() {
        let r = gauss_flux(&charge_at(Vec3::zeros(), 1.0), &Vec3::zeros(), 1.0, 2048).unwrap();
        assert!((r.enclosed_charge - 1.0).abs() <= 1e-6);
        assert!(r.estimated_error >= 0.0);
        let r = gauss_flux(&charge_at(Vec3::new(3.0, 0.0, 0.0), 1.0), &Vec3::zeros(), 1.0, 2048).unwrap();
        assert!(r.enclosed_charge.abs() <= 1e-6);
    }

    #[test]
    fn uniform_sphere_flux() {
        let s = PotentialSource::uniform_sphere(Vec3::zeros(), 0.5, -2.0).unwrap();
        let r = gauss_flux(&s, &Vec3::zeros(), 1.0, 256).unwrap();
        assert!((r.enclosed_charge + 2.0).abs() <= 1e-12);
        let y = yukawa_flux(&s, &Vec3::zeros(), 1.0, 1024, 20000).unwrap();
        assert!((y.enclosed_charge + 2.0).abs() <= 5e-3);
    }

    #[test]
    fn source_on_surface_rejected() {
        let err = gauss_flux(&charge_at(Vec3::new(1.0, 0.0, 0.0), 1.0), &Vec3::zeros(), 1.0, 64).unwrap_err();
        assert!(matches!(err, FieldError::SourceOnSurface { .. }));
    }

    #[test]
    fn yukawa_point_charge() {
        let r = yukawa_flux(&charge_at(Vec3::zeros(), 1.0), &Vec3::zeros(), 1.0, 4096, 100_000).unwrap();
        assert!((r.enclosed_charge - 1.0).abs() <= 5e-3, "{}", r.enclosed_charge);
        let r = yukawa_flux(&charge_at(Vec3::new(2.5, 0.0, 0.0), 1.0), &Vec3::zeros(), 1.0, 4096, 100_000).unwrap();
        assert!(r.enclosed_charge.abs() <= 5e-3, "{}", r.enclosed_charge);
    }
}
