//! Coulomb and Yukawa potentials of composite sources, with analytic
//! gradients.

use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::imagecharge::ImageChargeSystem;
use crate::parallel::{pairwise_sum, pairwise_sum_vec3};
use crate::pointcharge::{ChargeConfiguration, COINCIDENCE_TOL};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialSource {
    PointSet(ChargeConfiguration),
    /// Charge `charge` spread uniformly over the sphere `|x - center| = r0`.
    UniformSphere { center: Vec3, r0: f64, charge: f64 },
    /// Two conducting balls. Inside a ball the potential is its surface level.
    TwoBall(Box<ImageChargeSystem>),
    Sum(Vec<PotentialSource>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Coulomb,
    Yukawa,
}

impl PotentialSource {
    pub fn uniform_sphere(center: Vec3, r0: f64, charge: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(FieldError::InvalidParameter {
                name: "r0",
                reason: "must be positive".into(),
            });
        }
        Ok(PotentialSource::UniformSphere { center, r0, charge })
    }

    pub fn two_ball(system: ImageChargeSystem) -> Self {
        PotentialSource::TwoBall(Box::new(system))
    }

    /// Point sources that make the potential singular, with their charges.
    pub fn point_sources(&self) -> Vec<(Vec3, f64)> {
        match self {
            PotentialSource::PointSet(c) => c
                .positions()
                .iter()
                .copied()
                .zip(c.charges().iter().copied())
                .collect(),
            PotentialSource::UniformSphere { .. } => Vec::new(),
            PotentialSource::TwoBall(s) => s.images().collect(),
            PotentialSource::Sum(parts) => parts.iter().flat_map(|p| p.point_sources()).collect(),
        }
    }

    /// Same source with every charge multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            PotentialSource::PointSet(c) => PotentialSource::PointSet(c.scaled_charges(factor)),
            PotentialSource::UniformSphere { center, r0, charge } => PotentialSource::UniformSphere {
                center: *center,
                r0: *r0,
                charge: charge * factor,
            },
            PotentialSource::TwoBall(s) => {
                let mut s = (**s).clone();
                s.spec.charge1 *= factor;
                s.spec.charge2 *= factor;
                s.c *= factor;
                s.d *= factor;
                s.c_coeffs.iter_mut().for_each(|v| *v *= factor);
                s.d_coeffs.iter_mut().for_each(|v| *v *= factor);
                PotentialSource::TwoBall(Box::new(s))
            }
            PotentialSource::Sum(parts) => {
                PotentialSource::Sum(parts.iter().map(|p| p.scaled(factor)).collect())
            }
        }
    }

    /// Same source moved by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Self {
        match self {
            PotentialSource::PointSet(c) => PotentialSource::PointSet(c.map_positions(|p| p + offset)),
            PotentialSource::UniformSphere { center, r0, charge } => PotentialSource::UniformSphere {
                center: center + offset,
                r0: *r0,
                charge: *charge,
            },
            PotentialSource::TwoBall(s) => {
                let mut s = (**s).clone();
                s.spec.center1 += offset;
                s.spec.center2 += offset;
                s.x_points.iter_mut().for_each(|p| *p += offset);
                s.y_points.iter_mut().for_each(|p| *p += offset);
                PotentialSource::TwoBall(Box::new(s))
            }
            PotentialSource::Sum(parts) => {
                PotentialSource::Sum(parts.iter().map(|p| p.translated(offset)).collect())
            }
        }
    }
}

fn point_term(kernel: Kernel, x: &Vec3, p: &Vec3, q: f64) -> Result<f64> {
    let s = (x - p).norm();
    if s <= COINCIDENCE_TOL {
        return Err(FieldError::SingularEvaluation { charge: q, t: None });
    }
    Ok(match kernel {
        Kernel::Coulomb => q / s,
        Kernel::Yukawa => q * (-s).exp() / s,
    })
}

fn point_gradient(kernel: Kernel, x: &Vec3, p: &Vec3, q: f64) -> Result<Vec3> {
    let diff = x - p;
    let s = diff.norm();
    if s <= COINCIDENCE_TOL {
        return Err(FieldError::SingularEvaluation { charge: q, t: None });
    }
    let factor = match kernel {
        Kernel::Coulomb => -q / (s * s * s),
        Kernel::Yukawa => -q * (-s).exp() * (1.0 + s) / (s * s * s),
    };
    Ok(diff * factor)
}

fn sphere_value(kernel: Kernel, rho: f64, r0: f64, charge: f64) -> f64 {
    match kernel {
        Kernel::Coulomb => charge / rho.max(r0),
        Kernel::Yukawa if rho >= r0 => charge * r0.sinh() / r0 * (-rho).exp() / rho,
        Kernel::Yukawa => {
            let inner = if rho == 0.0 { 1.0 } else { rho.sinh() / rho };
            charge * (-r0).exp() / r0 * inner
        }
    }
}

/// d/d(rho) of [`sphere_value`].
fn sphere_slope(kernel: Kernel, rho: f64, r0: f64, charge: f64) -> f64 {
    match kernel {
        Kernel::Coulomb if rho > r0 => -charge / (rho * rho),
        Kernel::Coulomb => 0.0,
        Kernel::Yukawa if rho >= r0 => {
            -charge * r0.sinh() / r0 * (-rho).exp() * (1.0 + rho) / (rho * rho)
        }
        Kernel::Yukawa if rho == 0.0 => 0.0,
        Kernel::Yukawa => {
            charge * (-r0).exp() / r0 * (rho * rho.cosh() - rho.sinh()) / (rho * rho)
        }
    }
}

pub(crate) fn evaluate(kernel: Kernel, source: &PotentialSource, x: &Vec3) -> Result<f64> {
    match source {
        PotentialSource::PointSet(c) => {
            let terms = c
                .positions()
                .iter()
                .zip(c.charges())
                .map(|(p, q)| point_term(kernel, x, p, *q))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&terms))
        }
        PotentialSource::UniformSphere { center, r0, charge } => {
            Ok(sphere_value(kernel, (x - center).norm(), *r0, *charge))
        }
        PotentialSource::TwoBall(s) => {
            if kernel == Kernel::Coulomb {
                match s.inside_ball(x) {
                    Some(0) => return Ok(s.level1()),
                    Some(_) => return Ok(s.level2()),
                    None => {}
                }
            }
            let terms = s
                .images()
                .map(|(p, q)| point_term(kernel, x, &p, q))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&terms))
        }
        PotentialSource::Sum(parts) => {
            let terms = parts
                .iter()
                .map(|p| evaluate(kernel, p, x))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&terms))
        }
    }
}

pub(crate) fn evaluate_gradient(kernel: Kernel, source: &PotentialSource, x: &Vec3) -> Result<Vec3> {
    match source {
        PotentialSource::PointSet(c) => {
            let terms = c
                .positions()
                .iter()
                .zip(c.charges())
                .map(|(p, q)| point_gradient(kernel, x, p, *q))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum_vec3(&terms))
        }
        PotentialSource::UniformSphere { center, r0, charge } => {
            let diff = x - center;
            let rho = diff.norm();
            if rho == 0.0 {
                return Ok(Vec3::zeros());
            }
            Ok(diff * (sphere_slope(kernel, rho, *r0, *charge) / rho))
        }
        PotentialSource::TwoBall(s) => {
            if kernel == Kernel::Coulomb && s.inside_ball(x).is_some() {
                return Ok(Vec3::zeros());
            }
            let terms = s
                .images()
                .map(|(p, q)| point_gradient(kernel, x, &p, q))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum_vec3(&terms))
        }
        PotentialSource::Sum(parts) => {
            let terms = parts
                .iter()
                .map(|p| evaluate_gradient(kernel, p, x))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum_vec3(&terms))
        }
    }
}

/// Coulomb potential `sum q / |x - p|` of the source at `x`.
pub fn coulomb_potential(source: &PotentialSource, x: &Vec3) -> Result<f64> {
    evaluate(Kernel::Coulomb, source, x)
}

pub fn coulomb_gradient(source: &PotentialSource, x: &Vec3) -> Result<Vec3> {
    evaluate_gradient(Kernel::Coulomb, source, x)
}

/// Screened potential with kernel `exp(-s) / s`.
///
/// Two-ball sources are evaluated as their image point set; the images solve
/// the Coulomb conductor problem only.
pub fn yukawa_potential(source: &PotentialSource, x: &Vec3) -> Result<f64> {
    evaluate(Kernel::Yukawa, source, x)
}

pub fn yukawa_gradient(source: &PotentialSource, x: &Vec3) -> Result<Vec3> {
    evaluate_gradient(Kernel::Yukawa, source, x)
}
