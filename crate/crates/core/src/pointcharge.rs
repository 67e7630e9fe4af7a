//! Discrete point-charge model: pair energy, Coulomb forces, static-state
//! verification and the interior-field lower bound.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::geometry::ConductorDomain;
use crate::io::write_table;
use crate::parallel::{pairwise_sum, pairwise_sum_vec3, try_map_indices};
use crate::Vec3;

/// Distances below this are treated as coincident charges.
pub const COINCIDENCE_TOL: f64 = 1e-14;

/// Point charges `q_k` at positions `x_k`, optionally tagged with the
/// conductor component each one belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeConfiguration {
    positions: Vec<Vec3>,
    charges: Vec<f64>,
    components: Option<Vec<usize>>,
}

impl ChargeConfiguration {
    pub fn new(positions: Vec<Vec3>, charges: Vec<f64>) -> Result<Self> {
        if positions.len() != charges.len() {
            return Err(FieldError::InvalidConfiguration(format!(
                "{} positions but {} charges",
                positions.len(),
                charges.len()
            )));
        }
        if positions.iter().any(|p| p.iter().any(|c| !c.is_finite()))
            || charges.iter().any(|q| !q.is_finite())
        {
            return Err(FieldError::InvalidConfiguration(
                "non-finite coordinate or charge".into(),
            ));
        }
        Ok(ChargeConfiguration {
            positions,
            charges,
            components: None,
        })
    }

    /// Tags charges with component ids; charges within one component must
    /// share a sign.
    pub fn with_components(mut self, components: Vec<usize>) -> Result<Self> {
        if components.len() != self.charges.len() {
            return Err(FieldError::InvalidConfiguration(
                "component index length mismatch".into(),
            ));
        }
        let max = components.iter().copied().max().unwrap_or(0);
        for c in 0..=max {
            let mut signs = components
                .iter()
                .zip(&self.charges)
                .filter(|(id, q)| **id == c && **q != 0.0)
                .map(|(_, q)| q.signum());
            if let Some(first) = signs.next() {
                if signs.any(|s| s != first) {
                    return Err(FieldError::InvalidConfiguration(format!(
                        "component {c} mixes charge signs"
                    )));
                }
            }
        }
        self.components = Some(components);
        Ok(self)
    }

    /// Same charge `q` at every position.
    pub fn uniform(positions: Vec<Vec3>, q: f64) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![q; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn components(&self) -> Option<&[usize]> {
        self.components.as_deref()
    }

    pub fn total_charge(&self) -> f64 {
        pairwise_sum(&self.charges)
    }

    /// Applies `f` to every position.
    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        ChargeConfiguration {
            positions: self.positions.iter().map(f).collect(),
            charges: self.charges.clone(),
            components: self.components.clone(),
        }
    }

    pub fn scaled_charges(&self, factor: f64) -> Self {
        ChargeConfiguration {
            positions: self.positions.clone(),
            charges: self.charges.iter().map(|q| q * factor).collect(),
            components: self.components.clone(),
        }
    }

    /// Concatenates two configurations; component tags are dropped unless
    /// both sides carry them.
    pub fn concat(&self, other: &Self) -> Self {
        let components = match (&self.components, &other.components) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        ChargeConfiguration {
            positions: self.positions.iter().chain(&other.positions).copied().collect(),
            charges: self.charges.iter().chain(&other.charges).copied().collect(),
            components,
        }
    }

    /// Fails with `CoincidentCharges` for the first (lexicographic) pair closer
    /// than [`COINCIDENCE_TOL`].
    pub fn check_distinct(&self) -> Result<()> {
        for (i, p) in self.positions.iter().enumerate() {
            for (j, q) in self.positions.iter().enumerate().skip(i + 1) {
                let d = (p - q).norm();
                if d < COINCIDENCE_TOL {
                    return Err(FieldError::CoincidentCharges {
                        first: i,
                        second: j,
                        distance: d,
                    });
                }
            }
        }
        Ok(())
    }

    /// Sorted multiset of pairwise distances; invariant under rigid motions.
    pub fn distance_multiset(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.len() * self.len().saturating_sub(1) / 2);
        for (i, p) in self.positions.iter().enumerate() {
            for q in &self.positions[i + 1..] {
                d.push((p - q).norm());
            }
        }
        d.sort_by(f64::total_cmp);
        d
    }

    /// CSV with header `x,y,z,q` (plus `component` when tagged).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|i| {
                let p = self.positions[i];
                let mut row = vec![p.x, p.y, p.z, self.charges[i]];
                if let Some(c) = &self.components {
                    row.push(c[i] as f64);
                }
                row
            })
            .collect();
        let header: &[&str] = if self.components.is_some() {
            &["x", "y", "z", "q", "component"]
        } else {
            &["x", "y", "z", "q"]
        };
        write_table(out, header, &rows, &[4])
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = reader
            .headers()
            .map_err(|e| FieldError::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let names: Vec<&str> = header.iter().collect();
        let has_component = match names.as_slice() {
            ["x", "y", "z", "q"] => false,
            ["x", "y", "z", "q", "component"] => true,
            _ => {
                return Err(FieldError::Parse {
                    line: 1,
                    message: format!("expected header x,y,z,q[,component], got {}", names.join(",")),
                })
            }
        };
        let mut positions = Vec::new();
        let mut charges = Vec::new();
        let mut components = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| FieldError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let parse = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| FieldError::Parse {
                    line,
                    message: format!("column {}: {e}", names[i]),
                })
            };
            positions.push(Vec3::new(parse(0)?, parse(1)?, parse(2)?));
            charges.push(parse(3)?);
            if has_component {
                let c = parse(4)?;
                if c < 0.0 || c.fract() != 0.0 {
                    return Err(FieldError::Parse {
                        line,
                        message: "component must be a non-negative integer".into(),
                    });
                }
                components.push(c as usize);
            }
        }
        let config = Self::new(positions, charges)?;
        if has_component {
            config.with_components(components)
        } else {
            Ok(config)
        }
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// `W = sum_{i<j} q_i q_j / |x_i - x_j|`.
pub fn total_energy(config: &ChargeConfiguration) -> Result<f64> {
    let pos = config.positions();
    let q = config.charges();
    let rows = try_map_indices(pos.len(), |i| {
        let mut row = Vec::with_capacity(pos.len() - i);
        for j in i + 1..pos.len() {
            let d = (pos[i] - pos[j]).norm();
            if d < COINCIDENCE_TOL {
                return Err(FieldError::CoincidentCharges {
                    first: i,
                    second: j,
                    distance: d,
                });
            }
            row.push(q[i] * q[j] / d);
        }
        Ok(pairwise_sum(&row))
    })?;
    Ok(pairwise_sum(&rows))
}

fn force_row(pos: &[Vec3], q: &[f64], k: usize) -> Result<Vec3> {
    let mut terms = Vec::with_capacity(pos.len());
    for j in 0..pos.len() {
        if j == k {
            continue;
        }
        let diff = pos[k] - pos[j];
        let d = diff.norm();
        if d < COINCIDENCE_TOL {
            return Err(FieldError::CoincidentCharges {
                first: k.min(j),
                second: k.max(j),
                distance: d,
            });
        }
        terms.push(diff * (q[j] * q[k] / (d * d * d)));
    }
    Ok(pairwise_sum_vec3(&terms))
}

/// Coulomb force exerted on charge `k` by all the others.
pub fn force_on(config: &ChargeConfiguration, k: usize) -> Result<Vec3> {
    if k >= config.len() {
        return Err(FieldError::InvalidParameter {
            name: "k",
            reason: format!("index {k} out of range for {} charges", config.len()),
        });
    }
    force_row(config.positions(), config.charges(), k)
}

/// Forces on every charge.
pub fn forces(config: &ChargeConfiguration) -> Result<Vec<Vec3>> {
    let pos = config.positions();
    let q = config.charges();
    try_map_indices(pos.len(), |k| force_row(pos, q, k))
}

/// Per-charge outcome of a static-state check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub index: usize,
    pub tangential: f64,
    /// Signed normal component `F . n`; positive means pressed outward.
    pub normal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticStateReport {
    /// `(index, |F|)` for charges strictly inside the conductor.
    pub interior_residuals: Vec<(usize, f64)>,
    pub boundary_reports: Vec<BoundaryReport>,
    pub is_static: bool,
    pub tolerance: f64,
}

impl StaticStateReport {
    pub fn max_interior_force(&self) -> f64 {
        self.interior_residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// A configuration is static when no charge can be moved by the others:
/// interior charges feel no force and boundary charges are only pushed
/// outward along the normal.
pub fn static_state_check(
    config: &ChargeConfiguration,
    domain: &ConductorDomain,
    tol: f64,
) -> Result<StaticStateReport> {
    domain.validate()?;
    let btol = domain.boundary_tolerance();
    for (i, x) in config.positions().iter().enumerate() {
        let phi = domain.signed_distance(x);
        if phi > btol {
            return Err(FieldError::ChargeOutsideDomain {
                index: i,
                distance: phi,
            });
        }
    }
    let f = forces(config)?;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (i, x) in config.positions().iter().enumerate() {
        let normal = if domain.is_on_boundary(x) {
            domain.outward_normal(x).ok()
        } else {
            None
        };
        match normal {
            Some(n) => {
                let lambda = f[i].dot(&n);
                let t = f[i] - n * lambda;
                boundary.push(BoundaryReport {
                    index: i,
                    tangential: t.norm(),
                    normal: lambda,
                });
            }
            None => interior.push((i, f[i].norm())),
        }
    }
    let is_static = interior.iter().all(|(_, m)| *m <= tol)
        && boundary
            .iter()
            .all(|b| b.tangential <= tol && b.normal >= -tol);
    Ok(StaticStateReport {
        interior_residuals: interior,
        boundary_reports: boundary,
        is_static,
        tolerance: tol,
    })
}

/// Lower bound `Q/d^2 - q/R^2` on the field at the center of a ball of
/// radius `R` carrying point charges of total `q`, with an external charge
/// `Q` at distance `d > R`.
pub fn cavendish_bound(external_charge: f64, distance: f64, ball_charge: f64, radius: f64) -> f64 {
    external_charge / (distance * distance) - ball_charge / (radius * radius)
}

/// Charges `(4, -1, 4)` at `-x`, the origin and `+x`; every force vanishes.
pub fn segment_example() -> ChargeConfiguration {
    ChargeConfiguration::new(
        vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)],
        vec![4.0, -1.0, 4.0],
    )
    .expect("distinct points")
}

/// Equal charges `q` on the vertices of a regular tetrahedron with edge
/// `sqrt(3)` plus one at its centroid (last index), where the force vanishes.
pub fn tetrahedron_example(q: f64) -> ChargeConfiguration {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    ChargeConfiguration::uniform(
        vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-0.5, 0.5 * s3, 0.0),
            Vec3::new(-0.5, -0.5 * s3, 0.0),
            Vec3::new(0.0, 0.0, s2),
            Vec3::new(0.0, 0.0, 0.25 * s2),
        ],
        q,
    )
    .expect("distinct points")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn energy_examples() {
        let two = ChargeConfiguration::uniform(vec![Vec3::zeros(), v(1.0, 0.0, 0.0)], 1.0).unwrap();
        assert_eq!(total_energy(&two).unwrap(), 1.0);
        assert_eq!(total_energy(&segment_example()).unwrap(), 0.0);
    }

    #[test]
    fn coincident_charges_rejected() {
        let c = ChargeConfiguration::uniform(vec![Vec3::zeros(), Vec3::zeros()], 1.0).unwrap();
        assert!(matches!(
            total_energy(&c),
            Err(FieldError::CoincidentCharges { first: 0, second: 1, .. })
        ));
        assert!(force_on(&c, 1).is_err());
    }

    #[test]
    fn force_examples() {
        assert_eq!(force_on(&segment_example(), 1).unwrap(), Vec3::zeros());
        let two = ChargeConfiguration::uniform(vec![Vec3::zeros(), v(2.0, 0.0, 0.0)], 1.0).unwrap();
        assert_eq!(force_on(&two, 1).unwrap(), v(0.25, 0.0, 0.0));
        assert_eq!(force_on(&two, 0).unwrap(), v(-0.25, 0.0, 0.0));
        assert!(force_on(&two, 2).is_err());
    }

    #[test]
    fn static_checks() {
        let ball2 = ConductorDomain::ball(Vec3::zeros(), 2.0);
        let report = static_state_check(&segment_example(), &ball2, 1e-12).unwrap();
        assert!(report.is_static);
        assert_eq!(report.interior_residuals.len(), 3);

        let pair = ChargeConfiguration::uniform(vec![v(-0.3, 0.0, 0.0), v(0.3, 0.0, 0.0)], 1.0)
            .unwrap();
        let ball1 = ConductorDomain::ball(Vec3::zeros(), 1.0);
        let report = static_state_check(&pair, &ball1, 1e-9).unwrap();
        assert!(!report.is_static);
        assert_relative_eq!(report.max_interior_force(), 1.0 / 0.36, max_relative = 1e-14);

        let outside = ChargeConfiguration::uniform(vec![v(3.0, 0.0, 0.0)], 1.0).unwrap();
        assert!(matches!(
            static_state_check(&outside, &ball1, 1e-9),
            Err(FieldError::ChargeOutsideDomain { index: 0, .. })
        ));
    }

    #[test]
    fn boundary_pressed_inward_is_not_static() {
        // a negative charge on the sphere next to a positive one inside is
        // pulled inward
        let c = ChargeConfiguration::new(vec![v(1.0, 0.0, 0.0), v(0.0, 0.0, 0.0)], vec![-1.0, 1.0])
            .unwrap();
        let ball = ConductorDomain::ball(Vec3::zeros(), 1.0);
        let report = static_state_check(&c, &ball, 1e-9).unwrap();
        assert_eq!(report.boundary_reports.len(), 1);
        assert!(report.boundary_reports[0].normal < 0.0);
        assert!(!report.is_static);
    }

    #[test]
    fn cavendish_arithmetic() {
        assert_eq!(cavendish_bound(4.0, 2.0, 1.0, 1.0), 0.0);
        assert_eq!(cavendish_bound(8.0, 2.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn component_signs_enforced() {
        let c = ChargeConfiguration::new(vec![Vec3::zeros(), v(1.0, 0.0, 0.0)], vec![1.0, -1.0])
            .unwrap();
        assert!(c.clone().with_components(vec![0, 0]).is_err());
        assert!(c.with_components(vec![0, 1]).is_ok());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let c = segment_example().with_components(vec![0, 1, 0]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,z,q,component\n"));
        assert_eq!(ChargeConfiguration::read_csv(buf.as_slice()).unwrap(), c);

        let bad = "x,y,z,q\n1,2,3,4\n1,2,oops,4\n";
        match ChargeConfiguration::read_csv(bad.as_bytes()) {
            Err(FieldError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ChargeConfiguration::read_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn tetrahedron_center_is_force_free() {
        let c = tetrahedron_example(1.0);
        assert!(force_on(&c, 4).unwrap().norm() <= 1e-12);
        let center = v(0.0, 0.0, 0.25 * 2f64.sqrt());
        let circumsphere = ConductorDomain::ball(center, 0.75 * 2f64.sqrt());
        let report = static_state_check(&c, &circumsphere, 1e-12).unwrap();
        assert!(report.is_static);
        assert_eq!(report.boundary_reports.len(), 4);
        assert_eq!(report.interior_residuals.len(), 1);
    }
}
