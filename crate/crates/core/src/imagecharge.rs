//! Closed-form conductor potentials built from point images.
//!
//! # Two balls
//!
//! Balls `B(x0, R)` with charge `Q` and `B(y0, r)` with charge `q`. Images
//! alternate between the balls: `x_n` is the inversion of `y_{n-1}` in
//! sphere 1, `y_n` the inversion of `x_{n-1}` in sphere 2. With `D_n` at
//! `x_n` and `C_n` at `y_n`,
//!
//! ```text
//! D_0 = C,  C_0 = D,
//! D_n = -C_{n-1} |x_n - x0| / R,   C_n = -D_{n-1} |y_n - y0| / r,
//! ```
//!
//! which makes the potential `C/R` on sphere 1 and `D/r` on sphere 2. The
//! prefactors follow from the 2x2 system `Q = A11 C + A12 D`,
//! `q = A21 C + A22 D`, whose columns are the coefficient sums of the two
//! unit passes `(C, D) = (1, 0)` and `(0, 1)`.
//!
//! # Nested shells
//!
//! Concentric uniform shells with the solid inner ball, floating annuli and
//! an optional unit sphere; each floating component is neutral and carries a
//! constant potential.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::geometry::{kelvin_transform, ConductorDomain};
use crate::parallel::pairwise_sum;
use crate::pointcharge::ChargeConfiguration;
use crate::Vec3;

pub const DEFAULT_EPS_TAIL: f64 = 1e-12;
pub const DEFAULT_N_MAX: usize = 200;
pub const MAX_SHELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoBallSpec {
    pub center1: Vec3,
    pub radius1: f64,
    pub charge1: f64,
    pub center2: Vec3,
    pub radius2: f64,
    pub charge2: f64,
}

impl TwoBallSpec {
    /// Equal balls of radius `radius` and charge `charge`, surfaces `gap`
    /// apart along the x axis.
    pub fn symmetric(radius: f64, charge: f64, gap: f64) -> Self {
        TwoBallSpec {
            center1: Vec3::zeros(),
            radius1: radius,
            charge1: charge,
            center2: Vec3::new(gap + 2.0 * radius, 0.0, 0.0),
            radius2: radius,
            charge2: charge,
        }
    }

    pub fn center_distance(&self) -> f64 {
        (self.center2 - self.center1).norm()
    }

    /// Surface-to-surface gap.
    pub fn gap(&self) -> f64 {
        self.center_distance() - self.radius1 - self.radius2
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("radius1", self.radius1), ("radius2", self.radius2)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(FieldError::InvalidParameter {
                    name,
                    reason: "must be positive".into(),
                });
            }
        }
        if !(self.charge1.is_finite() && self.charge2.is_finite()) {
            return Err(FieldError::InvalidParameter {
                name: "charge",
                reason: "must be finite".into(),
            });
        }
        let dist = self.center_distance();
        if !(dist > self.radius1 + self.radius2) {
            return Err(FieldError::BallsOverlap {
                center_distance: dist,
                radius_sum: self.radius1 + self.radius2,
            });
        }
        Ok(())
    }

    pub fn domain(&self) -> ConductorDomain {
        ConductorDomain::BallUnion(vec![
            crate::geometry::Ball::new(self.center1, self.radius1),
            crate::geometry::Ball::new(self.center2, self.radius2),
        ])
    }
}

/// Solved image system for two balls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageChargeSystem {
    pub spec: TwoBallSpec,
    /// `x_0 .. x_N` inside ball 1 (`x_0` is its center).
    pub x_points: Vec<Vec3>,
    /// `y_0 .. y_N` inside ball 2.
    pub y_points: Vec<Vec3>,
    /// Potential prefactor of ball 1 (`U = C / R` on sphere 1).
    pub c: f64,
    /// Potential prefactor of ball 2 (`U = D / r` on sphere 2).
    pub d: f64,
    /// `C_n` at `y_n`.
    pub c_coeffs: Vec<f64>,
    /// `D_n` at `x_n`.
    pub d_coeffs: Vec<f64>,
    pub a: [[f64; 2]; 2],
    pub truncation_n: usize,
    /// Estimated magnitude of the neglected coefficients.
    pub tail_bound: f64,
    pub converged: bool,
}

/// Image chain and unit-pass coefficients, geometry only.
struct UnitPasses {
    x_points: Vec<Vec3>,
    y_points: Vec<Vec3>,
    /// (D_n, C_n) for (C, D) = (1, 0)
    pass_c: (Vec<f64>, Vec<f64>),
    /// (D_n, C_n) for (C, D) = (0, 1)
    pass_d: (Vec<f64>, Vec<f64>),
    converged: bool,
    tail: f64,
}

fn unit_passes(spec: &TwoBallSpec, eps_tail: f64, n_max: usize) -> Result<UnitPasses> {
    let (x0, big_r) = (spec.center1, spec.radius1);
    let (y0, small_r) = (spec.center2, spec.radius2);
    let mut xs = vec![x0];
    let mut ys = vec![y0];
    let mut pc = (vec![1.0], vec![0.0]);
    let mut pd = (vec![0.0], vec![1.0]);
    let mut converged = false;
    let mut n = 0;
    let mut last = 2.0;
    while n < n_max {
        n += 1;
        let xn = kelvin_transform(&x0, big_r, &ys[n - 1])?;
        let yn = kelvin_transform(&y0, small_r, &xs[n - 1])?;
        let ax = (xn - x0).norm() / big_r;
        let by = (yn - y0).norm() / small_r;
        xs.push(xn);
        ys.push(yn);
        for pass in [&mut pc, &mut pd] {
            let dn = -pass.1[n - 1] * ax;
            let cn = -pass.0[n - 1] * by;
            pass.0.push(dn);
            pass.1.push(cn);
        }
        last = pc.0[n].abs() + pc.1[n].abs() + pd.0[n].abs() + pd.1[n].abs();
        if last < eps_tail {
            converged = true;
            break;
        }
    }
    // geometric tail estimate from the last two terms
    let prev = if n >= 1 {
        pc.0[n - 1].abs() + pc.1[n - 1].abs() + pd.0[n - 1].abs() + pd.1[n - 1].abs()
    } else {
        f64::INFINITY
    };
    let ratio = if prev > 0.0 { (last / prev).min(0.999) } else { 0.0 };
    let tail = last * ratio / (1.0 - ratio);
    Ok(UnitPasses {
        x_points: xs,
        y_points: ys,
        pass_c: pc,
        pass_d: pd,
        converged,
        tail,
    })
}

impl ImageChargeSystem {
    /// Builds the truncated series even when the tail tolerance is not met;
    /// `converged` records whether it was.
    pub fn build(spec: &TwoBallSpec, eps_tail: f64, n_max: usize) -> Result<Self> {
        spec.validate()?;
        if !(eps_tail > 0.0) {
            return Err(FieldError::InvalidParameter {
                name: "eps_tail",
                reason: "must be positive".into(),
            });
        }
        let passes = unit_passes(spec, eps_tail, n_max)?;
        let a = [
            [pairwise_sum(&passes.pass_c.0), pairwise_sum(&passes.pass_d.0)],
            [pairwise_sum(&passes.pass_c.1), pairwise_sum(&passes.pass_d.1)],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(FieldError::SingularSystem);
        }
        let (big_q, small_q) = (spec.charge1, spec.charge2);
        let c = (a[1][1] * big_q - a[0][1] * small_q) / det;
        let d = (a[0][0] * small_q - a[1][0] * big_q) / det;
        let combine = |u: &[f64], v: &[f64]| -> Vec<f64> {
            u.iter().zip(v).map(|(p, q)| c * p + d * q).collect()
        };
        let d_coeffs = combine(&passes.pass_c.0, &passes.pass_d.0);
        let c_coeffs = combine(&passes.pass_c.1, &passes.pass_d.1);
        Ok(ImageChargeSystem {
            spec: *spec,
            truncation_n: passes.x_points.len() - 1,
            x_points: passes.x_points,
            y_points: passes.y_points,
            c,
            d,
            c_coeffs,
            d_coeffs,
            a,
            tail_bound: passes.tail * (c.abs() + d.abs()),
            converged: passes.converged,
        })
    }

    /// Sum of the image charges inside ball 1.
    pub fn charge_in_ball1(&self) -> f64 {
        pairwise_sum(&self.d_coeffs)
    }

    /// Sum of the image charges inside ball 2.
    pub fn charge_in_ball2(&self) -> f64 {
        pairwise_sum(&self.c_coeffs)
    }

    pub fn level1(&self) -> f64 {
        self.c / self.spec.radius1
    }

    pub fn level2(&self) -> f64 {
        self.d / self.spec.radius2
    }

    /// Index-ordered point images (x chain first, then y chain).
    pub fn images(&self) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        self.x_points
            .iter()
            .copied()
            .zip(self.d_coeffs.iter().copied())
            .chain(self.y_points.iter().copied().zip(self.c_coeffs.iter().copied()))
    }

    pub fn to_configuration(&self) -> Result<ChargeConfiguration> {
        let (p, q): (Vec<Vec3>, Vec<f64>) = self.images().unzip();
        ChargeConfiguration::new(p, q)
    }

    /// CSV rows `x,y,z,q` of all images.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.to_configuration()?.write_csv(out)
    }

    /// Which ball, if any, strictly contains `x`.
    pub(crate) fn inside_ball(&self, x: &Vec3) -> Option<usize> {
        let s = &self.spec;
        let tol1 = crate::geometry::BOUNDARY_TOL_FACTOR * 2.0 * s.radius1;
        let tol2 = crate::geometry::BOUNDARY_TOL_FACTOR * 2.0 * s.radius2;
        if (x - s.center1).norm() - s.radius1 < -tol1 {
            Some(0)
        } else if (x - s.center2).norm() - s.radius2 < -tol2 {
            Some(1)
        } else {
            None
        }
    }

    /// Raw image-sum potential (valid outside the balls).
    pub(crate) fn image_potential(&self, x: &Vec3) -> f64 {
        let terms: Vec<f64> = self.images().map(|(p, q)| q / (x - p).norm()).collect();
        pairwise_sum(&terms)
    }
}

/// Builds the image series and fails if the tail tolerance is not reached
/// within `n_max` terms.
pub fn solve_two_balls(spec: &TwoBallSpec, eps_tail: f64, n_max: usize) -> Result<ImageChargeSystem> {
    let system = ImageChargeSystem::build(spec, eps_tail, n_max)?;
    if !system.converged {
        return Err(FieldError::SeriesNotConverged {
            terms: system.truncation_n,
            tail: system.tail_bound,
        });
    }
    Ok(system)
}

/// Potential of the image system at a point outside both balls.
pub fn two_ball_potential(system: &ImageChargeSystem, x: &Vec3) -> Result<f64> {
    if system.inside_ball(x).is_some() {
        return Err(FieldError::InsideConductor);
    }
    Ok(system.image_potential(x))
}

/// Charges on concentric shells and their potential levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellSolution {
    /// Radii carrying charge; ends with 1.0 when the outer sphere is present.
    pub radii: Vec<f64>,
    pub charges: Vec<f64>,
    /// Component id of every radius (0 is the solid inner ball).
    pub component_of: Vec<usize>,
    /// Constant potential of each component.
    pub potential_levels: Vec<f64>,
    pub with_outer_sphere: bool,
}

impl ShellSolution {
    /// `sum_n q_n / max(|x|, r_n)`.
    pub fn potential_at_radius(&self, rho: f64) -> f64 {
        let terms: Vec<f64> = self
            .radii
            .iter()
            .zip(&self.charges)
            .map(|(r, q)| q / rho.max(*r))
            .collect();
        pairwise_sum(&terms)
    }

    pub fn potential(&self, x: &Vec3) -> f64 {
        self.potential_at_radius(x.norm())
    }

    /// Radial extent `[inner, outer]` of every component.
    pub fn component_ranges(&self) -> Vec<(f64, f64)> {
        let count = self.component_of.iter().copied().max().map_or(0, |m| m + 1);
        (0..count)
            .map(|c| {
                let rs: Vec<f64> = self
                    .radii
                    .iter()
                    .zip(&self.component_of)
                    .filter(|(_, id)| **id == c)
                    .map(|(r, _)| *r)
                    .collect();
                let inner = if c == 0 { 0.0 } else { rs[0] };
                (inner, *rs.last().expect("component has a radius"))
            })
            .collect()
    }
}

/// Induced charges on nested conductors.
///
/// The solid ball of radius `radii[0]` carries `q1`; the remaining radii
/// pair up into neutral annuli `[radii[1], radii[2]]`, ... . With
/// `with_outer_sphere` the unit sphere is added as the last surface, either
/// closing a trailing annulus or as an isolated neutral sphere. Equations:
/// the prescribed charge of the ball, neutrality of every floating
/// component, and equal potential on the two surfaces of each annulus.
pub fn solve_nested_shells(radii: &[f64], q1: f64, with_outer_sphere: bool) -> Result<ShellSolution> {
    if radii.is_empty() {
        return Err(FieldError::InvalidParameter {
            name: "radii",
            reason: "at least one radius required".into(),
        });
    }
    if radii.len() > MAX_SHELLS {
        return Err(FieldError::InvalidParameter {
            name: "radii",
            reason: format!("at most {MAX_SHELLS} shells supported"),
        });
    }
    if radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FieldError::InvalidParameter {
            name: "radii",
            reason: "must be positive and strictly increasing".into(),
        });
    }
    if with_outer_sphere && radii[radii.len() - 1] >= 1.0 {
        return Err(FieldError::InvalidParameter {
            name: "radii",
            reason: "must stay below the outer radius 1".into(),
        });
    }
    if !q1.is_finite() {
        return Err(FieldError::InvalidParameter {
            name: "q1",
            reason: "must be finite".into(),
        });
    }
    let mut all = radii.to_vec();
    if with_outer_sphere {
        all.push(1.0);
    }
    let m = all.len();
    let mut component_of = vec![0usize; m];
    let mut comp = 0;
    let mut i = 1;
    while i < m {
        comp += 1;
        component_of[i] = comp;
        if i + 1 < m {
            component_of[i + 1] = comp;
        }
        i += 2;
    }

    // potential at radius rho of a unit shell at radius r
    let shell = |rho: f64, r: f64| 1.0 / rho.max(r);
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    a[(0, 0)] = 1.0;
    b[0] = q1;
    let mut row = 1;
    let mut i = 1;
    while i < m {
        if i + 1 < m {
            a[(row, i)] = 1.0;
            a[(row, i + 1)] = 1.0;
            row += 1;
            let (inner, outer) = (all[i], all[i + 1]);
            for k in 0..m {
                a[(row, k)] = shell(outer, all[k]) - shell(inner, all[k]);
            }
            // scale the potential row to O(1) entries
            let scale = a.row(row).iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if scale > 0.0 {
                for k in 0..m {
                    a[(row, k)] /= scale;
                }
            }
            row += 1;
        } else {
            // isolated thin sphere: neutral
            a[(row, i)] = 1.0;
            row += 1;
        }
        i += 2;
    }
    debug_assert_eq!(row, m);
    let charges = a.lu().solve(&b).ok_or(FieldError::SingularSystem)?;
    if charges.iter().any(|q| !q.is_finite()) {
        return Err(FieldError::SingularSystem);
    }
    let mut solution = ShellSolution {
        radii: all,
        charges: charges.iter().copied().collect(),
        component_of,
        potential_levels: Vec::new(),
        with_outer_sphere,
    };
    solution.potential_levels = solution
        .component_ranges()
        .iter()
        .map(|(_, outer)| solution.potential_at_radius(*outer))
        .collect();
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_prefactors_match() {
        let s = solve_two_balls(&TwoBallSpec::symmetric(1.0, 1.0, 1.0), 1e-12, 200).unwrap();
        assert!((s.c - s.d).abs() <= 1e-12 * s.c.abs());
        assert_relative_eq!(s.charge_in_ball1(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.charge_in_ball2(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn far_apart_balls_decouple() {
        let spec = TwoBallSpec {
            center1: Vec3::zeros(),
            radius1: 1.0,
            charge1: 2.0,
            center2: Vec3::new(1e6, 0.0, 0.0),
            radius2: 0.5,
            charge2: -3.0,
        };
        let s = solve_two_balls(&spec, 1e-12, 200).unwrap();
        assert_relative_eq!(s.c, 2.0, max_relative = 1e-5);
        assert_relative_eq!(s.d, -3.0, max_relative = 1e-5);
    }

    #[test]
    fn overlap_rejected() {
        let spec = TwoBallSpec::symmetric(1.0, 1.0, -0.5);
        assert!(matches!(
            solve_two_balls(&spec, 1e-12, 200),
            Err(FieldError::BallsOverlap { .. })
        ));
    }

    #[test]
    fn series_limit_reported() {
        let spec = TwoBallSpec::symmetric(1.0, 1.0, 1e-4);
        assert!(matches!(
            solve_two_balls(&spec, 1e-12, 20),
            Err(FieldError::SeriesNotConverged { terms: 20, .. })
        ));
        let partial = ImageChargeSystem::build(&spec, 1e-12, 20).unwrap();
        assert!(!partial.converged);
        assert_eq!(partial.truncation_n, 20);
    }

    #[test]
    fn potential_on_spheres_and_inside() {
        let spec = TwoBallSpec {
            center1: Vec3::new(0.1, -0.2, 0.3),
            radius1: 1.0,
            charge1: 1.0,
            center2: Vec3::new(2.5, 0.4, 0.3),
            radius2: 0.7,
            charge2: 0.5,
        };
        let s = solve_two_balls(&spec, 1e-12, 200).unwrap();
        let on1 = spec.center1 + Vec3::new(0.0, 1.0, 0.0);
        assert_relative_eq!(two_ball_potential(&s, &on1).unwrap(), s.c, max_relative = 1e-10);
        let on2 = spec.center2 + Vec3::new(0.0, 0.0, -0.7);
        assert_relative_eq!(two_ball_potential(&s, &on2).unwrap(), s.d / 0.7, max_relative = 1e-10);
        assert_eq!(
            two_ball_potential(&s, &spec.center1),
            Err(FieldError::InsideConductor)
        );
    }

    #[test]
    fn midpoint_dips_below_surface_level() {
        let s = solve_two_balls(&TwoBallSpec::symmetric(1.0, 1.0, 1.0), 1e-12, 200).unwrap();
        let mid = two_ball_potential(&s, &Vec3::new(1.5, 0.0, 0.0)).unwrap();
        assert!(mid < s.level1());
    }

    #[test]
    fn shells_alternate() {
        let s = solve_nested_shells(&[0.2, 0.4, 0.6], 1.0, false).unwrap();
        for (q, e) in s.charges.iter().zip([1.0, -1.0, 1.0]) {
            assert!((q - e).abs() <= 1e-12);
        }
        let zero = solve_nested_shells(&[0.2, 0.4, 0.6], 0.0, true).unwrap();
        assert!(zero.charges.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn outer_sphere_closes_trailing_annulus() {
        let s = solve_nested_shells(&[0.3, 0.5], 2.0, true).unwrap();
        assert_eq!(s.radii, vec![0.3, 0.5, 1.0]);
        for (q, e) in s.charges.iter().zip([2.0, -2.0, 2.0]) {
            assert!((q - e).abs() <= 1e-12);
        }
        // isolated outer sphere stays neutral
        let s = solve_nested_shells(&[0.2, 0.4, 0.6], 1.0, true).unwrap();
        assert_eq!(s.charges.len(), 4);
        assert!(s.charges[3].abs() <= 1e-12);
    }

    #[test]
    fn shell_input_errors() {
        assert!(solve_nested_shells(&[0.4, 0.2], 1.0, false).is_err());
        assert!(solve_nested_shells(&[0.4, 1.2], 1.0, true).is_err());
        assert!(solve_nested_shells(&[], 1.0, true).is_err());
        let many: Vec<f64> = (1..=65).map(|i| i as f64 / 70.0).collect();
        assert!(solve_nested_shells(&many, 1.0, true).is_err());
    }
}
