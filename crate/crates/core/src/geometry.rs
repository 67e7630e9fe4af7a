//! Conductor domains, signed distance, outward normals, sphere inversion and
//! the ring lattice used to discretize spheres.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::Vec3;

/// Relative boundary tolerance; multiplied by the domain diameter.
pub const BOUNDARY_TOL_FACTOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec3,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec3, radius: f64) -> Self {
        Ball { center, radius }
    }

    fn signed_distance(&self, x: &Vec3) -> f64 {
        (x - self.center).norm() - self.radius
    }
}

/// A compact conductor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConductorDomain {
    /// Solid closed ball.
    Ball(Ball),
    /// The sphere itself, with empty interior.
    SphereSurface(Ball),
    /// Finitely many balls with pairwise disjoint closures.
    BallUnion(Vec<Ball>),
    /// Solid ball of radius `radii[0]`, annuli `[radii[1], radii[2]]`,
    /// `[radii[3], radii[4]]`, ..., and the unit sphere. A trailing unpaired
    /// radius opens an annulus that closes at the unit sphere.
    NestedShells { radii: Vec<f64> },
    /// Closed straight segment.
    Segment { a: Vec3, b: Vec3 },
}

/// Radial piece of a nested-shell domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RadialInterval {
    pub inner: f64,
    pub outer: f64,
}

impl ConductorDomain {
    pub fn ball(center: Vec3, radius: f64) -> Self {
        ConductorDomain::Ball(Ball::new(center, radius))
    }

    pub fn sphere(center: Vec3, radius: f64) -> Self {
        ConductorDomain::SphereSurface(Ball::new(center, radius))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        match self {
            ConductorDomain::Ball(b) | ConductorDomain::SphereSurface(b) => {
                if !finite(&b.center) || !(b.radius > 0.0 && b.radius.is_finite()) {
                    return Err(FieldError::InvalidDomain(format!(
                        "radius must be positive and finite, got {}",
                        b.radius
                    )));
                }
            }
            ConductorDomain::BallUnion(balls) => {
                if balls.is_empty() {
                    return Err(FieldError::InvalidDomain("empty ball union".into()));
                }
                for b in balls {
                    ConductorDomain::Ball(*b).validate()?;
                }
                for (i, a) in balls.iter().enumerate() {
                    for b in &balls[i + 1..] {
                        if (a.center - b.center).norm() <= a.radius + b.radius {
                            return Err(FieldError::InvalidDomain(
                                "ball union components must have disjoint closures".into(),
                            ));
                        }
                    }
                }
            }
            ConductorDomain::NestedShells { radii } => {
                if radii.is_empty() {
                    return Err(FieldError::InvalidDomain("no shell radii".into()));
                }
                if radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(FieldError::InvalidDomain(
                        "shell radii must be positive and strictly increasing".into(),
                    ));
                }
                if radii[radii.len() - 1] >= 1.0 {
                    return Err(FieldError::InvalidDomain(
                        "shell radii must stay below the outer radius 1".into(),
                    ));
                }
            }
            ConductorDomain::Segment { a, b } => {
                if !finite(a) || !finite(b) || (a - b).norm() == 0.0 {
                    return Err(FieldError::InvalidDomain(
                        "segment endpoints must be finite and distinct".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ConductorDomain::Ball(b) | ConductorDomain::SphereSurface(b) => 2.0 * b.radius,
            ConductorDomain::BallUnion(balls) => {
                let mut d: f64 = 0.0;
                for (i, a) in balls.iter().enumerate() {
                    d = d.max(2.0 * a.radius);
                    for b in &balls[i + 1..] {
                        d = d.max((a.center - b.center).norm() + a.radius + b.radius);
                    }
                }
                d
            }
            ConductorDomain::NestedShells { .. } => 2.0,
            ConductorDomain::Segment { a, b } => (b - a).norm(),
        }
    }

    /// Boundary membership tolerance, `1e-9 * diameter`.
    pub fn boundary_tolerance(&self) -> f64 {
        BOUNDARY_TOL_FACTOR * self.diameter()
    }

    pub(crate) fn radial_intervals(radii: &[f64]) -> Vec<RadialInterval> {
        let mut out = vec![RadialInterval {
            inner: 0.0,
            outer: radii[0],
        }];
        let mut rest = radii[1..].chunks(2);
        for pair in rest.by_ref() {
            match pair {
                [a, b] => out.push(RadialInterval {
                    inner: *a,
                    outer: *b,
                }),
                [a] => out.push(RadialInterval {
                    inner: *a,
                    outer: 1.0,
                }),
                _ => unreachable!(),
            }
        }
        if out.last().map(|iv| iv.outer) != Some(1.0) {
            out.push(RadialInterval {
                inner: 1.0,
                outer: 1.0,
            });
        }
        out
    }

    /// Negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        match self {
            ConductorDomain::Ball(b) => b.signed_distance(x),
            ConductorDomain::SphereSurface(b) => b.signed_distance(x).abs(),
            ConductorDomain::BallUnion(balls) => balls
                .iter()
                .map(|b| b.signed_distance(x))
                .fold(f64::INFINITY, f64::min),
            ConductorDomain::NestedShells { radii } => {
                let rho = x.norm();
                let mut outside = f64::INFINITY;
                for iv in Self::radial_intervals(radii) {
                    if rho < iv.outer && (rho > iv.inner || iv.inner == 0.0) {
                        let to_outer = iv.outer - rho;
                        return if iv.inner == 0.0 {
                            -to_outer
                        } else {
                            -to_outer.min(rho - iv.inner)
                        };
                    }
                    let d = if rho < iv.inner {
                        iv.inner - rho
                    } else {
                        (rho - iv.outer).max(0.0)
                    };
                    outside = outside.min(d);
                }
                outside
            }
            ConductorDomain::Segment { a, b } => (x - closest_on_segment(a, b, x)).norm(),
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.signed_distance(x) <= self.boundary_tolerance()
    }

    pub fn is_on_boundary(&self, x: &Vec3) -> bool {
        self.signed_distance(x).abs() <= self.boundary_tolerance()
    }

    /// Unit outward normal at a boundary point.
    pub fn outward_normal(&self, x: &Vec3) -> Result<Vec3> {
        let tol = self.boundary_tolerance();
        let phi = self.signed_distance(x);
        if phi.abs() > tol {
            return Err(FieldError::NotOnBoundary {
                distance: phi.abs(),
                tolerance: tol,
            });
        }
        match self {
            ConductorDomain::Ball(b) | ConductorDomain::SphereSurface(b) => radial(&b.center, x),
            ConductorDomain::BallUnion(balls) => {
                let mut hits = balls
                    .iter()
                    .filter(|b| b.signed_distance(x).abs() <= tol);
                match (hits.next(), hits.next()) {
                    (Some(b), None) => radial(&b.center, x),
                    _ => Err(FieldError::AmbiguousNormal),
                }
            }
            ConductorDomain::NestedShells { radii } => {
                let rho = x.norm();
                let dir = radial(&Vec3::zeros(), x)?;
                for iv in Self::radial_intervals(radii) {
                    if (rho - iv.outer).abs() <= tol {
                        return Ok(dir);
                    }
                    if iv.inner > 0.0 && (rho - iv.inner).abs() <= tol {
                        return Ok(-dir);
                    }
                }
                Err(FieldError::AmbiguousNormal)
            }
            ConductorDomain::Segment { .. } => Err(FieldError::NoNormal),
        }
    }

    /// Nearest point of the closed domain; the identity on the domain.
    pub fn project(&self, x: &Vec3) -> Vec3 {
        match self {
            ConductorDomain::Ball(b) => {
                let v = x - b.center;
                let n = v.norm();
                if n <= b.radius {
                    *x
                } else {
                    b.center + v * (b.radius / n)
                }
            }
            ConductorDomain::SphereSurface(b) => {
                let v = x - b.center;
                let n = v.norm();
                if n == 0.0 {
                    b.center + Vec3::new(0.0, 0.0, b.radius)
                } else {
                    b.center + v * (b.radius / n)
                }
            }
            ConductorDomain::BallUnion(balls) => {
                let nearest = balls
                    .iter()
                    .min_by(|p, q| p.signed_distance(x).total_cmp(&q.signed_distance(x)))
                    .expect("validated union is non-empty");
                ConductorDomain::Ball(*nearest).project(x)
            }
            ConductorDomain::NestedShells { radii } => {
                let rho = x.norm();
                let mut best = (f64::INFINITY, rho);
                for iv in Self::radial_intervals(radii) {
                    let clamped = rho.clamp(iv.inner, iv.outer);
                    let d = (rho - clamped).abs();
                    if d < best.0 {
                        best = (d, clamped);
                    }
                }
                if best.0 == 0.0 {
                    *x
                } else if rho == 0.0 {
                    Vec3::new(0.0, 0.0, best.1)
                } else {
                    x * (best.1 / rho)
                }
            }
            ConductorDomain::Segment { a, b } => closest_on_segment(a, b, x),
        }
    }

    /// Removes from a gradient the components that would push a point out of
    /// the domain, leaving the descent directions that stay feasible.
    pub fn feasible_gradient(&self, x: &Vec3, grad: &Vec3) -> Vec3 {
        match self {
            ConductorDomain::SphereSurface(b) => {
                let n = match radial(&b.center, x) {
                    Ok(n) => n,
                    Err(_) => return *grad,
                };
                grad - n * grad.dot(&n)
            }
            ConductorDomain::NestedShells { radii } if (x.norm() - 1.0).abs()
                <= self.boundary_tolerance()
                && Self::radial_intervals(radii).last().map(|iv| iv.inner) == Some(1.0) =>
            {
                // isolated unit sphere: tangential motion only
                let n = x / x.norm();
                grad - n * grad.dot(&n)
            }
            ConductorDomain::Segment { a, b } => {
                let u = (b - a).normalize();
                let along = grad.dot(&u);
                let t = (x - a).dot(&u);
                let len = (b - a).norm();
                let tol = self.boundary_tolerance();
                // descent moves along -grad
                if (t <= tol && along > 0.0) || (t >= len - tol && along < 0.0) {
                    Vec3::zeros()
                } else {
                    u * along
                }
            }
            _ => {
                if !self.is_on_boundary(x) {
                    return *grad;
                }
                match self.outward_normal(x) {
                    Ok(n) => {
                        let gn = grad.dot(&n);
                        if gn < 0.0 {
                            grad - n * gn
                        } else {
                            *grad
                        }
                    }
                    Err(_) => *grad,
                }
            }
        }
    }

    /// Uniform random point on the boundary (area-weighted across pieces).
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match self {
            ConductorDomain::Ball(b) | ConductorDomain::SphereSurface(b) => {
                b.center + random_unit(rng) * b.radius
            }
            ConductorDomain::BallUnion(balls) => {
                let weights: Vec<f64> = balls.iter().map(|b| b.radius * b.radius).collect();
                let ball = balls[weighted_index(rng, &weights)];
                ball.center + random_unit(rng) * ball.radius
            }
            ConductorDomain::NestedShells { radii } => {
                let mut spheres: Vec<f64> = Vec::new();
                for iv in Self::radial_intervals(radii) {
                    if iv.inner > 0.0 && iv.inner < iv.outer {
                        spheres.push(iv.inner);
                    }
                    spheres.push(iv.outer);
                }
                let weights: Vec<f64> = spheres.iter().map(|r| r * r).collect();
                random_unit(rng) * spheres[weighted_index(rng, &weights)]
            }
            ConductorDomain::Segment { a, b } => a + (b - a) * rng.random::<f64>(),
        }
    }

    /// Whether the domain is convex with a smooth boundary.
    pub fn is_convex_smooth(&self) -> bool {
        match self {
            ConductorDomain::Ball(_) | ConductorDomain::SphereSurface(_) => true,
            ConductorDomain::BallUnion(balls) => balls.len() == 1,
            _ => false,
        }
    }
}

fn radial(center: &Vec3, x: &Vec3) -> Result<Vec3> {
    let v = x - center;
    let n = v.norm();
    if n == 0.0 {
        return Err(FieldError::AmbiguousNormal);
    }
    Ok(v / n)
}

fn closest_on_segment(a: &Vec3, b: &Vec3, x: &Vec3) -> Vec3 {
    let ab = b - a;
    let t = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}

pub(crate) fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn weighted_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Sphere inversion `c + R^2 (x - c) / |x - c|^2`.
pub fn kelvin_transform(center: &Vec3, radius: f64, x: &Vec3) -> Result<Vec3> {
    let v = x - center;
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return Err(FieldError::SingularPoint);
    }
    Ok(center + v * (radius * radius / n2))
}

/// Ring lattice on a sphere: polar angles `pi/2 + pi k / (2n)` for
/// `k = -n..=n`, and on each ring `floor(n sin phi)` points at azimuths
/// `2 pi j / (n sin phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalLattice {
    pub n: usize,
    pub radius: f64,
    pub points: Vec<Vec3>,
}

impl SphericalLattice {
    /// Number of distinct points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Separation bound `r / sqrt(N)`.
    pub fn separation_bound(&self) -> f64 {
        self.radius / (self.len() as f64).sqrt()
    }

    /// Covering radius bound `4 r / sqrt(N)`.
    pub fn covering_bound(&self) -> f64 {
        4.0 * self.separation_bound()
    }

    pub fn translated(&self, offset: &Vec3) -> Vec<Vec3> {
        self.points.iter().map(|p| p + offset).collect()
    }

    /// Ring sizes for k = -n..=n, pole rings included as zeros.
    pub fn ring_sizes(n: usize) -> Vec<usize> {
        (0..=2 * n)
            .map(|i| {
                let k = i as f64 - n as f64;
                let phi = PI / 2.0 + PI * k / (2.0 * n as f64);
                ring_count(n, phi)
            })
            .collect()
    }
}

fn ring_count(n: usize, phi: f64) -> usize {
    // absorb rounding when n sin(phi) is an integer in exact arithmetic
    (n as f64 * phi.sin() + 1e-9).floor().max(0.0) as usize
}

pub fn spherical_lattice(n: usize, radius: f64) -> Result<SphericalLattice> {
    if n == 0 {
        return Err(FieldError::InvalidParameter {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(FieldError::InvalidParameter {
            name: "r",
            reason: "must be positive".into(),
        });
    }
    let nf = n as f64;
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    for i in 0..=2 * n {
        let k = i as f64 - nf;
        let phi = PI / 2.0 + PI * k / (2.0 * nf);
        let s = phi.sin();
        let count = ring_count(n, phi);
        for j in 1..=count {
            let theta = 2.0 * PI * j as f64 / (nf * s);
            let p = Vec3::new(
                radius * s * theta.cos(),
                radius * s * theta.sin(),
                radius * phi.cos(),
            );
            let key = (
                (p.x / radius * 1e10).round() as i64,
                (p.y / radius * 1e10).round() as i64,
                (p.z / radius * 1e10).round() as i64,
            );
            if seen.insert(key) {
                points.push(p);
            }
        }
    }
    Ok(SphericalLattice { n, radius, points })
}
