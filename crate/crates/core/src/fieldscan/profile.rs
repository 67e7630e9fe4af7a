//! Potential along a segment and its oscillation.

use std::io::Write;

use serde::Serialize;

use super::potential::{coulomb_potential, PotentialSource};
use crate::error::{FieldError, Result};
use crate::imagecharge::{solve_two_balls, TwoBallSpec, DEFAULT_EPS_TAIL, DEFAULT_N_MAX};
use crate::io::write_csv;
use crate::parallel::try_map_indices;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentProfile {
    pub a: Vec3,
    pub b: Vec3,
    /// `(t, U)` with `t` increasing from 0 to 1.
    pub samples: Vec<(f64, f64)>,
}

impl SegmentProfile {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|(_, u)| *u)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.samples.iter().map(|(t, u)| vec![*t, *u]).collect();
        write_csv(out, &["t", "U"], &rows)
    }
}

/// `m` equally spaced Coulomb samples on `[a, b]`, endpoints included.
pub fn segment_profile(source: &PotentialSource, a: &Vec3, b: &Vec3, m: usize) -> Result<SegmentProfile> {
    if m < 2 {
        return Err(FieldError::InvalidParameter {
            name: "m",
            reason: "at least 2 samples required".into(),
        });
    }
    let step = 1.0 / (m - 1) as f64;
    let samples = try_map_indices(m, |i| {
        let t = if i == m - 1 { 1.0 } else { i as f64 * step };
        let x = a + (b - a) * t;
        match coulomb_potential(source, &x) {
            Ok(u) => Ok((t, u)),
            Err(FieldError::SingularEvaluation { charge, .. }) => {
                Err(FieldError::SingularEvaluation { charge, t: Some(t) })
            }
            Err(e) => Err(e),
        }
    })?;
    Ok(SegmentProfile { a: *a, b: *b, samples })
}

/// Largest minus smallest sample.
pub fn oscillation(profile: &SegmentProfile) -> f64 {
    let (lo, hi) = profile
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u), hi.max(u)));
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

/// Gap segment of a two-ball spec, from the surface of ball 1 to the
/// surface of ball 2 along the line of centers.
pub fn gap_segment(spec: &TwoBallSpec) -> (Vec3, Vec3) {
    let axis = (spec.center2 - spec.center1).normalize();
    (
        spec.center1 + axis * spec.radius1,
        spec.center2 - axis * spec.radius2,
    )
}

/// `E(d)` for equal balls of radius `radius` and charge `charge` whose
/// surfaces are `d` apart.
pub fn oscillation_at(radius: f64, charge: f64, d: f64, m: usize) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(FieldError::InvalidParameter {
            name: "d",
            reason: "gaps must be positive".into(),
        });
    }
    let spec = TwoBallSpec::symmetric(radius, charge, d);
    let system = solve_two_balls(&spec, DEFAULT_EPS_TAIL, DEFAULT_N_MAX)?;
    let (a, b) = gap_segment(&spec);
    let profile = segment_profile(&PotentialSource::two_ball(system), &a, &b, m)?;
    Ok(oscillation(&profile))
}

/// `(d, E(d))` for every gap in `d_values`.
pub fn oscillation_curve(radius: f64, charge: f64, d_values: &[f64], m: usize) -> Result<Vec<(f64, f64)>> {
    d_values
        .iter()
        .map(|d| oscillation_at(radius, charge, *d, m).map(|e| (*d, e)))
        .collect()
}

pub fn write_curve_csv<W: Write>(out: W, curve: &[(f64, f64)]) -> Result<()> {
    let rows: Vec<Vec<f64>> = curve.iter().map(|(d, e)| vec![*d, *e]).collect();
    write_csv(out, &["d", "E"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcharge::ChargeConfiguration;

    #[test]
    fn empty_source_is_flat() {
        let source = PotentialSource::Sum(Vec::new());
        let p = segment_profile(&source, &Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), 5).unwrap();
        assert!(p.values().all(|u| u == 0.0));
        assert_eq!(oscillation(&p), 0.0);
    }

    #[test]
    fn unit_charge_profile() {
        let source =
            PotentialSource::PointSet(ChargeConfiguration::new(vec![Vec3::zeros()], vec![1.0]).unwrap());
        let p = segment_profile(&source, &Vec3::new(1.0, 0.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), 2).unwrap();
        assert_eq!(p.samples, vec![(0.0, 1.0), (1.0, 0.5)]);
        assert_eq!(oscillation(&p), 0.5);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,U\n"));
    }

    #[test]
    fn singular_sample_reports_t() {
        let source =
            PotentialSource::PointSet(ChargeConfiguration::new(vec![Vec3::zeros()], vec![2.0]).unwrap());
        let err = segment_profile(&source, &Vec3::new(-1.0, 0.0, 0.0), &Vec3::new(1.0, 0.0, 0.0), 3)
            .unwrap_err();
        assert_eq!(err, FieldError::SingularEvaluation { charge: 2.0, t: Some(0.5) });
    }

    #[test]
    fn symmetric_two_ball_profile_is_mirror_symmetric() {
        let spec = TwoBallSpec::symmetric(1.0, 1.0, 1.0);
        let system = solve_two_balls(&spec, 1e-12, 200).unwrap();
        let (a, b) = gap_segment(&spec);
        let p = segment_profile(&PotentialSource::two_ball(system), &a, &b, 41).unwrap();
        let n = p.samples.len();
        for i in 0..n {
            assert!((p.samples[i].1 - p.samples[n - 1 - i].1).abs() <= 1e-9);
        }
        assert!(oscillation(&p) > 0.0);
    }

    #[test]
    fn curve_grows_with_gap() {
        // fixed charges: the gap potential sags further below the surface level
        // as the balls separate
        let curve = oscillation_curve(1.0, 1.0, &[0.5, 1.0, 2.0], 201).unwrap();
        assert!(curve.iter().all(|(_, e)| *e > 0.0));
        assert!(curve[0].1 < curve[1].1 && curve[1].1 < curve[2].1);
        assert!(oscillation_curve(1.0, 1.0, &[0.0], 11).is_err());
    }
}
