//! Charged particle in a uniform magnetic field along z.

use crate::error::{FieldError, Result};
use crate::Vec3;

/// Position at time `t` of a particle of mass `m` and charge `e` starting
/// at the origin with speed `v` along x in the field `H`.
pub fn magnetic_trajectory(m: f64, v: f64, e: f64, h: f64, t: f64) -> Result<Vec3> {
    let eh = e * h;
    if eh == 0.0 {
        return Err(FieldError::ZeroField);
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(FieldError::InvalidParameter {
            name: "m",
            reason: "mass must be positive".into(),
        });
    }
    let omega = eh / m;
    let radius = m * v / eh;
    let phase = omega * t;
    // 1 - cos written without cancellation
    let half = (0.5 * phase).sin();
    Ok(Vec3::new(radius * phase.sin(), radius * 2.0 * half * half, 0.0))
}
