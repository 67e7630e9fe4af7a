//! Voxel sampling of the potential and connected components of its
//! level sets.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::potential::{coulomb_potential, PotentialSource};
use crate::error::{FieldError, Result};
use crate::geometry::spherical_lattice;
use crate::io::{write_f64_le, write_i32_le};
use crate::parallel::map_indices;
use crate::pointcharge::ChargeConfiguration;
use crate::Vec3;

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 512;
pub const DEFAULT_SANDWICH_RESOLUTION: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelMode {
    /// `U >= threshold`
    Above,
    /// `U < threshold`
    Below,
}

impl LevelMode {
    pub fn selects(self, value: f64, threshold: f64) -> bool {
        match self {
            LevelMode::Above => value >= threshold,
            LevelMode::Below => value < threshold,
        }
    }
}

impl std::str::FromStr for LevelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "above" => Ok(LevelMode::Above),
            "below" => Ok(LevelMode::Below),
            other => Err(format!("expected above or below, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoundingBox {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(min[i] < max[i])) {
            return Err(FieldError::InvalidParameter {
                name: "bbox",
                reason: "min must be below max on every axis".into(),
            });
        }
        Ok(BoundingBox { min, max })
    }

    pub fn cube(center: Vec3, half_width: f64) -> Result<Self> {
        let h = Vec3::repeat(half_width);
        Self::new(center - h, center + h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub id: i32,
    pub voxel_count: usize,
    pub touches_boundary: bool,
}

/// Node values on a regular grid, x fastest: index `i + nx * (j + ny * k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldGrid {
    pub bbox: BoundingBox,
    pub resolution: [usize; 3],
    pub values: Vec<f64>,
    /// Component id per node, -1 where the threshold test fails.
    pub labels: Vec<i32>,
    pub threshold: f64,
    pub mode: LevelMode,
    pub components: Vec<ComponentSummary>,
}

#[derive(Serialize)]
struct GridHeader<'a> {
    bbox: [[f64; 3]; 2],
    resolution: [usize; 3],
    threshold: f64,
    mode: LevelMode,
    components: &'a [ComponentSummary],
}

fn check_resolution(resolution: [usize; 3]) -> Result<()> {
    match resolution
        .iter()
        .find(|r| !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(*r))
    {
        Some(r) => Err(FieldError::ResolutionOutOfRange(*r)),
        None => Ok(()),
    }
}

pub fn node_position(bbox: &BoundingBox, resolution: [usize; 3], idx: [usize; 3]) -> Vec3 {
    Vec3::from_fn(|a, _| {
        let n = resolution[a];
        if idx[a] == n - 1 {
            bbox.max[a]
        } else {
            bbox.min[a] + (bbox.max[a] - bbox.min[a]) * idx[a] as f64 / (n - 1) as f64
        }
    })
}

fn unflatten(resolution: [usize; 3], flat: usize) -> [usize; 3] {
    let [nx, ny, _] = resolution;
    [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
}

/// Coulomb potential at every node. A node sitting on a point charge gets
/// an infinite value of that charge's sign.
pub fn sample_grid(source: &PotentialSource, bbox: &BoundingBox, resolution: [usize; 3]) -> Result<Vec<f64>> {
    check_resolution(resolution)?;
    let total = resolution.iter().product();
    let values = map_indices(total, |flat| {
        let x = node_position(bbox, resolution, unflatten(resolution, flat));
        match coulomb_potential(source, &x) {
            Ok(u) => Ok(u),
            Err(FieldError::SingularEvaluation { charge, .. }) => Ok(f64::INFINITY.copysign(charge)),
            Err(e) => Err(e),
        }
    });
    values.into_iter().collect()
}

/// 6-connected components of the selected nodes, numbered in scanline order
/// of their first node.
pub fn label_components(resolution: [usize; 3], selected: &[bool]) -> (Vec<i32>, Vec<ComponentSummary>) {
    let [nx, ny, nz] = resolution;
    let mut labels = vec![-1i32; selected.len()];
    let mut summaries = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..selected.len() {
        if !selected[start] || labels[start] >= 0 {
            continue;
        }
        let id = summaries.len() as i32;
        let mut summary = ComponentSummary { id, voxel_count: 0, touches_boundary: false };
        labels[start] = id;
        queue.push_back(start);
        while let Some(flat) = queue.pop_front() {
            summary.voxel_count += 1;
            let [i, j, k] = unflatten(resolution, flat);
            if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                summary.touches_boundary = true;
            }
            let mut visit = |next: usize| {
                if selected[next] && labels[next] < 0 {
                    labels[next] = id;
                    queue.push_back(next);
                }
            };
            if i > 0 {
                visit(flat - 1);
            }
            if i + 1 < nx {
                visit(flat + 1);
            }
            if j > 0 {
                visit(flat - nx);
            }
            if j + 1 < ny {
                visit(flat + nx);
            }
            if k > 0 {
                visit(flat - nx * ny);
            }
            if k + 1 < nz {
                visit(flat + nx * ny);
            }
        }
        summaries.push(summary);
    }
    (labels, summaries)
}

/// Samples the potential and labels the components of the level set.
/// Components touching a face of `bbox` are reported as unbounded.
pub fn level_components(
    source: &PotentialSource,
    bbox: &BoundingBox,
    resolution: [usize; 3],
    threshold: f64,
    mode: LevelMode,
) -> Result<ScalarFieldGrid> {
    let values = sample_grid(source, bbox, resolution)?;
    Ok(ScalarFieldGrid::from_values(*bbox, resolution, values, threshold, mode))
}

impl ScalarFieldGrid {
    pub fn from_values(
        bbox: BoundingBox,
        resolution: [usize; 3],
        values: Vec<f64>,
        threshold: f64,
        mode: LevelMode,
    ) -> Self {
        let selected: Vec<bool> = values.iter().map(|u| mode.selects(*u, threshold)).collect();
        let (labels, components) = label_components(resolution, &selected);
        ScalarFieldGrid { bbox, resolution, values, labels, threshold, mode, components }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn node(&self, flat: usize) -> Vec3 {
        node_position(&self.bbox, self.resolution, unflatten(self.resolution, flat))
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn bounded_count(&self) -> usize {
        self.components.iter().filter(|c| !c.touches_boundary).count()
    }

    pub fn unbounded_count(&self) -> usize {
        self.components.iter().filter(|c| c.touches_boundary).count()
    }

    pub fn header_json(&self) -> Result<String> {
        let header = GridHeader {
            bbox: [self.bbox.min.into(), self.bbox.max.into()],
            resolution: self.resolution,
            threshold: self.threshold,
            mode: self.mode,
            components: &self.components,
        };
        serde_json::to_string_pretty(&header).map_err(|e| FieldError::Io(e.to_string()))
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.components).map_err(|e| FieldError::Io(e.to_string()))
    }

    pub fn write_values<W: Write>(&self, out: W) -> Result<()> {
        write_f64_le(out, &self.values)
    }

    pub fn write_labels<W: Write>(&self, out: W) -> Result<()> {
        write_i32_le(out, &self.labels)
    }
}

/// Two copies of the spherical lattice of radius `r` with `n` rings, one at
/// the origin and one at `(d, 0, 0)`, each point carrying `q`.
pub fn lattice_pair(n: usize, r: f64, d: f64, q: f64) -> Result<ChargeConfiguration> {
    let lattice = spherical_lattice(n, r)?;
    let mut positions = lattice.points.clone();
    positions.extend(lattice.translated(&Vec3::new(d, 0.0, 0.0)));
    ChargeConfiguration::uniform(positions, q)
}

/// Whether the bounded region around the origin cut out by the threshold
/// `sqrt(N)` is squeezed between `B(0, r - eps)` and `B(0, r + eps)`.
///
/// Each of the `N` lattice points carries `r / sqrt(N)`, so a uniform shell
/// of the same total charge would sit exactly at the threshold.
pub fn jagged_sandwich_check(n: usize, r: f64, d: f64, eps: f64) -> Result<bool> {
    jagged_sandwich_check_at(n, r, d, eps, DEFAULT_SANDWICH_RESOLUTION)
}

pub fn jagged_sandwich_check_at(n: usize, r: f64, d: f64, eps: f64, resolution: usize) -> Result<bool> {
    if !(r > 0.0) || !(eps > 0.0) {
        return Err(FieldError::InvalidParameter {
            name: "eps",
            reason: "r and eps must be positive".into(),
        });
    }
    if !(d > 2.0 * r) {
        return Err(FieldError::InvalidParameter {
            name: "d",
            reason: "lattices must be disjoint (d > 2r)".into(),
        });
    }
    let count = spherical_lattice(n, r)?.len();
    let big_n = count as f64;
    let config = lattice_pair(n, r, d, r / big_n.sqrt())?;
    let source = PotentialSource::PointSet(config);
    let half = 1.5 * r + 2.0 * eps;
    let bbox = BoundingBox::cube(Vec3::zeros(), half)?;
    let res = [resolution; 3];
    let values = sample_grid(&source, &bbox, res)?;
    let grid = ScalarFieldGrid::from_values(bbox, res, values, big_n.sqrt(), LevelMode::Below);

    // G: the low region reaching the box faces
    let outside: Vec<bool> = grid
        .labels
        .iter()
        .map(|l| *l >= 0 && grid.components[*l as usize].touches_boundary)
        .collect();
    let keep: Vec<bool> = outside.iter().map(|o| !o).collect();
    let (inner_labels, _) = label_components(res, &keep);
    let center = res.map(|n| (n - 1) / 2);
    let center_flat = grid.index(center[0], center[1], center[2]);
    let target = inner_labels[center_flat];
    if target < 0 {
        return Ok(false);
    }
    for (flat, label) in inner_labels.iter().enumerate() {
        let rho = grid.node(flat).norm();
        let in_e = *label == target;
        if rho <= r - eps && !in_e {
            return Ok(false);
        }
        if in_e && rho > r + eps {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_at_origin() -> PotentialSource {
        PotentialSource::PointSet(ChargeConfiguration::new(vec![Vec3::zeros()], vec![1.0]).unwrap())
    }

    #[test]
    fn single_charge_superlevel_ball() {
        let bbox = BoundingBox::cube(Vec3::zeros(), 2.0).unwrap();
        let g = level_components(&unit_at_origin(), &bbox, [33; 3], 1.0, LevelMode::Above).unwrap();
        assert_eq!(g.component_count(), 1);
        assert_eq!(g.bounded_count(), 1);
        for (flat, l) in g.labels.iter().enumerate() {
            assert_eq!(*l >= 0, g.node(flat).norm() <= 1.0 + 1e-12);
        }
        let g = level_components(&unit_at_origin(), &bbox, [33; 3], 1e300, LevelMode::Above).unwrap();
        assert_eq!(g.component_count(), 1); // only the singular node itself
        let g = level_components(&unit_at_origin(), &bbox, [32; 3], f64::INFINITY, LevelMode::Above).unwrap();
        assert_eq!(g.component_count(), 0);
    }

    #[test]
    fn resolution_bounds() {
        let bbox = BoundingBox::cube(Vec3::zeros(), 1.0).unwrap();
        for bad in [7, 513] {
            assert_eq!(
                level_components(&unit_at_origin(), &bbox, [16, bad, 16], 1.0, LevelMode::Above).unwrap_err(),
                FieldError::ResolutionOutOfRange(bad)
            );
        }
    }

    #[test]
    fn scanline_ids_and_boundary_flag() {
        let res = [8, 8, 8];
        let mut selected = vec![false; 512];
        selected[0] = true; // corner, touches boundary
        selected[9 + 64 * 3] = true; // interior isolated voxel (1,1,3)
        selected[2 + 8 * 2 + 64 * 2] = true;
        selected[3 + 8 * 2 + 64 * 2] = true;
        let (labels, comps) = label_components(res, &selected);
        assert_eq!(comps.len(), 3);
        assert_eq!(labels[0], 0);
        assert_eq!(labels[2 + 8 * 2 + 64 * 2], 1);
        assert_eq!(labels[3 + 8 * 2 + 64 * 2], 1);
        assert_eq!(labels[9 + 64 * 3], 2);
        assert!(comps[0].touches_boundary);
        assert!(!comps[1].touches_boundary);
        assert_eq!(comps[1].voxel_count, 2);
    }

    #[test]
    fn diagonal_neighbours_stay_separate() {
        let res = [8, 8, 8];
        let mut selected = vec![false; 512];
        selected[2 + 8 * 2 + 64 * 2] = true;
        selected[3 + 8 * 3 + 64 * 2] = true;
        assert_eq!(label_components(res, &selected).1.len(), 2);
    }

    #[test]
    fn binary_layout() {
        let bbox = BoundingBox::cube(Vec3::zeros(), 1.0).unwrap();
        let g = level_components(&unit_at_origin(), &bbox, [8, 9, 10], 2.0, LevelMode::Above).unwrap();
        let mut vals = Vec::new();
        g.write_values(&mut vals).unwrap();
        assert_eq!(vals.len(), 8 * 9 * 10 * 8);
        let back = crate::io::read_f64_le(&vals);
        assert_eq!(back, g.values);
        let header: serde_json::Value = serde_json::from_str(&g.header_json().unwrap()).unwrap();
        assert_eq!(header["resolution"], serde_json::json!([8, 9, 10]));
        assert_eq!(header["mode"], "above");
        assert_eq!(g.node(g.index(7, 8, 9)), Vec3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn sandwich_trivial_for_wide_eps() {
        assert!(jagged_sandwich_check_at(4, 1.0, 10.0, 1.0, 32).unwrap());
        assert!(jagged_sandwich_check_at(4, 1.0, 1.5, 0.1, 32).is_err());
    }
}
