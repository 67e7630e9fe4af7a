//! Per-command parameter parsing and execution.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use fekete_field::equilibrium::{minimize_energy, EquilibriumProblem, MinimizeOptions};
use fekete_field::fieldscan::{
    coulomb_gradient, gap_segment, gauss_flux, level_components, magnetic_trajectory, oscillation,
    sample_grid, segment_profile, yukawa_flux, BoundingBox, LevelMode,
    PotentialSource, ScalarFieldGrid,
};
use fekete_field::geometry::{spherical_lattice, ConductorDomain};
use fekete_field::imagecharge::{solve_nested_shells, ImageChargeSystem, TwoBallSpec, MAX_SHELLS};
use fekete_field::io::{write_csv, write_f64_le, write_table};
use fekete_field::pointcharge::{
    cavendish_bound, segment_example, static_state_check, tetrahedron_example, ChargeConfiguration,
};
use fekete_field::{FieldError, Vec3};
use serde_json::{json, Value};

use crate::params::{Diagnostic, Params, Reader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Equilibrium,
    TwoBalls,
    Oscillation,
    Shells,
    Flux,
    Levelset,
    Grid,
    Trajectory,
    StaticCheck,
    Cavendish,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// A fully merged scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub command: Command,
    pub parameters: Params,
    pub output_dir: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_OUTPUT_DIR: &str = "output";

impl ScenarioConfig {
    /// Merges an optional JSON config file with flags; flags win.
    pub fn assemble(command: Command, config_file: Option<&Path>, flags: &[String]) -> Result<Self, Vec<Diagnostic>> {
        let mut diagnostics = Vec::new();
        let mut params = Params::new();
        if let Some(path) = config_file {
            match Params::from_config_file(path) {
                Ok((file_params, file_command)) => {
                    if let Some(c) = file_command.filter(|c| *c != command.name()) {
                        diagnostics.push(Diagnostic::new(
                            "command",
                            format!("config file is for `{c}`, not `{}`", command.name()),
                        ));
                    }
                    params = file_params;
                }
                Err(d) => diagnostics.push(d),
            }
        }
        match Params::from_flags(flags) {
            Ok(flag_params) => {
                if flag_params.contains("config") {
                    diagnostics.push(Diagnostic::new("config", "pass --config before the command parameters"));
                }
                params = params.merged_with(flag_params);
            }
            Err(mut ds) => diagnostics.append(&mut ds),
        }
        let mut reader = Reader::new(&params);
        let seed = if params.contains("seed") { reader.opt_u64("seed") } else { Some(0) };
        let output_dir = reader.string_or("output_dir", DEFAULT_OUTPUT_DIR);
        diagnostics.append(&mut reader.diagnostics);
        params.remove("seed");
        params.remove("output_dir");
        if diagnostics.is_empty() {
            Ok(ScenarioConfig {
                command,
                parameters: params,
                output_dir: PathBuf::from(output_dir.expect("checked")),
                seed: seed.expect("checked"),
            })
        } else {
            Err(diagnostics)
        }
    }
}

/// Problems with the scenario; empty when `run` would start.
pub fn validate(config: &ScenarioConfig) -> Vec<Diagnostic> {
    match parse_job(config) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Success,
    /// Outputs written but flagged; carries the reason.
    NumericalFailure(String),
}

#[derive(Debug)]
pub struct RunReport {
    pub status: Status,
    pub result: Value,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
pub enum RunError {
    Invalid(Vec<Diagnostic>),
    /// The computation itself failed; `run.json` records the reason.
    Numerical(String),
    Io(String),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<FieldError> for RunError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Io(m) => RunError::Io(m),
            FieldError::InvalidParameter { name, reason } => RunError::Invalid(vec![Diagnostic::new(name, reason)]),
            e @ (FieldError::NotConverged { .. }
            | FieldError::SeriesNotConverged { .. }
            | FieldError::SingularSystem
            | FieldError::SingularEvaluation { .. }
            | FieldError::CoincidentCharges { .. }) => RunError::Numerical(e.to_string()),
            other => RunError::Invalid(vec![Diagnostic::new("parameters", other.to_string())]),
        }
    }
}

/// Exit status for a finished run.
pub fn exit_code(outcome: &Result<RunReport, RunError>) -> i32 {
    match outcome {
        Ok(RunReport { status: Status::Success, .. }) => 0,
        Ok(RunReport { status: Status::NumericalFailure(_), .. }) => 3,
        Err(RunError::Invalid(_)) => 2,
        Err(RunError::Numerical(_)) => 3,
        Err(RunError::Io(_)) => 1,
    }
}

struct SourceSpec {
    source: PotentialSource,
    /// `(center, radius)` of each body, for the bounding-box check.
    bodies: Vec<(Vec3, f64)>,
    default_threshold: Option<f64>,
    converged: bool,
    info: Value,
}

struct BoxSpec {
    bbox: BoundingBox,
    resolution: [usize; 3],
}

enum Job {
    Equilibrium { problem: EquilibriumProblem },
    TwoBalls { spec: TwoBallSpec, eps_tail: f64, n_max: usize, samples: usize },
    Oscillation { radius: f64, charge: f64, gaps: Vec<f64>, samples: usize, eps_tail: f64, n_max: usize },
    Shells { radii: Vec<f64>, q1: f64, outer: bool },
    Flux { source: SourceSpec, center: Vec3, radius: f64, n_quad: usize, yukawa: Option<usize> },
    Levelset { source: SourceSpec, grid: BoxSpec, threshold: f64, mode: LevelMode },
    Grid { source: SourceSpec, grid: BoxSpec },
    Trajectory { m: f64, v: f64, e: f64, h: f64, times: Vec<f64> },
    StaticCheck { config: ChargeConfiguration, domain: ConductorDomain, tol: f64 },
    Cavendish { problem: EquilibriumProblem, external: f64, distance: f64, total: f64, radius: f64 },
}

fn read_options(r: &mut Reader, seed: u64) -> Option<MinimizeOptions> {
    let restarts = r.usize_or("restarts", 8);
    let restarts = r.check("restarts", restarts, |v| v >= 1, "at least 1");
    let max_iterations = r.usize_or("max_iterations", 20_000);
    let max_iterations = r.check("max_iterations", max_iterations, |v| v >= 1, "at least 1");
    let gradient_tol = if r.has("gradient_tol") {
        let v = r.opt_f64("gradient_tol");
        Some(r.positive("gradient_tol", v)?)
    } else {
        None
    };
    Some(MinimizeOptions {
        max_iterations: max_iterations?,
        gradient_tol,
        restarts: restarts?,
        rng_seed: seed,
        ..MinimizeOptions::default()
    })
}

fn read_two_balls(r: &mut Reader) -> Option<TwoBallSpec> {
    let center1 = r.vec3_or("center1", Vec3::zeros());
    let radius1 = r.f64("radius1");
    let radius1 = r.positive("radius1", radius1);
    let charge1 = r.f64("charge1");
    let center2 = r.vec3("center2");
    let radius2 = r.f64("radius2");
    let radius2 = r.positive("radius2", radius2);
    let charge2 = r.f64("charge2");
    let spec = TwoBallSpec {
        center1: center1?,
        radius1: radius1?,
        charge1: charge1?,
        center2: center2?,
        radius2: radius2?,
        charge2: charge2?,
    };
    if let Err(FieldError::BallsOverlap { center_distance, radius_sum }) = spec.validate() {
        r.error(
            "center2",
            format!(
                "balls must be disjoint: |center2 - center1| = {center_distance} must exceed radius1 + radius2 = {radius_sum}"
            ),
        );
        return None;
    }
    Some(spec)
}

fn read_series(r: &mut Reader) -> (Option<f64>, Option<usize>) {
    let eps = r.f64_or("eps_tail", 1e-12);
    let eps = r.positive("eps_tail", eps);
    let n_max = r.usize_or("n_max", 200);
    let n_max = r.check("n_max", n_max, |v| v >= 1, "at least 1");
    (eps, n_max)
}

fn read_source(r: &mut Reader) -> Option<SourceSpec> {
    let kind = r.choice("source", &["point", "points", "uniform-sphere", "two-balls", "lattice-pair"])?;
    match kind.as_str() {
        "point" => {
            let p = r.vec3_or("position", Vec3::zeros());
            let q = r.f64_or("charge", 1.0);
            let config = ChargeConfiguration::new(vec![p?], vec![q?]).ok()?;
            Some(SourceSpec {
                source: PotentialSource::PointSet(config),
                bodies: vec![(p?, 0.0)],
                default_threshold: None,
                converged: true,
                info: json!({"kind": kind}),
            })
        }
        "points" => {
            let path = r.opt_string("points");
            let Some(path) = path else {
                r.error("points", "path to a CSV with header x,y,z,q is required");
                return None;
            };
            let config = match ChargeConfiguration::read_csv_path(&path) {
                Ok(c) if !c.is_empty() => c,
                Ok(_) => {
                    r.error("points", "file holds no charges");
                    return None;
                }
                Err(e) => {
                    r.error("points", e.to_string());
                    return None;
                }
            };
            let centroid = config.positions().iter().sum::<Vec3>() / config.len() as f64;
            let extent = config.positions().iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
            Some(SourceSpec {
                source: PotentialSource::PointSet(config),
                bodies: vec![(centroid, extent)],
                default_threshold: None,
                converged: true,
                info: json!({"kind": kind, "points": path}),
            })
        }
        "uniform-sphere" => {
            let c = r.vec3_or("sphere_center", Vec3::zeros());
            let r0 = r.f64("r0");
            let r0 = r.positive("r0", r0);
            let q = r.f64_or("charge", 1.0);
            Some(SourceSpec {
                source: PotentialSource::uniform_sphere(c?, r0?, q?).ok()?,
                bodies: vec![(c?, r0?)],
                default_threshold: None,
                converged: true,
                info: json!({"kind": kind}),
            })
        }
        "two-balls" => {
            let spec = read_two_balls(r);
            let (eps, n_max) = read_series(r);
            let spec = spec?;
            let system = ImageChargeSystem::build(&spec, eps?, n_max?).ok()?;
            let converged = system.converged;
            Some(SourceSpec {
                info: json!({"kind": kind, "truncation_n": system.truncation_n, "converged": converged}),
                source: PotentialSource::two_ball(system),
                bodies: vec![(spec.center1, spec.radius1), (spec.center2, spec.radius2)],
                default_threshold: None,
                converged,
            })
        }
        _ => {
            let n = r.usize("n");
            let n = r.check("n", n, |v| (1..=512).contains(&v), "between 1 and 512");
            let radius = r.f64_or("lattice_radius", 1.0);
            let radius = r.positive("lattice_radius", radius);
            let d = r.f64("d");
            let q = if r.has("q") { r.opt_f64("q").map(Some) } else { Some(None) };
            let (n, radius, d, q) = (n?, radius?, d?, q?);
            if !(d > 2.0 * radius) {
                r.error("d", "lattices must be disjoint: d > 2 * lattice_radius");
                return None;
            }
            let count = spherical_lattice(n, radius).ok()?.len() as f64;
            let q = q.unwrap_or(radius / count.sqrt());
            let config = fekete_field::fieldscan::lattice_pair(n, radius, d, q).ok()?;
            Some(SourceSpec {
                source: PotentialSource::PointSet(config),
                bodies: vec![(Vec3::zeros(), radius), (Vec3::new(d, 0.0, 0.0), radius)],
                default_threshold: Some(count.sqrt()),
                converged: true,
                info: json!({"kind": kind, "lattice_points": count, "q": q}),
            })
        }
    }
}

/// Smallest admissible box: the bodies' hull padded by twice the largest
/// body radius (or 1 for point-like sources).
fn required_box(bodies: &[(Vec3, f64)]) -> (Vec3, Vec3) {
    let extent = bodies.iter().map(|b| b.1).fold(0.0, f64::max);
    let margin = if extent > 0.0 { 2.0 * extent } else { 1.0 };
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (c, rad) in bodies {
        lo = lo.inf(&(c - Vec3::repeat(*rad)));
        hi = hi.sup(&(c + Vec3::repeat(*rad)));
    }
    (lo - Vec3::repeat(margin), hi + Vec3::repeat(margin))
}

fn read_box(r: &mut Reader, source: Option<&SourceSpec>) -> Option<BoxSpec> {
    let res = r.opt_list("resolution");
    let resolution = match res {
        None => Some([64; 3]),
        Some(v) if v.len() == 1 || v.len() == 3 => {
            let v: Vec<f64> = if v.len() == 1 { vec![v[0]; 3] } else { v };
            if v.iter().all(|x| x.fract() == 0.0 && (8.0..=512.0).contains(x)) {
                Some([v[0] as usize, v[1] as usize, v[2] as usize])
            } else {
                r.error("resolution", "must be an integer in [8, 512] per axis");
                None
            }
        }
        Some(_) => {
            r.error("resolution", "give one value or three");
            None
        }
    };
    let has_min = r.has("bbox_min");
    let has_max = r.has("bbox_max");
    let user = match (has_min, has_max) {
        (true, true) => Some((r.vec3("bbox_min"), r.vec3("bbox_max"))),
        (false, false) => None,
        _ => {
            r.error(if has_min { "bbox_max" } else { "bbox_min" }, "bbox_min and bbox_max go together");
            return None;
        }
    };
    let source = source?;
    let (need_lo, need_hi) = required_box(&source.bodies);
    let (lo, hi) = match user {
        None => (need_lo, need_hi),
        Some((lo, hi)) => {
            let (lo, hi) = (lo?, hi?);
            if (0..3).any(|i| lo[i] > need_lo[i] + 1e-12 || hi[i] < need_hi[i] - 1e-12) {
                r.error(
                    "bbox_min",
                    format!(
                        "box must enclose the sources with a margin of twice their extent: need min <= {:?} and max >= {:?}",
                        need_lo.as_slice(),
                        need_hi.as_slice()
                    ),
                );
                return None;
            }
            (lo, hi)
        }
    };
    let bbox = BoundingBox::new(lo, hi).ok()?;
    Some(BoxSpec { bbox, resolution: resolution? })
}

fn parse_job(config: &ScenarioConfig) -> Result<Job, Vec<Diagnostic>> {
    let mut r = Reader::new(&config.parameters);
    let job = parse_with(config, &mut r);
    let diagnostics = r.finish();
    match job {
        Some(job) if diagnostics.is_empty() => Ok(job),
        _ if diagnostics.is_empty() => Err(vec![Diagnostic::new("parameters", "invalid scenario")]),
        _ => Err(diagnostics),
    }
}

fn parse_with(config: &ScenarioConfig, r: &mut Reader) -> Option<Job> {
    let seed = config.seed;
    match config.command {
        Command::Equilibrium => {
            let domain = r.choice("domain", &["sphere", "ball"]);
            let radius = r.f64("radius");
            let radius = r.positive("radius", radius);
            let center = r.vec3_or("center", Vec3::zeros());
            let n = r.usize("n");
            let n = r.check("n", n, |v| v >= 1, "at least 1");
            let q = r.f64_or("q", 1.0);
            let q = r.check("q", q, |v| v != 0.0, "nonzero");
            let options = read_options(r, seed);
            let domain = match domain?.as_str() {
                "sphere" => ConductorDomain::sphere(center?, radius?),
                _ => ConductorDomain::ball(center?, radius?),
            };
            let problem = EquilibriumProblem::single(domain, n?, q?).with_options(options?);
            Some(Job::Equilibrium { problem })
        }
        Command::TwoBalls => {
            let spec = read_two_balls(r);
            let (eps_tail, n_max) = read_series(r);
            let samples = r.usize_or("samples", 201);
            let samples = r.check("samples", samples, |v| v >= 2, "at least 2");
            Some(Job::TwoBalls { spec: spec?, eps_tail: eps_tail?, n_max: n_max?, samples: samples? })
        }
        Command::Oscillation => {
            let radius = r.f64_or("radius", 1.0);
            let radius = r.positive("radius", radius);
            let charge = r.f64_or("charge", 1.0);
            let gaps = if r.has("gaps") {
                let g = r.opt_list("gaps");
                r.check("gaps", g.as_ref().map(|g| g.iter().all(|d| *d > 0.0) && !g.is_empty()), |ok| ok, "a non-empty list of positive gaps")?;
                g
            } else {
                let rad = radius.unwrap_or(1.0);
                let d_min = r.f64_or("d_min", 0.1 * rad);
                let d_min = r.positive("d_min", d_min);
                let d_max = r.f64_or("d_max", 5.0 * rad);
                let count = r.usize_or("count", 20);
                let count = r.check("count", count, |v| v >= 2, "at least 2");
                let (d_min, d_max, count) = (d_min?, d_max?, count?);
                if !(d_max > d_min) {
                    r.error("d_max", "must exceed d_min");
                    return None;
                }
                Some(
                    (0..count)
                        .map(|i| d_min + (d_max - d_min) * i as f64 / (count - 1) as f64)
                        .collect(),
                )
            };
            let samples = r.usize_or("samples", 201);
            let samples = r.check("samples", samples, |v| v >= 2, "at least 2");
            let (eps_tail, n_max) = read_series(r);
            Some(Job::Oscillation {
                radius: radius?,
                charge: charge?,
                gaps: gaps?,
                samples: samples?,
                eps_tail: eps_tail?,
                n_max: n_max?,
            })
        }
        Command::Shells => {
            let radii = r.list("radii");
            let q1 = r.f64("q1");
            let outer = r.bool_or("outer", false);
            let (radii, q1, outer) = (radii?, q1?, outer?);
            if radii.is_empty() || radii.len() > MAX_SHELLS {
                r.error("radii", format!("between 1 and {MAX_SHELLS} radii required"));
                return None;
            }
            if radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[0] < w[1])) {
                r.error("radii", "must be positive and strictly increasing");
                return None;
            }
            if outer && *radii.last().expect("non-empty") >= 1.0 {
                r.error("radii", "must stay below the outer sphere radius 1");
                return None;
            }
            Some(Job::Shells { radii, q1, outer })
        }
        Command::Flux => {
            let source = read_source(r);
            let center = r.vec3_or("center", Vec3::zeros());
            let radius = r.f64("radius");
            let radius = r.positive("radius", radius);
            let n_quad = r.usize_or("n_quad", 2048);
            let n_quad = r.check("n_quad", n_quad, |v| v >= 2, "at least 2");
            let kernel = r.choice("kernel", &["coulomb", "yukawa"]);
            let n_vol = r.usize_or("n_vol", 100_000);
            let n_vol = r.check("n_vol", n_vol, |v| v >= 2, "at least 2");
            let yukawa = match kernel?.as_str() {
                "yukawa" => Some(n_vol?),
                _ => None,
            };
            Some(Job::Flux { source: source?, center: center?, radius: radius?, n_quad: n_quad?, yukawa })
        }
        Command::Levelset => {
            let source = read_source(r);
            let grid = read_box(r, source.as_ref());
            let threshold = if r.has("threshold") {
                r.opt_f64("threshold")
            } else {
                match source.as_ref().and_then(|s| s.default_threshold) {
                    Some(t) => Some(t),
                    None => {
                        r.error("threshold", "missing required parameter");
                        None
                    }
                }
            };
            let mode = r.choice("mode", &["above", "below"]);
            let mode = mode.map(|m| m.parse::<LevelMode>().expect("checked choice"));
            Some(Job::Levelset { source: source?, grid: grid?, threshold: threshold?, mode: mode? })
        }
        Command::Grid => {
            let source = read_source(r);
            let grid = read_box(r, source.as_ref());
            Some(Job::Grid { source: source?, grid: grid? })
        }
        Command::Trajectory => {
            let m = r.f64("m");
            let m = r.positive("m", m);
            let v = r.f64("v");
            let e = r.f64("e");
            let h = r.f64("H");
            let times = if r.has("t") {
                r.opt_list("t")
            } else if r.has("t_max") {
                let t_max = r.opt_f64("t_max");
                let steps = r.usize_or("steps", 100);
                let steps = r.check("steps", steps, |s| s >= 1, "at least 1");
                let (t_max, steps) = (t_max?, steps?);
                Some((0..=steps).map(|i| t_max * i as f64 / steps as f64).collect())
            } else {
                r.error("t", "give --t (list of times) or --t-max");
                None
            };
            if let (Some(e), Some(h)) = (e, h) {
                if e * h == 0.0 {
                    r.error("H", "e * H must be nonzero");
                    return None;
                }
            }
            Some(Job::Trajectory { m: m?, v: v?, e: e?, h: h?, times: times? })
        }
        Command::StaticCheck => {
            let input = r.choice("input", &["segment", "tetrahedron", "csv"])?;
            let tol = r.f64_or("tol", 1e-12);
            let tol = r.positive("tol", tol);
            let s2 = 2f64.sqrt();
            let (config, default_center, default_radius) = match input.as_str() {
                "segment" => (Some(segment_example()), Vec3::zeros(), Some(2.0)),
                "tetrahedron" => {
                    let q = r.f64_or("charge", 1.0);
                    (q.map(tetrahedron_example), Vec3::new(0.0, 0.0, 0.25 * s2), Some(0.75 * s2))
                }
                _ => {
                    let path = r.opt_string("points");
                    let config = match path.map(|p| ChargeConfiguration::read_csv_path(&p)) {
                        Some(Ok(c)) => Some(c),
                        Some(Err(e)) => {
                            r.error("points", e.to_string());
                            None
                        }
                        None => {
                            r.error("points", "path to a CSV with header x,y,z,q is required");
                            None
                        }
                    };
                    (config, Vec3::zeros(), None)
                }
            };
            let domain_kind = r.choice("domain", &["ball", "sphere"]);
            let center = r.vec3_or("center", default_center);
            let radius = match default_radius {
                Some(d) => r.f64_or("radius", d),
                None => r.f64("radius"),
            };
            let radius = r.positive("radius", radius);
            let domain = match domain_kind?.as_str() {
                "sphere" => ConductorDomain::sphere(center?, radius?),
                _ => ConductorDomain::ball(center?, radius?),
            };
            Some(Job::StaticCheck { config: config?, domain, tol: tol? })
        }
        Command::Cavendish => {
            let n = r.usize_or("n", 50);
            let n = r.check("n", n, |v| v >= 1, "at least 1");
            let total = r.f64_or("charge", 1.0);
            let total = r.check("charge", total, |v| v != 0.0, "nonzero");
            let radius = r.f64_or("radius", 1.0);
            let radius = r.positive("radius", radius);
            let external = r.f64_or("external_charge", 100.0);
            let distance = r.f64_or("distance", 2.0);
            let options = read_options(r, seed);
            let (n, total, radius, external, distance) = (n?, total?, radius?, external?, distance?);
            if !(distance > radius) {
                r.error("distance", "external charge must lie outside the ball (distance > radius)");
                return None;
            }
            let fixed = ChargeConfiguration::new(vec![Vec3::new(distance, 0.0, 0.0)], vec![external]).ok()?;
            let problem = EquilibriumProblem::single(ConductorDomain::ball(Vec3::zeros(), radius), n, total / n as f64)
                .with_options(options?)
                .with_fixed(fixed);
            Some(Job::Cavendish { problem, external, distance, total, radius })
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Output<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), RunError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| RunError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn with<F>(&mut self, name: &str, f: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut BufWriter<File>) -> fekete_field::Result<()>,
    {
        let mut w = self.create(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// `(result summary, failure reason if any)`
type Executed = (Value, Option<String>);

fn equilibrium_summary(result: &fekete_field::equilibrium::EquilibriumResult) -> Value {
    json!({
        "energy": result.energy,
        "converged": result.converged,
        "lambda_min": result.lambda_min(),
        "boundary_max_distance": result.boundary_max_distance,
        "projected_gradient_norm": result.projected_gradient_norm,
        "gradient_tol": result.gradient_tol,
        "iterations": result.iterations,
        "restart": result.restart,
        "seed": result.seed,
    })
}

fn grid_header(grid: &BoxSpec) -> Value {
    json!({
        "bbox": [grid.bbox.min.as_slice(), grid.bbox.max.as_slice()],
        "resolution": grid.resolution,
    })
}

fn execute(job: Job, out: &mut Output) -> Result<Executed, RunError> {
    match job {
        Job::Equilibrium { problem } => {
            let result = minimize_energy(&problem)?;
            out.with("points.csv", |w| result.config.write_csv(w))?;
            let summary = equilibrium_summary(&result);
            out.json("summary.json", &summary)?;
            let failure = (!result.converged).then(|| "minimizer did not reach the gradient tolerance".to_string());
            Ok((summary, failure))
        }
        Job::TwoBalls { spec, eps_tail, n_max, samples } => {
            let system = ImageChargeSystem::build(&spec, eps_tail, n_max)?;
            out.with("points.csv", |w| system.write_csv(w))?;
            let (a, b) = gap_segment(&spec);
            let profile = segment_profile(&PotentialSource::two_ball(system.clone()), &a, &b, samples)?;
            out.with("profile.csv", |w| profile.write_csv(w))?;
            let summary = json!({
                "C": system.c,
                "D": system.d,
                "A": system.a,
                "level1": system.level1(),
                "level2": system.level2(),
                "charge_in_ball1": system.charge_in_ball1(),
                "charge_in_ball2": system.charge_in_ball2(),
                "truncation_n": system.truncation_n,
                "tail_bound": system.tail_bound,
                "converged": system.converged,
                "oscillation": oscillation(&profile),
            });
            out.json("summary.json", &summary)?;
            let failure = (!system.converged).then(|| format!("image series not converged after {} terms", system.truncation_n));
            Ok((summary, failure))
        }
        Job::Oscillation { radius, charge, gaps, samples, eps_tail, n_max } => {
            let mut curve = Vec::with_capacity(gaps.len());
            let mut unconverged = Vec::new();
            for d in &gaps {
                let spec = TwoBallSpec::symmetric(radius, charge, *d);
                let system = ImageChargeSystem::build(&spec, eps_tail, n_max)?;
                if !system.converged {
                    unconverged.push(*d);
                }
                let (a, b) = gap_segment(&spec);
                let profile = segment_profile(&PotentialSource::two_ball(system), &a, &b, samples)?;
                curve.push(vec![*d, oscillation(&profile)]);
            }
            out.with("curve.csv", |w| write_csv(w, &["d", "E"], &curve))?;
            let summary = json!({
                "points": curve.len(),
                "unconverged_gaps": unconverged,
                "converged": unconverged.is_empty(),
            });
            let failure = (!unconverged.is_empty()).then(|| format!("image series not converged at {} gap(s)", unconverged.len()));
            Ok((summary, failure))
        }
        Job::Shells { radii, q1, outer } => {
            let sol = solve_nested_shells(&radii, q1, outer)?;
            let rows: Vec<Vec<f64>> = sol
                .radii
                .iter()
                .zip(&sol.charges)
                .zip(&sol.component_of)
                .map(|((r, q), c)| vec![*r, *q, *c as f64])
                .collect();
            out.with("charges.csv", |w| write_table(w, &["r", "q", "component"], &rows, &[2]))?;
            let summary = json!({
                "charges": sol.charges,
                "potential_levels": sol.potential_levels,
                "with_outer_sphere": outer,
            });
            out.json("summary.json", &summary)?;
            Ok((summary, None))
        }
        Job::Flux { source, center, radius, n_quad, yukawa } => {
            let result = match yukawa {
                None => gauss_flux(&source.source, &center, radius, n_quad)?,
                Some(n_vol) => yukawa_flux(&source.source, &center, radius, n_quad, n_vol)?,
            };
            let summary = json!({
                "source": source.info,
                "kernel": if yukawa.is_some() { "yukawa" } else { "coulomb" },
                "enclosed_charge": result.enclosed_charge,
                "quadrature_points": result.quadrature_points,
                "estimated_error": result.estimated_error,
                "converged": source.converged,
            });
            out.json("summary.json", &summary)?;
            let failure = (!source.converged).then(|| "image series not converged".to_string());
            Ok((summary, failure))
        }
        Job::Levelset { source, grid, threshold, mode } => {
            let g: ScalarFieldGrid = level_components(&source.source, &grid.bbox, grid.resolution, threshold, mode)?;
            out.with("grid.bin", |w| g.write_values(w))?;
            out.with("labels.bin", |w| g.write_labels(w))?;
            let header: Value = serde_json::from_str(&g.header_json()?).map_err(|e| RunError::Io(e.to_string()))?;
            out.json("grid.json", &header)?;
            out.json("summary.json", &serde_json::to_value(&g.components).map_err(|e| RunError::Io(e.to_string()))?)?;
            let summary = json!({
                "source": source.info,
                "threshold": threshold,
                "components": g.component_count(),
                "bounded": g.bounded_count(),
                "unbounded": g.unbounded_count(),
                "converged": source.converged,
            });
            let failure = (!source.converged).then(|| "image series not converged".to_string());
            Ok((summary, failure))
        }
        Job::Grid { source, grid } => {
            let values = sample_grid(&source.source, &grid.bbox, grid.resolution)?;
            out.with("grid.bin", |w| write_f64_le(w, &values))?;
            let header = grid_header(&grid);
            out.json("grid.json", &header)?;
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let summary = json!({
                "source": source.info,
                "nodes": values.len(),
                "min": finite.iter().copied().fold(f64::INFINITY, f64::min),
                "max": finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "converged": source.converged,
            });
            let failure = (!source.converged).then(|| "image series not converged".to_string());
            Ok((summary, failure))
        }
        Job::Trajectory { m, v, e, h, times } => {
            let rows = times
                .iter()
                .map(|t| magnetic_trajectory(m, v, e, h, *t).map(|p| vec![*t, p.x, p.y, p.z]))
                .collect::<fekete_field::Result<Vec<_>>>()?;
            out.with("trajectory.csv", |w| write_csv(w, &["t", "x", "y", "z"], &rows))?;
            let last = rows.last().cloned().unwrap_or_default();
            let summary = json!({
                "samples": rows.len(),
                "gyration_radius": (m * v / (e * h)).abs(),
                "period": 2.0 * std::f64::consts::PI * m / (e * h).abs(),
                "final_position": last.get(1..).unwrap_or(&[]),
            });
            Ok((summary, None))
        }
        Job::StaticCheck { config, domain, tol } => {
            let report = static_state_check(&config, &domain, tol)?;
            out.with("points.csv", |w| config.write_csv(w))?;
            let report_json = serde_json::to_value(&report).map_err(|e| RunError::Io(e.to_string()))?;
            out.json("report.json", &report_json)?;
            let summary = json!({
                "is_static": report.is_static,
                "max_interior_force": report.max_interior_force(),
                "boundary_charges": report.boundary_reports.len(),
            });
            Ok((summary, None))
        }
        Job::Cavendish { problem, external, distance, total, radius } => {
            let result = minimize_energy(&problem)?;
            out.with("points.csv", |w| result.config.write_csv(w))?;
            let fixed = problem.fixed.clone().expect("cavendish has a fixed charge");
            let all = PotentialSource::PointSet(result.config.concat(&fixed));
            let field = coulomb_gradient(&all, &Vec3::zeros())?.norm();
            let bound = cavendish_bound(external, distance, total, radius);
            let summary = json!({
                "field_at_center": field,
                "cavendish_bound": bound,
                "bound_holds": field >= bound,
                "equilibrium": equilibrium_summary(&result),
            });
            out.json("summary.json", &summary)?;
            let failure = (!result.converged).then(|| "minimizer did not reach the gradient tolerance".to_string());
            Ok((summary, failure))
        }
    }
}

/// Runs the scenario and writes its artifacts plus `run.json`.
pub fn run(config: &ScenarioConfig) -> Result<RunReport, RunError> {
    let job = parse_job(config).map_err(RunError::Invalid)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let started = Instant::now();
    let mut out = Output { dir: &config.output_dir, artifacts: Vec::new() };
    let (result, status) = match execute(job, &mut out) {
        Ok((result, None)) => (result, Status::Success),
        Ok((result, Some(reason))) => (result, Status::NumericalFailure(reason)),
        Err(RunError::Numerical(reason)) => (Value::Null, Status::NumericalFailure(reason)),
        Err(e) => return Err(e),
    };
    let mut artifacts = out.artifacts;
    artifacts.push("run.json".to_string());
    let manifest = json!({
        "command": config.command.name(),
        "parameters": config.parameters.as_map(),
        "seed": config.seed,
        "library_version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "status": match &status { Status::Success => "ok", Status::NumericalFailure(_) => "numerical_failure" },
        "failure": match &status { Status::Success => Value::Null, Status::NumericalFailure(r) => Value::String(r.clone()) },
        "converged": status == Status::Success,
        "artifacts": artifacts,
        "result": result,
    });
    let mut w = BufWriter::new(File::create(config.output_dir.join("run.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| RunError::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(RunReport { status, result, artifacts })
}
