//! Minimum-energy placement of point charges on conductor components.
//!
//! The minimizer is projected gradient descent: a Barzilai-Borwein trial
//! step, Armijo backtracking, and projection of every charge back onto its
//! component after each step. Energy differences in the line search are
//! evaluated pair by pair as `(r - r') / (r r')`, which keeps the sufficient
//! decrease test meaningful once the decrease drops below the rounding error
//! of the total energy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::geometry::ConductorDomain;
use crate::parallel::{map_indices, pairwise_sum};
use crate::pointcharge::{forces, total_energy, ChargeConfiguration, COINCIDENCE_TOL};
use crate::Vec3;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const NOISE_FACTOR: f64 = 1e3;

/// One conductor component carrying `count` charges of value `charge`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub domain: ConductorDomain,
    pub count: usize,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// `None` selects `1e-9 * n * q_max * max(q_max, fixed q_max)`.
    pub gradient_tol: Option<f64>,
    pub restarts: usize,
    pub rng_seed: u64,
    pub step_shrink: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iterations: 20_000,
            gradient_tol: None,
            restarts: 8,
            rng_seed: 0,
            step_shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProblem {
    pub components: Vec<ComponentSpec>,
    /// Charges held in place outside the conductor; they act on the mobile
    /// charges but do not move.
    pub fixed: Option<ChargeConfiguration>,
    pub options: MinimizeOptions,
}

impl EquilibriumProblem {
    pub fn new(components: Vec<ComponentSpec>) -> Self {
        EquilibriumProblem {
            components,
            fixed: None,
            options: MinimizeOptions::default(),
        }
    }

    /// `count` equal charges on a single domain.
    pub fn single(domain: ConductorDomain, count: usize, charge: f64) -> Self {
        Self::new(vec![ComponentSpec {
            domain,
            count,
            charge,
        }])
    }

    pub fn with_options(mut self, options: MinimizeOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_fixed(mut self, fixed: ChargeConfiguration) -> Self {
        self.fixed = Some(fixed);
        self
    }

    pub fn charge_count(&self) -> usize {
        self.components.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(FieldError::InfeasibleProblem("no components".into()));
        }
        for (j, c) in self.components.iter().enumerate() {
            c.domain.validate()?;
            if c.count == 0 && c.charge != 0.0 {
                return Err(FieldError::InfeasibleProblem(format!(
                    "component {j} carries charge {} but no charge carriers",
                    c.charge
                )));
            }
            if !c.charge.is_finite() {
                return Err(FieldError::InfeasibleProblem(format!(
                    "component {j} has a non-finite charge"
                )));
            }
        }
        if self.charge_count() == 0 {
            return Err(FieldError::InfeasibleProblem("no mobile charges".into()));
        }
        let o = &self.options;
        if o.restarts == 0 {
            return Err(FieldError::InvalidParameter {
                name: "restarts",
                reason: "must be at least 1".into(),
            });
        }
        if !(o.step_shrink > 0.0 && o.step_shrink < 1.0) {
            return Err(FieldError::InvalidParameter {
                name: "step_shrink",
                reason: "must lie in (0, 1)".into(),
            });
        }
        if let Some(t) = o.gradient_tol {
            if !(t > 0.0) {
                return Err(FieldError::InvalidParameter {
                    name: "gradient_tol",
                    reason: "must be positive".into(),
                });
            }
        }
        Ok(())
    }

    /// Convergence threshold on the projected gradient norm.
    pub fn gradient_tol(&self) -> f64 {
        self.options.gradient_tol.unwrap_or_else(|| {
            let qmax = self
                .components
                .iter()
                .map(|c| c.charge.abs())
                .fold(0.0, f64::max);
            // fixed charges set the force scale felt by the mobile ones
            let qfixed = self
                .fixed
                .as_ref()
                .map_or(0.0, |f| f.charges().iter().map(|q| q.abs()).fold(0.0, f64::max));
            1e-9 * self.charge_count() as f64 * (qmax * qmax.max(qfixed)).max(f64::MIN_POSITIVE)
        })
    }

    fn layout(&self) -> (Vec<usize>, Vec<f64>) {
        let mut comp = Vec::new();
        let mut q = Vec::new();
        for (j, c) in self.components.iter().enumerate() {
            comp.extend(std::iter::repeat_n(j, c.count));
            q.extend(std::iter::repeat_n(c.charge, c.count));
        }
        (comp, q)
    }

    fn domain_of(&self, index: usize, comp: &[usize]) -> &ConductorDomain {
        &self.components[comp[index]].domain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub config: ChargeConfiguration,
    /// Mobile-mobile plus mobile-fixed interaction energy.
    pub energy: f64,
    pub projected_gradient_norm: f64,
    /// `F_k . n(x_k)` for charges on a boundary with a normal, else 0.
    pub lagrange_multipliers: Vec<f64>,
    pub boundary_max_distance: f64,
    pub converged: bool,
    pub gradient_tol: f64,
    pub iterations: usize,
    pub restart: usize,
    pub seed: u64,
    /// Energy after each accepted step of the selected restart, starting
    /// with the initial configuration.
    #[serde(skip)]
    pub accepted_energies: Vec<f64>,
}

impl EquilibriumResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(FieldError::NotConverged {
                gradient_norm: self.projected_gradient_norm,
                tolerance: self.gradient_tol,
            })
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lagrange_multipliers
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

struct Evaluator<'a> {
    q: &'a [f64],
    fixed_pos: Vec<Vec3>,
    fixed_q: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(q: &'a [f64], fixed: Option<&ChargeConfiguration>) -> Self {
        let (fixed_pos, fixed_q) = match fixed {
            Some(f) => (f.positions().to_vec(), f.charges().to_vec()),
            None => (Vec::new(), Vec::new()),
        };
        Evaluator {
            q,
            fixed_pos,
            fixed_q,
        }
    }

    fn energy(&self, x: &[Vec3]) -> Result<f64> {
        let mut rows = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut acc = 0.0;
            for j in i + 1..x.len() {
                let d = (x[i] - x[j]).norm();
                if d < COINCIDENCE_TOL {
                    return Err(FieldError::CoincidentCharges {
                        first: i,
                        second: j,
                        distance: d,
                    });
                }
                acc += self.q[i] * self.q[j] / d;
            }
            for (p, qf) in self.fixed_pos.iter().zip(&self.fixed_q) {
                acc += self.q[i] * qf / (x[i] - p).norm();
            }
            rows.push(acc);
        }
        Ok(pairwise_sum(&rows))
    }

    /// Gradient of the energy, `-F_k` per charge.
    fn gradient(&self, x: &[Vec3]) -> Vec<Vec3> {
        let mut g = vec![Vec3::zeros(); x.len()];
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let diff = x[i] - x[j];
                let d2 = diff.norm_squared();
                let f = diff * (self.q[i] * self.q[j] / (d2 * d2.sqrt()));
                g[i] -= f;
                g[j] += f;
            }
            for (p, qf) in self.fixed_pos.iter().zip(&self.fixed_q) {
                let diff = x[i] - p;
                let d2 = diff.norm_squared();
                g[i] -= diff * (self.q[i] * qf / (d2 * d2.sqrt()));
            }
        }
        g
    }

    /// `W(y) - W(x)` without cancellation.
    fn delta(&self, x: &[Vec3], y: &[Vec3]) -> f64 {
        let step: Vec<Vec3> = x.iter().zip(y).map(|(a, b)| b - a).collect();
        let inv_change = |d_old: Vec3, d_new: Vec3, moved: Vec3| {
            let r_old = d_old.norm();
            let r_new = d_new.norm();
            // r_new^2 - r_old^2 = moved . (d_new + d_old)
            let diff_sq = moved.dot(&(d_new + d_old));
            -diff_sq / (r_old * r_new * (r_old + r_new))
        };
        let mut rows = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut acc = 0.0;
            for j in i + 1..x.len() {
                let moved = step[i] - step[j];
                if moved == Vec3::zeros() {
                    continue;
                }
                acc += self.q[i] * self.q[j] * inv_change(x[i] - x[j], y[i] - y[j], moved);
            }
            if step[i] != Vec3::zeros() {
                for (p, qf) in self.fixed_pos.iter().zip(&self.fixed_q) {
                    acc += self.q[i] * qf * inv_change(x[i] - p, y[i] - p, step[i]);
                }
            }
            rows.push(acc);
        }
        pairwise_sum(&rows)
    }
}

struct RunOutcome {
    positions: Vec<Vec3>,
    energy: f64,
    pg_norm: f64,
    converged: bool,
    iterations: usize,
    accepted: Vec<f64>,
}

fn projected_gradient_norm(
    problem: &EquilibriumProblem,
    comp: &[usize],
    x: &[Vec3],
    g: &[Vec3],
) -> f64 {
    let sq: Vec<f64> = x
        .iter()
        .zip(g)
        .enumerate()
        .map(|(i, (xi, gi))| {
            problem
                .domain_of(i, comp)
                .feasible_gradient(xi, gi)
                .norm_squared()
        })
        .collect();
    pairwise_sum(&sq).sqrt()
}

fn descend(
    problem: &EquilibriumProblem,
    comp: &[usize],
    eval: &Evaluator,
    start: Vec<Vec3>,
    tol: f64,
) -> Result<RunOutcome> {
    let project = |y: &mut [Vec3]| {
        for (i, p) in y.iter_mut().enumerate() {
            *p = problem.domain_of(i, comp).project(p);
        }
    };
    let mut x = start;
    project(&mut x);
    let mut energy = eval.energy(&x)?;
    let mut g = eval.gradient(&x);
    let mut accepted = vec![energy];

    let scale = problem
        .components
        .iter()
        .map(|c| c.domain.diameter())
        .fold(f64::INFINITY, f64::min);
    let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut alpha = if gmax > 0.0 { 0.05 * scale / gmax } else { 1.0 };

    let mut pg = projected_gradient_norm(problem, comp, &x, &g);
    let mut iterations = 0;
    while pg > tol && iterations < problem.options.max_iterations {
        iterations += 1;
        let mut trial_alpha = alpha;
        let mut step_taken = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut y: Vec<Vec3> = x.iter().zip(&g).map(|(xi, gi)| xi - gi * trial_alpha).collect();
            project(&mut y);
            let predicted: f64 = pairwise_sum(
                &x.iter()
                    .zip(&y)
                    .zip(&g)
                    .map(|((xi, yi), gi)| gi.dot(&(yi - xi)))
                    .collect::<Vec<_>>(),
            );
            if y.iter().zip(&x).all(|(a, b)| a == b) {
                break;
            }
            if y.iter()
                .enumerate()
                .any(|(i, a)| y[i + 1..].iter().any(|b| (a - b).norm() < COINCIDENCE_TOL))
            {
                trial_alpha *= problem.options.step_shrink;
                continue;
            }
            let dw = eval.delta(&x, &y);
            if dw <= ARMIJO * predicted.min(0.0) && dw <= 0.0 {
                step_taken = Some((y, dw, None));
                break;
            }
            // Below the rounding floor the radial jitter of the projection
            // swamps the energy change; measure progress along the boundary
            // with the feasible gradient instead.
            if predicted.abs() <= NOISE_FACTOR * f64::EPSILON * energy.abs().max(1.0) {
                let gy = eval.gradient(&y);
                let pg_y = projected_gradient_norm(problem, comp, &y, &gy);
                let terms: Vec<f64> = (0..x.len())
                    .map(|i| {
                        let d = problem.domain_of(i, comp);
                        let ga = d.feasible_gradient(&x[i], &g[i]);
                        let gb = d.feasible_gradient(&y[i], &gy[i]);
                        0.5 * (ga + gb).dot(&(y[i] - x[i]))
                    })
                    .collect();
                let dw_t = pairwise_sum(&terms);
                if dw_t < 0.0 && pg_y < pg {
                    step_taken = Some((y, dw_t, Some(gy)));
                    break;
                }
            }
            trial_alpha *= problem.options.step_shrink;
        }
        let Some((y, dw, g_y)) = step_taken else {
            break;
        };
        let g_new = g_y.unwrap_or_else(|| eval.gradient(&y));
        // Barzilai-Borwein step for the next trial
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..x.len() {
            let s = y[i] - x[i];
            ss += s.norm_squared();
            sy += s.dot(&(g_new[i] - g[i]));
        }
        alpha = if sy > 0.0 {
            (ss / sy).clamp(1e-14 * scale, 1e6 * scale)
        } else {
            trial_alpha * 2.0
        };
        energy += dw;
        accepted.push(energy);
        x = y;
        g = g_new;
        pg = projected_gradient_norm(problem, comp, &x, &g);
    }
    Ok(RunOutcome {
        energy: eval.energy(&x)?,
        positions: x,
        pg_norm: pg,
        converged: pg <= tol,
        iterations,
        accepted,
    })
}

fn initial_positions(problem: &EquilibriumProblem, restart: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(problem.options.rng_seed);
    rng.set_stream(restart as u64);
    let mut out = Vec::with_capacity(problem.charge_count());
    for c in &problem.components {
        for _ in 0..c.count {
            out.push(c.domain.sample_boundary(&mut rng));
        }
    }
    out
}

fn finish(
    problem: &EquilibriumProblem,
    comp: Vec<usize>,
    q: Vec<f64>,
    run: RunOutcome,
    restart: usize,
    tol: f64,
) -> Result<EquilibriumResult> {
    let config = ChargeConfiguration::new(run.positions, q)?.with_components(comp.clone())?;
    let total_forces = total_forces(&config, problem.fixed.as_ref())?;
    let lagrange_multipliers = config
        .positions()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d = problem.domain_of(i, &comp);
            match d.is_on_boundary(x).then(|| d.outward_normal(x)) {
                Some(Ok(n)) => total_forces[i].dot(&n),
                _ => 0.0,
            }
        })
        .collect();
    let mut result = EquilibriumResult {
        config,
        energy: run.energy,
        projected_gradient_norm: run.pg_norm,
        lagrange_multipliers,
        boundary_max_distance: 0.0,
        converged: run.converged,
        gradient_tol: tol,
        iterations: run.iterations,
        restart,
        seed: problem.options.rng_seed,
        accepted_energies: run.accepted,
    };
    result.boundary_max_distance = verify_boundary(&result, problem);
    Ok(result)
}

fn total_forces(config: &ChargeConfiguration, fixed: Option<&ChargeConfiguration>) -> Result<Vec<Vec3>> {
    let mut f = forces(config)?;
    if let Some(fixed) = fixed {
        for (k, x) in config.positions().iter().enumerate() {
            for (p, qf) in fixed.positions().iter().zip(fixed.charges()) {
                let diff = x - p;
                let d = diff.norm();
                f[k] += diff * (config.charges()[k] * qf / (d * d * d));
            }
        }
    }
    Ok(f)
}

/// Multi-start minimization. Restarts run concurrently; the lowest-energy
/// run wins, ties going to the lower restart index.
pub fn minimize_energy(problem: &EquilibriumProblem) -> Result<EquilibriumResult> {
    problem.validate()?;
    let (comp, q) = problem.layout();
    let tol = problem.gradient_tol();
    let eval = Evaluator::new(&q, problem.fixed.as_ref());
    let runs = map_indices(problem.options.restarts, |r| {
        descend(problem, &comp, &eval, initial_positions(problem, r), tol)
    });
    let mut best: Option<(usize, RunOutcome)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        let better = match &best {
            None => true,
            Some((_, b)) => run.energy < b.energy,
        };
        if better {
            best = Some((r, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");
    finish(problem, comp, q, run, restart, tol)
}

/// Single descent from a given starting configuration (restarts ignored).
pub fn minimize_from(
    problem: &EquilibriumProblem,
    start: &[Vec3],
) -> Result<EquilibriumResult> {
    problem.validate()?;
    if start.len() != problem.charge_count() {
        return Err(FieldError::InvalidConfiguration(format!(
            "start has {} positions, problem has {} charges",
            start.len(),
            problem.charge_count()
        )));
    }
    let (comp, q) = problem.layout();
    let tol = problem.gradient_tol();
    let eval = Evaluator::new(&q, problem.fixed.as_ref());
    let run = descend(problem, &comp, &eval, start.to_vec(), tol)?;
    finish(problem, comp, q, run, 0, tol)
}

/// Largest distance from a charge to the boundary of its component.
pub fn verify_boundary(result: &EquilibriumResult, problem: &EquilibriumProblem) -> f64 {
    let (comp, _) = problem.layout();
    result
        .config
        .positions()
        .iter()
        .enumerate()
        .map(|(i, x)| problem.domain_of(i, &comp).signed_distance(x).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangeEntry {
    pub index: usize,
    /// `F_k . n(x_k)`; zero for charges off the boundary.
    pub lambda: f64,
    /// `|F_k - lambda_k n(x_k)|`, or `|F_k|` off the boundary.
    pub residual: f64,
    pub force_norm: f64,
    pub on_boundary: bool,
}

impl LagrangeEntry {
    pub fn passes(&self, tol: f64) -> bool {
        self.on_boundary && self.lambda >= -tol && self.residual <= tol * self.force_norm.max(1.0)
    }
}

/// Checks that every force is an outward multiple of the boundary normal.
/// Requires a single convex component with a smooth boundary.
pub fn lagrange_check(
    result: &EquilibriumResult,
    problem: &EquilibriumProblem,
    _tol: f64,
) -> Result<Vec<LagrangeEntry>> {
    if problem.components.len() != 1 || !problem.components[0].domain.is_convex_smooth() {
        return Err(FieldError::NonConvexDomain);
    }
    let domain = &problem.components[0].domain;
    let f = total_forces(&result.config, problem.fixed.as_ref())?;
    Ok(result
        .config
        .positions()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let normal = if domain.is_on_boundary(x) {
                domain.outward_normal(x).ok()
            } else {
                None
            };
            match normal {
                Some(n) => {
                    let lambda = f[i].dot(&n);
                    LagrangeEntry {
                        index: i,
                        lambda,
                        residual: (f[i] - n * lambda).norm(),
                        force_norm: f[i].norm(),
                        on_boundary: true,
                    }
                }
                None => LagrangeEntry {
                    index: i,
                    lambda: 0.0,
                    residual: f[i].norm(),
                    force_norm: f[i].norm(),
                    on_boundary: false,
                },
            }
        })
        .collect())
}

/// Energy of an arbitrary configuration plus the fixed charges of `problem`.
pub fn problem_energy(problem: &EquilibriumProblem, config: &ChargeConfiguration) -> Result<f64> {
    let mut w = total_energy(config)?;
    if let Some(fixed) = &problem.fixed {
        for (x, q) in config.positions().iter().zip(config.charges()) {
            for (p, qf) in fixed.positions().iter().zip(fixed.charges()) {
                w += q * qf / (x - p).norm();
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere() -> ConductorDomain {
        ConductorDomain::sphere(Vec3::zeros(), 1.0)
    }

    fn ball() -> ConductorDomain {
        ConductorDomain::ball(Vec3::zeros(), 1.0)
    }

    #[test]
    fn two_charges_antipodal() {
        let p = EquilibriumProblem::single(sphere(), 2, 1.0);
        let r = minimize_energy(&p).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.energy, 0.5, max_relative = 1e-12);
        let entries = lagrange_check(&r, &p, 1e-8).unwrap();
        for e in &entries {
            assert_relative_eq!(e.lambda, 0.25, max_relative = 1e-9);
            assert!(e.passes(1e-8));
        }
    }

    #[test]
    fn three_charges_triangle() {
        let r = minimize_energy(&EquilibriumProblem::single(sphere(), 3, 1.0)).unwrap();
        assert!(r.converged);
        assert!((r.energy - 3f64.sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn four_charges_in_ball_form_tetrahedron() {
        let p = EquilibriumProblem::single(ball(), 4, 1.0);
        let r = minimize_energy(&p).unwrap();
        assert!(r.converged);
        let expected = 6.0 / (8.0f64 / 3.0).sqrt();
        assert!((r.energy - expected).abs() <= 1e-8, "{}", r.energy);
        assert!(verify_boundary(&r, &p) <= 1e-6);
        let lambdas: Vec<f64> = lagrange_check(&r, &p, 1e-8)
            .unwrap()
            .iter()
            .map(|e| e.lambda)
            .collect();
        for l in &lambdas {
            assert!(*l > 0.0);
            assert_relative_eq!(*l, lambdas[0], max_relative = 1e-6);
        }
    }

    #[test]
    fn single_charge_sits_on_boundary() {
        let p = EquilibriumProblem::single(ball(), 1, 1.0);
        let r = minimize_energy(&p).unwrap();
        assert!(r.converged);
        assert_eq!(r.energy, 0.0);
        assert!(verify_boundary(&r, &p) <= 1e-15);
    }

    #[test]
    fn accepted_energies_never_increase() {
        let p = EquilibriumProblem::single(ball(), 9, 1.0);
        let r = minimize_energy(&p).unwrap();
        assert!(r.accepted_energies.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.accepted_energies.len() > 2);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = EquilibriumProblem::single(ball(), 7, 1.0).with_options(MinimizeOptions {
            rng_seed: 42,
            ..Default::default()
        });
        let a = minimize_energy(&p).unwrap();
        let b = minimize_energy(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_and_invalid_problems() {
        let p = EquilibriumProblem::single(ball(), 0, 1.0);
        assert!(matches!(minimize_energy(&p), Err(FieldError::InfeasibleProblem(_))));
        let p = EquilibriumProblem::single(ball(), 3, 1.0).with_options(MinimizeOptions {
            restarts: 0,
            ..Default::default()
        });
        assert!(minimize_energy(&p).is_err());
    }

    #[test]
    fn not_converged_reports_best_iterate() {
        let p = EquilibriumProblem::single(ball(), 8, 1.0).with_options(MinimizeOptions {
            max_iterations: 2,
            restarts: 1,
            ..Default::default()
        });
        let r = minimize_energy(&p).unwrap();
        assert!(!r.converged);
        assert!(matches!(r.require_converged(), Err(FieldError::NotConverged { .. })));
    }

    #[test]
    fn interior_configuration_fails_lagrange() {
        let p = EquilibriumProblem::single(ball(), 2, 1.0);
        let mut r = minimize_energy(&p).unwrap();
        r.config = ChargeConfiguration::uniform(
            vec![Vec3::new(-0.3, 0.0, 0.0), Vec3::new(0.3, 0.0, 0.0)],
            1.0,
        )
        .unwrap()
        .with_components(vec![0, 0])
        .unwrap();
        let entries = lagrange_check(&r, &p, 1e-8).unwrap();
        assert!(entries.iter().all(|e| !e.passes(1e-8)));
    }

    #[test]
    fn union_is_not_convex() {
        let union = ConductorDomain::BallUnion(vec![
            crate::geometry::Ball::new(Vec3::zeros(), 1.0),
            crate::geometry::Ball::new(Vec3::new(4.0, 0.0, 0.0), 1.0),
        ]);
        let p = EquilibriumProblem::single(union, 4, 1.0).with_options(MinimizeOptions {
            restarts: 1,
            ..Default::default()
        });
        let r = minimize_energy(&p).unwrap();
        assert_eq!(lagrange_check(&r, &p, 1e-8), Err(FieldError::NonConvexDomain));
    }

    #[test]
    fn delta_matches_direct_difference() {
        let q = [1.0, 2.0, -0.5];
        let eval = Evaluator::new(&q, None);
        let x = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.2),
        ];
        let y = [
            Vec3::new(0.1, 0.0, 1.0),
            Vec3::new(1.0, 0.3, 0.0),
            Vec3::new(0.0, -1.0, 0.2),
        ];
        let direct = eval.energy(&y).unwrap() - eval.energy(&x).unwrap();
        assert_relative_eq!(eval.delta(&x, &y), direct, max_relative = 1e-12);
    }
}
