//! Bound states of prescribed mass: normalized gradient flow from min-max
//! seeds, Newton refinement on the bordered system, multi-start search with
//! deduplication up to sign.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::fmt_sig;
use crate::error::{check_exponent, Error, Result};
use crate::functionals::{energy, j_dual_norm, lambda_of, random_function, EnergyBreakdown};
use crate::graph::MetricGraph;
use crate::linalg::{dot, ChainFactorization};
use crate::mesh::{dual_norm_of, kirchhoff_residual, GraphFunction, Mesh};
use crate::minmax::{level_bound_for, sphere_samples, LevelReport, Placement, SeedFamily, SlotLayout};
use crate::soliton::SolitonParams;

/// Halvings of the flow step before giving up.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mu: f64,
    pub p: f64,
    /// Initial (and largest) flow step.
    pub dt: f64,
    pub max_iterations: usize,
    /// Target for `‖J(u)‖_{H'}`.
    pub tolerance: f64,
    /// Energy gap below which two states may coincide; default `1e-6|ℰ(φ_μ)|`.
    pub delta_e: Option<f64>,
    /// Sign-quotient `L²` distance below which two states may coincide;
    /// default `1e-3√μ`.
    pub delta_2: Option<f64>,
    pub refine: bool,
    pub newton_iterations: usize,
    /// Flow residual at which Newton takes over.
    pub newton_switch: f64,
    pub theta_samples: usize,
    /// Random perturbations launched per θ seed.
    pub perturbations: usize,
    /// Perturbation size relative to the seed's sup norm.
    pub perturbation_scale: f64,
    pub placement: Placement,
    pub seed: u64,
    pub jobs: usize,
}

impl SolverConfig {
    pub fn new(mu: f64, p: f64) -> Self {
        Self {
            mu,
            p,
            dt: 1.0,
            max_iterations: 2000,
            tolerance: 1e-8,
            delta_e: None,
            delta_2: None,
            refine: true,
            newton_iterations: 200,
            newton_switch: 1e-2,
            theta_samples: 4,
            perturbations: 0,
            perturbation_scale: 0.05,
            placement: Placement::LongestEdge,
            seed: 0,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        positive("mu", self.mu)?;
        positive("dt", self.dt)?;
        positive("tolerance", self.tolerance)?;
        positive("newton switch", self.newton_switch)?;
        if let Some(d) = self.delta_e {
            positive("delta_E", d)?;
        }
        if let Some(d) = self.delta_2 {
            positive("delta_2", d)?;
        }
        Ok(())
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e.unwrap_or_else(|| {
            1e-6 * SolitonParams::new(self.p, self.mu).map(|s| s.energy().abs()).unwrap_or(1.0)
        })
    }

    pub fn delta_2(&self) -> f64 {
        self.delta_2.unwrap_or(1e-3 * self.mu.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Unconverged,
    Stalled,
    /// Ended at nonnegative energy: mass leaking to the half-lines.
    Vanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub index: usize,
    pub label: String,
    pub level: Option<usize>,
    pub theta: Option<Vec<f64>>,
    pub perturbation: Option<usize>,
}

impl SeedInfo {
    pub fn user(label: &str) -> Self {
        Self { index: 0, label: label.into(), level: None, theta: None, perturbation: None }
    }
}

#[derive(Debug, Clone)]
pub struct BoundState {
    pub u: GraphFunction,
    pub lambda: f64,
    pub energy: EnergyBreakdown,
    pub j_residual: f64,
    /// `(vertex id, defect)` per vertex.
    pub kirchhoff: Vec<(String, f64)>,
    pub mass_error: f64,
    pub seed: SeedInfo,
    pub flow_iterations: usize,
    pub newton_iterations: usize,
    pub status: SolveStatus,
}

/// Serializable view of a [`BoundState`] without the nodal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStateSummary {
    pub status: SolveStatus,
    pub energy: EnergyBreakdown,
    pub lambda: f64,
    pub j_residual: f64,
    pub max_kirchhoff: f64,
    pub kirchhoff: Vec<(String, f64)>,
    pub mass_error: f64,
    pub sup_norm: f64,
    pub seed: SeedInfo,
    pub flow_iterations: usize,
    pub newton_iterations: usize,
}

impl BoundState {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn max_kirchhoff(&self) -> f64 {
        self.kirchhoff.iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    /// `λμ > −2E(u) > 0`.
    pub fn multiplier_law_holds(&self) -> bool {
        let e = self.energy.total;
        e < 0.0 && self.lambda * self.energy.mass > -2.0 * e
    }

    pub fn summary(&self) -> BoundStateSummary {
        BoundStateSummary {
            status: self.status,
            energy: self.energy,
            lambda: self.lambda,
            j_residual: self.j_residual,
            max_kirchhoff: self.max_kirchhoff(),
            kirchhoff: self.kirchhoff.clone(),
            mass_error: self.mass_error,
            sup_norm: self.u.sup_norm(),
            seed: self.seed.clone(),
            flow_iterations: self.flow_iterations,
            newton_iterations: self.newton_iterations,
        }
    }
}

/// `min(‖u − v‖₂, ‖u + v‖₂)`.
pub fn sign_quotient_distance(u: &GraphFunction, v: &GraphFunction) -> Result<f64> {
    let d1 = u.plus_scaled(v, -1.0)?.mass();
    let d2 = u.plus_scaled(v, 1.0)?.mass();
    Ok(d1.min(d2).max(0.0).sqrt())
}

/// Two states coincide when both their energies and their sign-quotient
/// distance are within tolerance.
pub fn same_state(a: &BoundState, b: &BoundState, delta_e: f64, delta_2: f64) -> Result<bool> {
    Ok((a.energy.total - b.energy.total).abs() < delta_e && sign_quotient_distance(&a.u, &b.u)? < delta_2)
}

fn mass_of(mesh: &Mesh, u: &[f64]) -> f64 {
    mesh.operators().mass.quadratic_form(u)
}

fn energy_of(mesh: &Mesh, u: &[f64], p: f64) -> f64 {
    0.5 * mesh.gradient_sq(u) - mesh.lp_core(u, p) / p
}

fn multiplier_of(mesh: &Mesh, u: &[f64], mu: f64, p: f64) -> f64 {
    (mesh.lp_core(u, p) - mesh.gradient_sq(u)) / mu
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub u: GraphFunction,
    pub energy: f64,
    pub dt: f64,
    pub halvings: usize,
}

/// One step of the normalized semi-implicit flow with step `dt`, without
/// backtracking:
/// `(M(1 + dt λ⁺) + dt K) ũ = M u (1 + dt λ⁻) + dt N(u)`, then `ũ ← √μ ũ/‖ũ‖`,
/// where `λ = λ(u)` and `λ^± ` are its positive and negative parts. Discrete
/// stationary states are exactly its fixed points.
pub fn flow_step_with(u: &GraphFunction, mu: f64, p: f64, dt: f64) -> Result<GraphFunction> {
    let mesh = u.mesh();
    let ops = mesh.operators();
    let lambda = multiplier_of(mesh, u.values(), mu, p);
    let (implicit, explicit) = if lambda >= 0.0 { (lambda, 0.0) } else { (0.0, -lambda) };
    let a = ops.mass.plus_scaled(&ops.stiffness, dt / (1.0 + dt * implicit));
    let fac = ChainFactorization::new(&a)?;
    let mu_vec = ops.mass.matvec(u.values());
    let load = mesh.nonlinear_load(u.values(), p);
    let rhs: Vec<f64> = mu_vec
        .iter()
        .zip(&load)
        .map(|(m, f)| (m * (1.0 + dt * explicit) + dt * f) / (1.0 + dt * implicit))
        .collect();
    let next = fac.solve(&rhs);
    let m = mass_of(mesh, &next);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Degenerate("flow step produced the zero function".into()));
    }
    let s = (mu / m).sqrt();
    GraphFunction::new(mesh.clone(), next.into_iter().map(|v| v * s).collect())
}

/// A flow step with backtracking: `dt` is halved while the energy goes up.
pub fn flow_step(u: &GraphFunction, cfg: &SolverConfig) -> Result<FlowOutcome> {
    flow_step_from(u, cfg.mu, cfg.p, cfg.dt)
}

fn flow_step_from(u: &GraphFunction, mu: f64, p: f64, dt: f64) -> Result<FlowOutcome> {
    let e0 = energy_of(u.mesh(), u.values(), p);
    let slack = 1e-13 * e0.abs().max(1e-300);
    let mut dt = dt;
    for halvings in 0..=MAX_HALVINGS {
        let next = flow_step_with(u, mu, p, dt)?;
        let e = energy_of(u.mesh(), next.values(), p);
        if e <= e0 + slack {
            return Ok(FlowOutcome { u: next, energy: e, dt, halvings });
        }
        dt *= 0.5;
    }
    Err(Error::Stall(MAX_HALVINGS))
}

struct NewtonOutcome {
    u: Vec<f64>,
    iterations: usize,
}

/// Newton on `Ku − N(u) + λMu = 0`, `½(uᵀMu − μ) = 0` in `(u, λ)`.
///
/// The bordered Jacobian `[[K − N'(u) + λM, Mu], [(Mu)ᵀ, 0]]` is nearly
/// singular for states with an almost free translation mode, so the block
/// `K − N'(u) + λM` is shifted by `σM` with `σ` escalating from zero when a
/// step fails to reduce the merit function.
fn newton(mesh: &Arc<Mesh>, u0: &[f64], mu: f64, p: f64, tol: f64, max_iter: usize) -> NewtonOutcome {
    let ops = mesh.operators();
    let mut u = u0.to_vec();
    let mut lambda = multiplier_of(mesh, &u, mu, p);
    let residual = |u: &[f64], lambda: f64| -> (Vec<f64>, f64, f64) {
        let ku = ops.stiffness.matvec(u);
        let mu_vec = ops.mass.matvec(u);
        let f = mesh.nonlinear_load(u, p);
        let r: Vec<f64> = ku.iter().zip(&mu_vec).zip(&f).map(|((k, m), f)| k + lambda * m - f).collect();
        let c = 0.5 * (dot(u, &mu_vec) - mu);
        let merit = (dual_norm_of(mesh, &r).powi(2) + c * c).sqrt();
        (r, c, merit)
    };
    let mut iterations = 0;
    // shift relative to max(|λ|, 1), adapted Levenberg–Marquardt style
    let mut sigma: f64 = 0.0;
    while iterations < max_iter {
        if j_norm_of(mesh, &u, mu, p) <= tol {
            break;
        }
        let (r, c, merit) = residual(&u, lambda);
        let border = ops.mass.matvec(&u);
        let jac = mesh.nonlinear_jacobian(&u, p);
        let scale = lambda.abs().max(1.0);
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut accepted = false;
        while !accepted && sigma <= 0.1 {
            let mut a = ops.stiffness.plus_scaled(&jac, -1.0);
            a.add_scaled(&ops.mass, lambda + sigma * scale);
            let step = ChainFactorization::new(&a)
                .and_then(|fac| fac.solve_bordered(&border, &neg_r, -c))
                .ok()
                .filter(|(du, dl)| dl.is_finite() && du.iter().all(|v| v.is_finite()));
            if let Some((du, dl)) = step {
                for t in [1.0, 0.5, 0.25, 0.125, 0.0625] {
                    let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
                    let trial_lambda = lambda + t * dl;
                    if residual(&trial, trial_lambda).2 < (1.0 - 1e-4 * t) * merit {
                        u = trial;
                        lambda = trial_lambda;
                        accepted = true;
                        break;
                    }
                }
            }
            if accepted {
                sigma = if sigma < 1e-12 { 0.0 } else { sigma / 4.0 };
            } else {
                sigma = if sigma == 0.0 { 1e-10 } else { sigma * 8.0 };
            }
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    let m = mass_of(mesh, &u);
    let s = (mu / m).sqrt();
    u.iter_mut().for_each(|v| *v *= s);
    NewtonOutcome { u, iterations }
}

fn j_norm_of(mesh: &Arc<Mesh>, u: &[f64], mu: f64, p: f64) -> f64 {
    let m = mass_of(mesh, u);
    let s = (mu / m).sqrt();
    let scaled: Vec<f64> = u.iter().map(|v| v * s).collect();
    let lambda = multiplier_of(mesh, &scaled, mu, p);
    let ops = mesh.operators();
    let ku = ops.stiffness.matvec(&scaled);
    let mv = ops.mass.matvec(&scaled);
    let f = mesh.nonlinear_load(&scaled, p);
    let r: Vec<f64> = ku.iter().zip(&mv).zip(&f).map(|((k, m), f)| k + lambda * m - f).collect();
    dual_norm_of(mesh, &r)
}

/// Runs the flow from `seed` until the residual drops under the Newton
/// switch (or the tolerance), then refines with Newton.
pub fn solve(cfg: &SolverConfig, seed: &GraphFunction, info: SeedInfo) -> Result<BoundState> {
    cfg.validate()?;
    let (mu, p) = (cfg.mu, cfg.p);
    let mesh = seed.mesh().clone();
    let mut u = seed.normalized(mu)?;
    let switch = if cfg.refine { cfg.newton_switch.max(cfg.tolerance) } else { cfg.tolerance };
    let mut dt = cfg.dt;
    let mut flow_iterations = 0;
    let mut stalled = false;
    let mut quiet = 0;
    let mut e_prev = energy_of(&mesh, u.values(), p);
    while flow_iterations < cfg.max_iterations {
        if j_norm_of(&mesh, u.values(), mu, p) <= switch {
            break;
        }
        match flow_step_from(&u, mu, p, dt) {
            Ok(out) => {
                flow_iterations += 1;
                let change = (e_prev - out.energy).abs();
                quiet = if change <= 1e-14 * out.energy.abs() { quiet + 1 } else { 0 };
                e_prev = out.energy;
                u = out.u;
                dt = (out.dt * 2.0).min(cfg.dt);
                if quiet >= 5 {
                    break;
                }
            }
            Err(Error::Stall(_)) => {
                stalled = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut newton_iterations = 0;
    if cfg.refine {
        let out = newton(&mesh, u.values(), mu, p, cfg.tolerance, cfg.newton_iterations);
        newton_iterations = out.iterations;
        let refined = GraphFunction::new(mesh.clone(), out.u)?;
        // keep the better of the two iterates
        if j_norm_of(&mesh, refined.values(), mu, p) <= j_norm_of(&mesh, u.values(), mu, p) {
            u = refined;
        }
    }
    finish(u, cfg, info, flow_iterations, newton_iterations, stalled)
}

fn finish(u: GraphFunction, cfg: &SolverConfig, seed: SeedInfo, flow_iterations: usize, newton_iterations: usize, stalled: bool) -> Result<BoundState> {
    let (mu, p) = (cfg.mu, cfg.p);
    let lambda = lambda_of(&u, mu, p)?;
    let energy = energy(&u, p)?;
    let j_residual = j_dual_norm(&u, mu, p)?;
    let names = u.mesh().graph().vertices().to_vec();
    let kirchhoff = names.into_iter().zip(kirchhoff_residual(&u, lambda, p)).collect();
    let status = if energy.total >= 0.0 {
        SolveStatus::Vanishing
    } else if j_residual <= cfg.tolerance {
        SolveStatus::Converged
    } else if stalled {
        SolveStatus::Stalled
    } else {
        SolveStatus::Unconverged
    };
    Ok(BoundState {
        mass_error: (energy.mass - mu).abs() / mu,
        u,
        lambda,
        energy,
        j_residual,
        kirchhoff,
        seed,
        flow_iterations,
        newton_iterations,
        status,
    })
}

/// A soliton of mass `mu` centered at `center` on edge `edge`, continued
/// along the edges incident to its endpoints, normalized on the mesh.
pub fn soliton_seed(mesh: &Arc<Mesh>, edge: usize, center: f64, mu: f64, p: f64) -> Result<GraphFunction> {
    let g = mesh.graph();
    let e = g.edge(edge);
    let len = e.length().ok_or_else(|| Error::InvalidParameter("soliton seed needs a bounded edge".into()))?;
    let s = SolitonParams::new(p, mu)?;
    let mut dist = vec![f64::INFINITY; g.vertices().len()];
    dist[e.from] = center;
    if let Some(t) = e.to {
        dist[t] = dist[t].min(len - center);
    }
    let f = GraphFunction::from_edge_fn(mesh.clone(), |i, x| {
        if i == edge {
            return s.value(x - center);
        }
        let other = g.edge(i);
        let from = dist[other.from] + x;
        let to = match (other.to, other.length()) {
            (Some(t), Some(l)) => dist[t] + (l - x),
            _ => f64::INFINITY,
        };
        let d = from.min(to);
        if d.is_finite() {
            s.value(d)
        } else {
            0.0
        }
    });
    f.normalized(mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptSummary {
    pub seed: SeedInfo,
    pub status: SolveStatus,
    pub energy: f64,
    pub j_residual: f64,
    /// Index into the distinct states, when converged.
    pub state: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MultiSolveReport {
    /// Distinct converged states, by increasing energy.
    pub states: Vec<BoundState>,
    pub attempts: Vec<AttemptSummary>,
    pub levels: Vec<LevelReport>,
    /// For each level `j`, whether the `j`-th state meets its bound.
    pub level_satisfied: Vec<Option<bool>>,
    pub warnings: Vec<String>,
}

pub type SeedBatch = (Vec<(SeedInfo, GraphFunction)>, Vec<String>);

/// Seeds for levels `1..=k`: θ on `S^{j−1}` modulo sign, plus random
/// perturbations of each.
pub fn multi_seeds(g: &MetricGraph, mesh: &Arc<Mesh>, cfg: &SolverConfig, k: usize) -> Result<SeedBatch> {
    let mut seeds = Vec::new();
    let mut warnings = Vec::new();
    for j in 1..=k {
        let layout = SlotLayout::new(g, j, cfg.placement)?;
        let family = match SeedFamily::new(mesh, layout.clone(), cfg.mu, cfg.p) {
            Ok(f) => f,
            Err(Error::BelowThreshold { threshold, .. }) => {
                warnings.push(format!("level {j}: mass {} below mu_{j} = {}; seeds built anyway", fmt_sig(cfg.mu), fmt_sig(threshold)));
                SeedFamily::new_unchecked(mesh, layout, cfg.mu, cfg.p)?
            }
            Err(e) => return Err(e),
        };
        let thetas = if j == 1 { vec![vec![1.0]] } else { canonical_directions(j, cfg.theta_samples.max(1), cfg.seed) };
        for theta in thetas {
            let base = family.seed(&theta)?;
            let index = seeds.len();
            seeds.push((SeedInfo { index, label: format!("level {j}"), level: Some(j), theta: Some(theta.clone()), perturbation: None }, base.clone()));
            for q in 0..cfg.perturbations {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((j as u64) << 40) ^ ((seeds.len() as u64) << 8) ^ q as u64);
                let noise = random_function(&base, &mut rng);
                let amp = cfg.perturbation_scale * base.sup_norm() / noise.sup_norm().max(1e-300);
                let seed = base.plus_scaled(&noise, amp)?.normalized(cfg.mu)?;
                let index = seeds.len();
                seeds.push((SeedInfo { index, label: format!("level {j} perturbed"), level: Some(j), theta: Some(theta.clone()), perturbation: Some(q) }, seed));
            }
        }
    }
    Ok((seeds, warnings))
}

/// `n` directions on `S^{j−1}` with `θ` and `−θ` identified (first nonzero
/// coordinate positive), duplicates dropped.
pub fn canonical_directions(j: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let raw = if j == 2 {
        (0..n)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let mut v = vec![vec![1.0 / (j as f64).sqrt(); j]];
        v.extend(sphere_samples(j, n.saturating_sub(1).max(1), seed));
        v
    };
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut t in raw {
        for x in t.iter_mut() {
            if x.abs() < 1e-14 {
                *x = 0.0;
            }
        }
        if let Some(first) = t.iter().find(|x| **x != 0.0) {
            if *first < 0.0 {
                t.iter_mut().for_each(|x| *x = -*x);
            }
        }
        if !out.iter().any(|o| o.iter().zip(&t).all(|(a, b)| (a - b).abs() < 1e-12)) {
            out.push(t);
        }
        if out.len() == n {
            break;
        }
    }
    out
}

/// Launches solves from every min-max seed for levels `1..=k`, dedupes the
/// converged states and compares them with the level bounds.
pub fn multi_solve(g: &MetricGraph, mesh: &Arc<Mesh>, cfg: &SolverConfig, k: usize) -> Result<MultiSolveReport> {
    cfg.validate()?;
    let (seeds, mut warnings) = multi_seeds(g, mesh, cfg, k)?;
    let run = || -> Vec<Result<BoundState>> { seeds.par_iter().map(|(info, seed)| solve(cfg, seed, info.clone())).collect() };
    let results = if cfg.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)
    } else {
        seeds.iter().map(|(info, seed)| solve(cfg, seed, info.clone())).collect()
    };
    let (de, d2) = (cfg.delta_e(), cfg.delta_2());
    let mut distinct: Vec<BoundState> = Vec::new();
    let mut attempts = Vec::new();
    let mut owner: Vec<Option<usize>> = Vec::new();
    for r in results {
        let s = r?;
        let mut slot = None;
        if s.converged() {
            for (i, d) in distinct.iter().enumerate() {
                if same_state(d, &s, de, d2)? {
                    slot = Some(i);
                    break;
                }
            }
            if slot.is_none() {
                distinct.push(s.clone());
                slot = Some(distinct.len() - 1);
            }
        }
        owner.push(slot);
        attempts.push(AttemptSummary { seed: s.seed.clone(), status: s.status, energy: s.energy.total, j_residual: s.j_residual, state: None });
    }
    let mut order: Vec<usize> = (0..distinct.len()).collect();
    order.sort_by(|&a, &b| {
        distinct[a].energy.total.total_cmp(&distinct[b].energy.total).then(distinct[a].seed.index.cmp(&distinct[b].seed.index))
    });
    let mut rank = vec![0; distinct.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    for (a, o) in attempts.iter_mut().zip(&owner) {
        a.state = o.map(|i| rank[i]);
    }
    let states: Vec<BoundState> = order.into_iter().map(|i| distinct[i].clone()).collect();
    if states.len() < k {
        warnings.push(format!("found {} distinct converged states, fewer than k = {k}", states.len()));
    }

    let layout = SlotLayout::new(g, k, cfg.placement)?;
    let tol = cfg.delta_e();
    let mut levels = Vec::new();
    let mut level_satisfied = Vec::new();
    for j in 1..=k {
        match level_bound_for(&layout, j, cfg.mu, cfg.p) {
            Ok(mut rep) => {
                let ok = states.get(j - 1).map(|s| rep.attach(s.energy.total, tol));
                levels.push(rep);
                level_satisfied.push(ok);
            }
            Err(e) => warnings.push(format!("level {j}: {e}")),
        }
    }
    Ok(MultiSolveReport { states, attempts, levels, level_satisfied, warnings })
}
