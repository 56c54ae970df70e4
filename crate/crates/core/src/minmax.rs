//! Genus-`k` seed families of cut-off solitons, mass thresholds `μ_k` and
//! upper bounds for the min-max levels.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_exponent, Error, GraphError, Result};
use crate::functionals::energy;
use crate::graph::{natural_cmp, MetricGraph};
use crate::mesh::{GraphFunction, Mesh};
use crate::report::csv_table;
use crate::soliton::{certified_gap, mass_threshold, CutoffSoliton, LineProfile, SolitonParams};

/// `min_{θ ∈ S^{k−1}} Σ|θ_j|^p = k^{1−p/2}` for `p ≥ 2`.
pub fn sphere_min_pnorm(k: usize, p: f64) -> f64 {
    (k as f64).powf(1.0 - 0.5 * p)
}

pub fn pnorm_p(theta: &[f64], p: f64) -> f64 {
    theta.iter().map(|t| t.abs().powf(p)).sum()
}

/// `n` points on `S^{k−1}`: equispaced for `k = 2`, a Fibonacci lattice for
/// `k = 3`, an `R_3` low-discrepancy sequence in Hopf coordinates for
/// `k = 4` and Gaussian samples otherwise.
pub fn sphere_samples(k: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    use std::f64::consts::{PI, TAU};
    match k {
        0 => Vec::new(),
        1 => (0..n).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        4 => {
            // plastic-number generalization of the golden ratio
            let g = 1.220_744_084_605_759_5_f64;
            let a = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
            (0..n)
                .map(|i| {
                    let u: Vec<f64> = a.iter().map(|&s| (0.5 + s * (i + 1) as f64).fract()).collect();
                    let (r1, r2) = ((1.0 - u[0]).sqrt(), u[0].sqrt());
                    let (t1, t2) = (TAU * u[1], TAU * u[2]);
                    vec![r1 * t1.sin(), r1 * t1.cos(), r2 * t2.sin(), r2 * t2.cos()]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| gaussian_direction(k, &mut rng)).collect()
        }
    }
}

fn gaussian_direction<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k)
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Smallest sampled value of `Σ|θ_j|^p` and the point attaining it.
pub fn sampled_sphere_min(k: usize, p: f64, n: usize, seed: u64) -> (f64, Vec<f64>) {
    sphere_samples(k, n, seed)
        .into_iter()
        .map(|t| (pnorm_p(&t, p), t))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::NAN, Vec::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// `k` equal slices of the longest nonlinear edge.
    #[default]
    LongestEdge,
    /// Slots of a common length spread over several nonlinear edges.
    MultiEdge,
}

impl std::str::FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "longest-edge" => Ok(Self::LongestEdge),
            "multi-edge" => Ok(Self::MultiEdge),
            _ => Err(format!("unknown placement {s:?} (expected longest-edge or multi-edge)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub edge: usize,
    pub offset: f64,
    pub length: f64,
}

/// Disjoint slots of common length on the nonlinear part of the core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLayout {
    pub k: usize,
    pub placement: Placement,
    pub slot_length: f64,
    pub slots: Vec<Slot>,
}

impl SlotLayout {
    pub fn new(g: &MetricGraph, k: usize, placement: Placement) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let mut edges: Vec<(usize, f64)> = g
            .nonlinear_edges()
            .filter_map(|i| g.edge(i).length().map(|l| (i, l)))
            .collect();
        if edges.is_empty() {
            return Err(Error::Graph(GraphError::NoNonlinearEdge));
        }
        edges.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| natural_cmp(&g.edge(a.0).id, &g.edge(b.0).id)));
        let slots = match placement {
            Placement::LongestEdge => {
                let (edge, l) = edges[0];
                let len = l / k as f64;
                (0..k).map(|j| Slot { edge, offset: j as f64 * len, length: len }).collect()
            }
            Placement::MultiEdge => {
                let capacity = |len: f64| -> usize { edges.iter().map(|&(_, l)| ((l / len) * (1.0 + 1e-12)).floor() as usize).sum() };
                let len = edges
                    .iter()
                    .flat_map(|&(_, l)| (1..=k).map(move |m| l / m as f64))
                    .filter(|&len| capacity(len) >= k)
                    .fold(0.0, f64::max);
                let mut used = vec![0usize; edges.len()];
                let mut slots = Vec::with_capacity(k);
                while slots.len() < k {
                    for (i, &(edge, l)) in edges.iter().enumerate() {
                        if slots.len() < k && ((used[i] + 1) as f64) * len <= l * (1.0 + 1e-12) {
                            slots.push(Slot { edge, offset: used[i] as f64 * len, length: len });
                            used[i] += 1;
                        }
                    }
                }
                slots.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.offset.total_cmp(&b.offset)));
                slots
            }
        };
        Ok(Self { k, placement, slot_length: slots[0].length, slots })
    }

    /// Edges carrying at least one slot, in order of first appearance.
    pub fn edges(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for s in &self.slots {
            if !out.contains(&s.edge) {
                out.push(s.edge);
            }
        }
        out
    }

    /// `k · μ_ℓ` for the slot length `ℓ`.
    pub fn mass_threshold(&self, p: f64) -> Result<f64> {
        Ok(self.k as f64 * mass_threshold(p, self.slot_length)?)
    }

    /// Largest mesh size `≤ h` for which every slot endpoint is a node.
    pub fn aligned_mesh_size(&self, g: &MetricGraph, h: f64) -> f64 {
        let mut h = h;
        for edge in self.edges() {
            let l = g.edge(edge).length().unwrap_or(0.0);
            let per_slot = (self.slot_length / h - 1e-9).ceil().max(1.0);
            let slots_fit = (l / self.slot_length + 1e-9).floor();
            // exact when the edge is a whole number of slots
            if (slots_fit * self.slot_length - l).abs() <= 1e-12 * l {
                h = h.min(self.slot_length / per_slot);
            }
        }
        h
    }
}

/// `μ_k = k·μ_{L/k}` on the longest nonlinear edge, with that edge.
pub fn mass_threshold_k(g: &MetricGraph, k: usize, p: f64) -> Result<(f64, usize)> {
    let layout = SlotLayout::new(g, k, Placement::LongestEdge)?;
    Ok((layout.mass_threshold(p)?, layout.slots[0].edge))
}

/// Sampled cut-off solitons `ψ_1..ψ_k` of mass `μ/k`, one per slot.
#[derive(Debug, Clone)]
pub struct SeedFamily {
    pub k: usize,
    pub mu: f64,
    pub p: f64,
    pub layout: SlotLayout,
    pub profile: CutoffSoliton,
    slots: Vec<GraphFunction>,
}

impl SeedFamily {
    /// Fails with [`Error::BelowThreshold`] when `μ < μ_k`.
    pub fn new(mesh: &Arc<Mesh>, layout: SlotLayout, mu: f64, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let threshold = layout.mass_threshold(p)?;
        if mu < threshold {
            return Err(Error::BelowThreshold {
                mu,
                threshold,
                reason: format!("seed family with k = {} needs μ ≥ μ_k", layout.k),
            });
        }
        Self::new_unchecked(mesh, layout, mu, p)
    }

    /// Same as [`SeedFamily::new`] without the threshold test.
    pub fn new_unchecked(mesh: &Arc<Mesh>, layout: SlotLayout, mu: f64, p: f64) -> Result<Self> {
        let k = layout.k;
        let profile = CutoffSoliton::construct(p, mu / k as f64, layout.slot_length)?;
        let slots = layout
            .slots
            .iter()
            .map(|s| {
                let f = GraphFunction::from_edge_fn(mesh.clone(), |e, x| {
                    if e == s.edge && x >= s.offset && x <= s.offset + s.length {
                        profile.value(x - s.offset)
                    } else {
                        0.0
                    }
                });
                f.normalized(mu / k as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, mu, p, layout, profile, slots })
    }

    pub fn slot(&self, j: usize) -> &GraphFunction {
        &self.slots[j]
    }

    /// `h(θ) = √k Σ θ_j ψ_j`, renormalized to mass `μ`.
    pub fn seed(&self, theta: &[f64]) -> Result<GraphFunction> {
        if theta.len() != self.k {
            return Err(Error::InvalidParameter(format!("θ has {} entries, expected {}", theta.len(), self.k)));
        }
        let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("|θ| = {norm} is not 1")));
        }
        let scale = (self.k as f64).sqrt();
        let mut values = vec![0.0; self.slots[0].values().len()];
        for (t, psi) in theta.iter().zip(&self.slots) {
            for (v, s) in values.iter_mut().zip(psi.values()) {
                *v += scale * t * s;
            }
        }
        let u = self.slots[0].with_values(values);
        let m = u.mass();
        Ok(u.scaled((self.mu / m).sqrt()))
    }

    pub fn energy_at(&self, theta: &[f64]) -> Result<f64> {
        Ok(energy(&self.seed(theta)?, self.p)?.total)
    }

    /// `k(ℰ(φ_{μ/k}) + certified_gap(μ/k, ℓ))`.
    pub fn chain_bound(&self) -> Result<f64> {
        let k = self.k as f64;
        let sol = SolitonParams::new(self.p, self.mu / k)?;
        Ok(k * (sol.energy() + certified_gap(self.p, self.mu / k, self.layout.slot_length)?))
    }

    /// CSV `theta_1,..,theta_k,energy` over the given directions.
    pub fn theta_sweep_csv(&self, thetas: &[Vec<f64>]) -> Result<String> {
        let mut header: Vec<String> = (1..=self.k).map(|j| format!("theta_{j}")).collect();
        header.push("energy".into());
        let rows = thetas
            .iter()
            .map(|t| {
                let mut row = t.clone();
                row.push(self.energy_at(t)?);
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        Ok(csv_table(&header, &rows))
    }
}

/// Convenience wrapper: `h(θ)` for the default longest-edge family.
pub fn build_seed(g: &MetricGraph, mesh: &Arc<Mesh>, k: usize, mu: f64, p: f64, theta: &[f64]) -> Result<GraphFunction> {
    let layout = SlotLayout::new(g, k, Placement::LongestEdge)?;
    SeedFamily::new(mesh, layout, mu, p)?.seed(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub j: usize,
    pub k: usize,
    pub bound_cj: f64,
    /// `ℰ(φ_μ)/j^{2β}`
    pub soliton_term: f64,
    /// `σ_k(μ) = k·certified_gap(μ/k, ℓ)`
    pub gap_term: f64,
    pub achieved_energy: Option<f64>,
}

impl LevelReport {
    /// Records a solver energy and returns whether it meets the bound
    /// within `tol`.
    pub fn attach(&mut self, energy: f64, tol: f64) -> bool {
        self.achieved_energy = Some(energy);
        energy <= self.bound_cj + tol
    }
}

/// Level bound `c_j ≤ ℰ(φ_μ)/j^{2β} + σ_k(μ)` for the given layout.
pub fn level_bound_for(layout: &SlotLayout, j: usize, mu: f64, p: f64) -> Result<LevelReport> {
    let k = layout.k;
    if j == 0 || j > k {
        return Err(Error::InvalidParameter(format!("level index {j} outside 1..={k}")));
    }
    let threshold = layout.mass_threshold(p)?;
    if mu < threshold {
        return Err(Error::BelowThreshold { mu, threshold, reason: format!("level bounds need μ ≥ μ_{k}") });
    }
    let sol = SolitonParams::new(p, mu)?;
    let soliton_term = sol.energy() / (j as f64).powf(2.0 * sol.beta);
    let gap_term = k as f64 * certified_gap(p, mu / k as f64, layout.slot_length)?;
    let bound_cj = soliton_term + gap_term;
    if !(bound_cj < 0.0) {
        return Err(Error::BelowThreshold { mu, threshold, reason: format!("level bound {bound_cj} is not negative") });
    }
    Ok(LevelReport { j, k, bound_cj, soliton_term, gap_term, achieved_energy: None })
}

pub fn level_bound(g: &MetricGraph, k: usize, j: usize, mu: f64, p: f64) -> Result<LevelReport> {
    level_bound_for(&SlotLayout::new(g, k, Placement::LongestEdge)?, j, mu, p)
}

/// `j·gap(μ/j, L/j)` for `j = 1..=k`, and whether each is at most the
/// `j = k` value used as `σ_k`.
pub fn gap_monotonicity(g: &MetricGraph, k: usize, mu: f64, p: f64) -> Result<(Vec<f64>, bool)> {
    let l = SlotLayout::new(g, 1, Placement::LongestEdge)?.slot_length;
    let values = (1..=k)
        .map(|j| Ok(j as f64 * certified_gap(p, mu / j as f64, l / j as f64)?))
        .collect::<Result<Vec<f64>>>()?;
    let top = values[k - 1];
    let ok = values.iter().all(|&v| v <= top * (1.0 + 1e-12));
    Ok((values, ok))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub samples: usize,
    pub max_energy: f64,
    pub chain_bound: f64,
    pub worst_theta: Vec<f64>,
}

impl ChainCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_energy <= self.chain_bound + tol
    }
}

/// `max_θ E(h(θ))` over sampled directions against `k(ℰ(φ_{μ/k}) + gap)`.
pub fn verify_level_chain(family: &SeedFamily, thetas: &[Vec<f64>]) -> Result<ChainCheck> {
    use rayon::prelude::*;
    let energies = thetas.par_iter().map(|t| family.energy_at(t)).collect::<Result<Vec<f64>>>()?;
    let (i, &max_energy) = energies
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidParameter("no θ samples".into()))?;
    Ok(ChainCheck { samples: thetas.len(), max_energy, chain_bound: family.chain_bound()?, worst_theta: thetas[i].clone() })
}
