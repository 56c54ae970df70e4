//! Piecewise-linear discretization of a metric graph.
//!
//! Each bounded edge gets a uniform grid; each half-line is truncated to
//! `[0, T]` with a homogeneous Dirichlet node at `x = T`. Vertex values are
//! single shared unknowns, so continuity holds by construction and the
//! Kirchhoff conditions appear as the natural conditions of discrete
//! stationarity.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{dot, Chain, ChainFactorization, ChainLayout, ChainMatrix};
use crate::quadrature::{GAUSS3_NODES, GAUSS3_WEIGHTS};
use crate::report::fmt_sig;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMesh {
    pub edge: usize,
    pub intervals: usize,
    pub h: f64,
    /// `ℓ_e` for bounded edges, the truncation length for half-lines.
    pub extent: f64,
    pub half_line: bool,
    pub nonlinear: bool,
}

impl EdgeMesh {
    pub fn node_x(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.extent
        } else {
            i as f64 * self.h
        }
    }
}

/// Assembled stiffness and mass matrices plus the factorized `K + M`
/// (the discrete `H¹` Riesz map).
pub struct Operators {
    pub stiffness: ChainMatrix,
    pub mass: ChainMatrix,
    riesz: ChainFactorization,
}

impl Operators {
    /// Solves `(K + M) w = r`.
    pub fn riesz(&self, r: &[f64]) -> Vec<f64> {
        self.riesz.solve(r)
    }
}

impl std::fmt::Debug for Operators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Operators").field("dim", &self.stiffness.dim()).finish()
    }
}

#[derive(Debug)]
pub struct Mesh {
    graph: Arc<MetricGraph>,
    edges: Vec<EdgeMesh>,
    layout: Arc<ChainLayout>,
    target_h: f64,
    truncation: f64,
    operators: OnceLock<Operators>,
}

/// Metadata written next to function dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMetadata {
    pub target_h: f64,
    pub truncation: f64,
    pub n_dofs: usize,
    pub edges: Vec<EdgeMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetadata {
    pub id: String,
    pub kind: String,
    pub intervals: usize,
    pub h: f64,
    pub extent: f64,
    pub nonlinear: bool,
}

/// Builds the mesh: `⌈ℓ_e/h⌉` intervals per bounded edge, `⌈T/h⌉` per
/// truncated half-line.
pub fn build_mesh(graph: Arc<MetricGraph>, target_h: f64, truncation: f64) -> Result<Arc<Mesh>> {
    if !(target_h.is_finite() && target_h > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh size h = {target_h} must be positive")));
    }
    if !(truncation.is_finite() && truncation > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation T = {truncation} must be positive")));
    }
    let shortest = graph.shortest_bounded_length();
    if target_h >= shortest {
        return Err(Error::InvalidParameter(format!(
            "mesh size h = {target_h} is not below the shortest edge length {shortest}"
        )));
    }
    let intervals_for = |extent: f64| ((extent / target_h) - 1e-9).ceil().max(1.0) as usize;

    let n_vertices = graph.vertices().len();
    let mut next = n_vertices;
    let mut edges = Vec::with_capacity(graph.edges().len());
    let mut chains = Vec::with_capacity(graph.edges().len());
    for (i, e) in graph.edges().iter().enumerate() {
        let (extent, half_line) = match e.length() {
            Some(l) => (l, false),
            None => (truncation, true),
        };
        let n = intervals_for(extent);
        let interior = next..next + (n - 1);
        next = interior.end;
        chains.push(Chain { start: e.from, interior, end: e.to });
        edges.push(EdgeMesh { edge: i, intervals: n, h: extent / n as f64, extent, half_line, nonlinear: e.nonlinear });
    }
    let layout = Arc::new(ChainLayout { chains, n_vertices, n_dofs: next });
    Ok(Arc::new(Mesh { graph, edges, layout, target_h, truncation, operators: OnceLock::new() }))
}

/// Default mesh size: the smaller of `ℓ_min/8` and a twentieth of the
/// soliton width `μ^{-β}`.
pub fn default_mesh_size(graph: &MetricGraph, mu: f64, p: f64) -> f64 {
    let beta = (p - 2.0) / (6.0 - p);
    (graph.shortest_bounded_length() / 8.0).min(mu.powf(-beta) / 20.0)
}

/// Truncation length making `exp(-√λ T)` fall below `1e-10`; falls back
/// to `fallback` when the multiplier estimate is not positive.
pub fn truncation_for_multiplier(lambda: f64, fallback: f64) -> f64 {
    if lambda > 0.0 {
        (1e10_f64).ln() / lambda.sqrt()
    } else {
        fallback
    }
}

/// Assembles stiffness `[[1,−1],[−1,1]]/h` and mass `h[[2,1],[1,2]]/6`.
pub fn assemble(mesh: &Mesh) -> (ChainMatrix, ChainMatrix) {
    let mut k = ChainMatrix::zeros(mesh.layout.clone());
    let mut m = ChainMatrix::zeros(mesh.layout.clone());
    for (c, em) in mesh.edges.iter().enumerate() {
        let s = 1.0 / em.h;
        let w = em.h / 6.0;
        for i in 0..em.intervals {
            k.add_element(c, i, [[s, -s], [-s, s]]);
            m.add_element(c, i, [[2.0 * w, w], [w, 2.0 * w]]);
        }
    }
    (k, m)
}

impl Mesh {
    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn edges(&self) -> &[EdgeMesh] {
        &self.edges
    }

    pub fn layout(&self) -> &Arc<ChainLayout> {
        &self.layout
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs
    }

    pub fn n_vertices(&self) -> usize {
        self.layout.n_vertices
    }

    pub fn target_h(&self) -> f64 {
        self.target_h
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn chain(&self, edge: usize) -> &Chain {
        &self.layout.chains[edge]
    }

    /// Global dof of node `i` on `edge`, `None` at a Dirichlet node.
    pub fn dof(&self, edge: usize, i: usize) -> Option<usize> {
        self.layout.chains[edge].dof(i)
    }

    pub fn operators(&self) -> &Operators {
        self.operators.get_or_init(|| {
            let (stiffness, mass) = assemble(self);
            let riesz = ChainFactorization::new(&stiffness.plus_scaled(&mass, 1.0))
                .expect("K + M is positive definite");
            Operators { stiffness, mass, riesz }
        })
    }

    pub fn metadata(&self) -> MeshMetadata {
        MeshMetadata {
            target_h: self.target_h,
            truncation: self.truncation,
            n_dofs: self.n_dofs(),
            edges: self
                .edges
                .iter()
                .map(|em| EdgeMetadata {
                    id: self.graph.edge(em.edge).id.clone(),
                    kind: if em.half_line { "half_line" } else { "bounded" }.into(),
                    intervals: em.intervals,
                    h: em.h,
                    extent: em.extent,
                    nonlinear: em.nonlinear,
                })
                .collect(),
        }
    }

    fn element_values<'a>(&'a self, u: &'a [f64], c: usize) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
        let chain = &self.layout.chains[c];
        let val = move |i: usize| chain.dof(i).map_or(0.0, |d| u[d]);
        (0..self.edges[c].intervals).map(move |i| (i, val(i), val(i + 1)))
    }

    fn lp_sum(&self, u: &[f64], p: f64, only_nonlinear: bool) -> f64 {
        let mut total = 0.0;
        for (c, em) in self.edges.iter().enumerate() {
            if only_nonlinear && !em.nonlinear {
                continue;
            }
            let mut s = 0.0;
            for (_, a, b) in self.element_values(u, c) {
                for (&xi, &w) in GAUSS3_NODES.iter().zip(&GAUSS3_WEIGHTS) {
                    s += w * (a + xi * (b - a)).abs().powf(p);
                }
            }
            total += s * em.h;
        }
        total
    }

    /// `∫_G |u'|²` summed from squared element differences, which avoids
    /// the cancellation in `uᵀKu`.
    pub fn gradient_sq(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for (c, em) in self.edges.iter().enumerate() {
            let s: f64 = self.element_values(u, c).map(|(_, a, b)| (b - a) * (b - a)).sum();
            total += s / em.h;
        }
        total
    }

    /// `∫_K |u|^p` over the nonlinear edges (3-point Gauss per interval).
    pub fn lp_core(&self, u: &[f64], p: f64) -> f64 {
        self.lp_sum(u, p, true)
    }

    /// `∫_G |u|^p` over all edges.
    pub fn lp_all(&self, u: &[f64], p: f64) -> f64 {
        self.lp_sum(u, p, false)
    }

    /// Load vector `∫_K |u|^{p-2} u φ_i`.
    pub fn nonlinear_load(&self, u: &[f64], p: f64) -> Vec<f64> {
        let mut f = vec![0.0; u.len()];
        for (c, em) in self.edges.iter().enumerate() {
            if !em.nonlinear {
                continue;
            }
            let chain = &self.layout.chains[c];
            for (i, a, b) in self.element_values(u, c) {
                let (mut fa, mut fb) = (0.0, 0.0);
                for (&xi, &w) in GAUSS3_NODES.iter().zip(&GAUSS3_WEIGHTS) {
                    let v = a + xi * (b - a);
                    let g = w * v.abs().powf(p - 2.0) * v;
                    fa += g * (1.0 - xi);
                    fb += g * xi;
                }
                if let Some(d) = chain.dof(i) {
                    f[d] += em.h * fa;
                }
                if let Some(d) = chain.dof(i + 1) {
                    f[d] += em.h * fb;
                }
            }
        }
        f
    }

    /// Jacobian of [`Mesh::nonlinear_load`]: `(p−1)∫_K |u|^{p-2} φ_i φ_j`.
    pub fn nonlinear_jacobian(&self, u: &[f64], p: f64) -> ChainMatrix {
        let mut jac = ChainMatrix::zeros(self.layout.clone());
        for (c, em) in self.edges.iter().enumerate() {
            if !em.nonlinear {
                continue;
            }
            let elements: Vec<_> = self.element_values(u, c).collect();
            for (i, a, b) in elements {
                let mut block = [[0.0; 2]; 2];
                for (&xi, &w) in GAUSS3_NODES.iter().zip(&GAUSS3_WEIGHTS) {
                    let v = a + xi * (b - a);
                    let g = em.h * w * (p - 1.0) * v.abs().powf(p - 2.0);
                    let phi = [1.0 - xi, xi];
                    for r in 0..2 {
                        for s in 0..2 {
                            block[r][s] += g * phi[r] * phi[s];
                        }
                    }
                }
                jac.add_element(c, i, block);
            }
        }
        jac
    }
}

/// Piecewise-linear function on a mesh, stored by dof.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GraphFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_dofs() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                mesh.n_dofs(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite function value".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.n_dofs();
        Self { mesh, values: vec![0.0; n] }
    }

    /// Samples `f(edge, x)` at every node. A vertex takes the mean of the
    /// values its incident edges report there.
    pub fn from_edge_fn(mesh: Arc<Mesh>, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut values = vec![0.0; mesh.n_dofs()];
        let mut counts = vec![0usize; mesh.n_vertices()];
        for (c, em) in mesh.edges.iter().enumerate() {
            for i in 0..=em.intervals {
                let Some(d) = mesh.dof(c, i) else { continue };
                let v = f(em.edge, em.node_x(i));
                if d < mesh.n_vertices() {
                    counts[d] += 1;
                }
                values[d] += v;
            }
        }
        for (v, &n) in values.iter_mut().zip(&counts) {
            if n > 0 {
                *v /= n as f64;
            }
        }
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { mesh: self.mesh.clone(), values }
    }

    pub fn same_mesh(&self, other: &GraphFunction) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    pub(crate) fn check_mesh(&self, other: &GraphFunction) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `∫_G u²`.
    pub fn mass(&self) -> f64 {
        self.mesh.operators().mass.quadratic_form(&self.values)
    }

    pub fn l2_dot(&self, other: &GraphFunction) -> Result<f64> {
        self.check_mesh(other)?;
        Ok(self.mesh.operators().mass.bilinear(&self.values, &other.values))
    }

    /// `∫_G |u'|²`.
    pub fn gradient_sq(&self) -> f64 {
        self.mesh.gradient_sq(&self.values)
    }

    pub fn h1_norm(&self) -> f64 {
        (self.gradient_sq() + self.mass()).max(0.0).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    /// `self + c · other`.
    pub fn plus_scaled(&self, other: &GraphFunction, c: f64) -> Result<Self> {
        self.check_mesh(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect()))
    }

    /// Rescales to `∫u² = mu`.
    pub fn normalized(&self, mu: f64) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::Degenerate("cannot normalize the zero function".into()));
        }
        Ok(self.scaled((mu / m).sqrt()))
    }

    /// Node values along one edge (`x`, value), Dirichlet node included.
    pub fn edge_nodes(&self, edge: usize) -> Vec<(f64, f64)> {
        let em = &self.mesh.edges[edge];
        (0..=em.intervals)
            .map(|i| (em.node_x(i), self.mesh.dof(edge, i).map_or(0.0, |d| self.values[d])))
            .collect()
    }

    /// CSV dump with columns `edge_id,x,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge_id,x,value\n");
        for (c, _) in self.mesh.edges.iter().enumerate() {
            let id = &self.mesh.graph.edge(c).id;
            for (x, v) in self.edge_nodes(c) {
                let _ = writeln!(out, "{id},{},{}", fmt_sig(x), fmt_sig(v));
            }
        }
        out
    }

    /// Reads a CSV dump produced by [`GraphFunction::to_csv`] on a mesh with
    /// the same node layout.
    pub fn from_csv(mesh: Arc<Mesh>, text: &str) -> Result<Self> {
        let mut values = vec![f64::NAN; mesh.n_dofs()];
        let bad = |line: usize, why: &str| Error::InvalidParameter(format!("csv line {line}: {why}"));
        for (ln, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(ln + 1, "expected 3 columns"));
            }
            let edge = mesh.graph.edge_index(cols[0]).ok_or_else(|| bad(ln + 1, "unknown edge"))?;
            let x: f64 = cols[1].trim().parse().map_err(|_| bad(ln + 1, "bad x"))?;
            let v: f64 = cols[2].trim().parse().map_err(|_| bad(ln + 1, "bad value"))?;
            let em = &mesh.edges[edge];
            let i = (x / em.h).round();
            if !(i >= 0.0 && i <= em.intervals as f64) || (i * em.h - x).abs() > 1e-6 * em.h.max(1.0) {
                return Err(bad(ln + 1, "x is not a node of this mesh"));
            }
            if let Some(d) = mesh.dof(edge, i as usize) {
                values[d] = v;
            }
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("csv does not cover every node".into()));
        }
        Self::new(mesh, values)
    }
}

/// Per-vertex Kirchhoff defect: the vertex rows of `−(Ku + λMu − N(u))`,
/// which for the exact solution equal the sum of outgoing derivatives.
pub fn kirchhoff_residual(u: &GraphFunction, lambda: f64, p: f64) -> Vec<f64> {
    let r = stationarity_residual(u, lambda, p);
    r[..u.mesh.n_vertices()].iter().map(|v| -v).collect()
}

/// `Ku + λMu − N(u)` as a dof vector.
pub fn stationarity_residual(u: &GraphFunction, lambda: f64, p: f64) -> Vec<f64> {
    let ops = u.mesh.operators();
    let ku = ops.stiffness.matvec(&u.values);
    let mu = ops.mass.matvec(&u.values);
    let n = u.mesh.nonlinear_load(&u.values, p);
    ku.iter().zip(&mu).zip(&n).map(|((k, m), f)| k + lambda * m - f).collect()
}

pub(crate) fn dual_norm_of(mesh: &Mesh, r: &[f64]) -> f64 {
    let w = mesh.operators().riesz(r);
    dot(r, &w).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MetricGraph;
    use crate::quadrature::integrate;

    fn dumbbell_mesh(h: f64, t: f64) -> Arc<Mesh> {
        build_mesh(Arc::new(MetricGraph::dumbbell(4.0).unwrap()), h, t).unwrap()
    }

    #[test]
    fn interval_counts() {
        let mesh = dumbbell_mesh(0.5, 30.0);
        let counts: Vec<usize> = mesh.edges().iter().map(|e| e.intervals).collect();
        assert_eq!(counts, vec![60, 8, 60]);
        // two vertices + 59 + 7 + 59 interior nodes
        assert_eq!(mesh.n_dofs(), 2 + 59 + 7 + 59);
    }

    #[test]
    fn mesh_size_must_be_below_shortest_edge() {
        let g = Arc::new(MetricGraph::dumbbell(4.0).unwrap());
        assert!(matches!(build_mesh(g.clone(), 5.0, 30.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_mesh(g, 0.1, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn element_matrices_assemble_textbook_entries() {
        let mesh = dumbbell_mesh(0.5, 1.0);
        let (k, m) = assemble(&mesh);
        let h = mesh.edges()[1].h;
        let interior = mesh.chain(1).interior.start;
        assert!((k.diag[interior] - 2.0 / h).abs() < 1e-12);
        assert!((m.diag[interior] - 4.0 * h / 6.0).abs() < 1e-15);
        assert!((k.links[1][1] + 1.0 / h).abs() < 1e-12);
        assert!((m.links[1][1] - h / 6.0).abs() < 1e-15);
        // vertex v1 touches one core element and one tail element
        let ht = mesh.edges()[0].h;
        assert!((k.diag[0] - (1.0 / h + 1.0 / ht)).abs() < 1e-12);
        assert!((m.diag[0] - (h + ht) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn linear_function_energy_is_exact() {
        // u = x on the core [0,1] with 10 elements, continued linearly to
        // zero on the tail at v2: ∫u'² = 1 + 1/T.
        let g = Arc::new(MetricGraph::dumbbell(1.0).unwrap());
        let t = 2.0;
        let mesh = build_mesh(g, 0.1, t).unwrap();
        assert_eq!(mesh.edges()[1].intervals, 10);
        let u = GraphFunction::from_edge_fn(mesh, |e, x| match e {
            1 => x,
            2 => 1.0 - x / t,
            _ => 0.0,
        });
        assert!((u.gradient_sq() - (1.0 + 1.0 / t)).abs() < 1e-12);
    }

    #[test]
    fn mass_matrix_is_exact_l2_of_interpolant() {
        let mesh = dumbbell_mesh(0.3, 2.0);
        let u = GraphFunction::from_edge_fn(mesh.clone(), |e, x| match e {
            1 => (1.3 * x).sin() + 0.2,
            _ => 0.2 * (-x).exp() * (2.0 - x).max(0.0) / 2.0,
        });
        let mut exact = 0.0;
        for c in 0..mesh.edges().len() {
            let nodes = u.edge_nodes(c);
            for w in nodes.windows(2) {
                let ((x0, a), (x1, b)) = (w[0], w[1]);
                exact += integrate(|x| {
                    let t = (x - x0) / (x1 - x0);
                    (a + t * (b - a)).powi(2)
                }, x0, x1, 1e-16, 1e-15);
            }
        }
        assert!((u.mass() - exact).abs() < 1e-12, "{} vs {exact}", u.mass());
    }

    #[test]
    fn nonlinear_jacobian_matches_finite_differences() {
        let mesh = dumbbell_mesh(0.4, 2.0);
        let u = GraphFunction::from_edge_fn(mesh.clone(), |e, x| if e == 1 { 1.0 + (x - 1.0).sin() } else { (-x).exp() });
        let p = 3.5;
        let jac = mesh.nonlinear_jacobian(u.values(), p);
        let dir: Vec<f64> = (0..mesh.n_dofs()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let eps = 1e-6;
        let plus: Vec<f64> = u.values().iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = u.values().iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fp = mesh.nonlinear_load(&plus, p);
        let fm = mesh.nonlinear_load(&minus, p);
        let jd = jac.matvec(&dir);
        for i in 0..mesh.n_dofs() {
            let fd = (fp[i] - fm[i]) / (2.0 * eps);
            assert!((fd - jd[i]).abs() < 1e-7, "{i}: {fd} vs {}", jd[i]);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mesh = dumbbell_mesh(0.5, 2.0);
        let u = GraphFunction::from_edge_fn(mesh.clone(), |e, x| e as f64 + 0.25 * x);
        let back = GraphFunction::from_csv(mesh, &u.to_csv()).unwrap();
        for (a, b) in u.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
        }
    }
}
