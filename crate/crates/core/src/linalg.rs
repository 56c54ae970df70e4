//! Sparse symmetric matrices with the coupling pattern of a graph mesh, and
//! a direct solver for them.
//!
//! Every off-diagonal entry couples two consecutive nodes on one edge, so a
//! matrix is a diagonal plus one link array per edge. The solver eliminates
//! the tridiagonal interior block of each edge (Thomas algorithm) and solves
//! the remaining dense Schur complement on the vertex unknowns with partial
//! pivoting. Cost is linear in the number of edge nodes.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Node chain of one edge: `start` vertex dof, interior dofs, and the far
/// end (`None` for a Dirichlet node).
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub start: usize,
    pub interior: Range<usize>,
    pub end: Option<usize>,
}

impl Chain {
    pub fn links(&self) -> usize {
        self.interior.len() + 1
    }

    /// Global dof of chain node `i` (`0 ..= links`).
    pub fn dof(&self, i: usize) -> Option<usize> {
        let m = self.interior.len();
        if i == 0 {
            Some(self.start)
        } else if i <= m {
            Some(self.interior.start + i - 1)
        } else {
            self.end
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainLayout {
    pub chains: Vec<Chain>,
    pub n_vertices: usize,
    pub n_dofs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    layout: Arc<ChainLayout>,
    pub diag: Vec<f64>,
    /// `links[c][i]` couples chain nodes `i` and `i + 1` of chain `c`.
    pub links: Vec<Vec<f64>>,
}

impl ChainMatrix {
    pub fn zeros(layout: Arc<ChainLayout>) -> Self {
        let links = layout.chains.iter().map(|c| vec![0.0; c.links()]).collect();
        Self { diag: vec![0.0; layout.n_dofs], links, layout }
    }

    pub fn layout(&self) -> &Arc<ChainLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.n_dofs
    }

    /// Adds a symmetric 2×2 element block on link `i` of chain `c`;
    /// contributions to a Dirichlet node are dropped.
    pub fn add_element(&mut self, c: usize, i: usize, block: [[f64; 2]; 2]) {
        let chain = &self.layout.chains[c];
        let (a, b) = (chain.dof(i), chain.dof(i + 1));
        if let Some(a) = a {
            self.diag[a] += block[0][0];
        }
        if let Some(b) = b {
            self.diag[b] += block[1][1];
        }
        self.links[c][i] += block[0][1];
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for (chain, links) in self.layout.chains.iter().zip(&self.links) {
            for (i, &o) in links.iter().enumerate() {
                if let (Some(a), Some(b)) = (chain.dof(i), chain.dof(i + 1)) {
                    y[a] += o * x[b];
                    y[b] += o * x[a];
                }
            }
        }
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s: f64 = self.diag.iter().zip(x).zip(y).map(|((d, a), b)| d * a * b).sum();
        for (chain, links) in self.layout.chains.iter().zip(&self.links) {
            for (i, &o) in links.iter().enumerate() {
                if let (Some(a), Some(b)) = (chain.dof(i), chain.dof(i + 1)) {
                    s += o * (x[a] * y[b] + x[b] * y[a]);
                }
            }
        }
        s
    }

    /// `self + scale · other`.
    pub fn plus_scaled(&self, other: &ChainMatrix, scale: f64) -> ChainMatrix {
        let mut out = self.clone();
        out.add_scaled(other, scale);
        out
    }

    pub fn add_scaled(&mut self, other: &ChainMatrix, scale: f64) {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout);
        for (d, o) in self.diag.iter_mut().zip(&other.diag) {
            *d += scale * o;
        }
        for (l, o) in self.links.iter_mut().zip(&other.links) {
            for (a, b) in l.iter_mut().zip(o) {
                *a += scale * b;
            }
        }
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for (i, &d) in self.diag.iter().enumerate() {
            m[i][i] = d;
        }
        for (chain, links) in self.layout.chains.iter().zip(&self.links) {
            for (i, &o) in links.iter().enumerate() {
                if let (Some(a), Some(b)) = (chain.dof(i), chain.dof(i + 1)) {
                    m[a][b] += o;
                    m[b][a] += o;
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    denom: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn factor(diag: Vec<f64>, off: Vec<f64>, first_row: usize) -> Result<Self> {
        let m = diag.len();
        let mut denom = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 0..m {
            let lower = if i > 0 { off[i - 1] * upper[i - 1] } else { 0.0 };
            let d = diag[i] - lower;
            let scale = diag[i].abs() + if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |o| o.abs());
            if !d.is_finite() || d.abs() <= 1e-14 * scale || d == 0.0 {
                return Err(Error::Singular { row: first_row + i, pivot: d });
            }
            denom[i] = d;
            if i + 1 < m {
                upper[i] = off[i] / d;
            }
        }
        Ok(Self { diag, off, denom, upper })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let m = self.diag.len();
        for i in 0..m {
            let prev = if i > 0 { self.off[i - 1] * x[i - 1] } else { 0.0 };
            x[i] = (x[i] - prev) / self.denom[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            x[i] -= self.upper[i] * x[i + 1];
        }
    }

    fn unit_response(&self, first: bool) -> (f64, f64) {
        let m = self.diag.len();
        let mut e = vec![0.0; m];
        e[if first { 0 } else { m - 1 }] = 1.0;
        self.solve_in_place(&mut e);
        (e[0], e[m - 1])
    }
}

struct EdgeBlock {
    tri: Option<Tridiagonal>,
    to_start: f64,
    to_end: Option<f64>,
}

/// LU factorization of the vertex Schur complement (row-major, partial pivoting).
struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("nonempty");
            if !(pv > 1e-15 * scale) {
                return Err(Error::Singular { row: k, pivot: pv });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Reusable factorization of a [`ChainMatrix`].
pub struct ChainFactorization {
    layout: Arc<ChainLayout>,
    blocks: Vec<EdgeBlock>,
    vertex_lu: DenseLu,
}

impl ChainFactorization {
    pub fn new(matrix: &ChainMatrix) -> Result<Self> {
        let layout = matrix.layout.clone();
        let nv = layout.n_vertices;
        let mut schur = vec![0.0; nv * nv];
        for v in 0..nv {
            schur[v * nv + v] = matrix.diag[v];
        }
        let mut blocks = Vec::with_capacity(layout.chains.len());
        for (chain, links) in layout.chains.iter().zip(&matrix.links) {
            let m = chain.interior.len();
            let a = chain.start;
            if m == 0 {
                if let Some(b) = chain.end {
                    schur[a * nv + b] += links[0];
                    schur[b * nv + a] += links[0];
                }
                blocks.push(EdgeBlock { tri: None, to_start: links[0], to_end: chain.end.map(|_| links[0]) });
                continue;
            }
            let diag = matrix.diag[chain.interior.clone()].to_vec();
            let off = links[1..m].to_vec();
            let tri = Tridiagonal::factor(diag, off, chain.interior.start)?;
            let ca = links[0];
            let (ya_first, ya_last) = tri.unit_response(true);
            schur[a * nv + a] -= ca * ca * ya_first;
            let to_end = chain.end.map(|b| {
                let cb = links[m];
                let (yb_first, yb_last) = tri.unit_response(false);
                schur[a * nv + b] -= ca * cb * yb_first;
                schur[b * nv + a] -= cb * ca * ya_last;
                schur[b * nv + b] -= cb * cb * yb_last;
                cb
            });
            blocks.push(EdgeBlock { tri: Some(tri), to_start: ca, to_end });
        }
        let vertex_lu = DenseLu::factor(schur, nv)?;
        Ok(Self { layout, blocks, vertex_lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let nv = self.layout.n_vertices;
        let mut x = rhs.to_vec();
        let mut reduced = rhs[..nv].to_vec();
        for (chain, block) in self.layout.chains.iter().zip(&self.blocks) {
            let Some(tri) = &block.tri else { continue };
            let mut y = rhs[chain.interior.clone()].to_vec();
            tri.solve_in_place(&mut y);
            reduced[chain.start] -= block.to_start * y[0];
            if let (Some(b), Some(cb)) = (chain.end, block.to_end) {
                reduced[b] -= cb * y[y.len() - 1];
            }
        }
        let xv = self.vertex_lu.solve(&reduced);
        x[..nv].copy_from_slice(&xv);
        for (chain, block) in self.layout.chains.iter().zip(&self.blocks) {
            let Some(tri) = &block.tri else { continue };
            let w = &mut x[chain.interior.clone()];
            let last = w.len() - 1;
            w[0] -= block.to_start * xv[chain.start];
            if let (Some(b), Some(cb)) = (chain.end, block.to_end) {
                w[last] -= cb * xv[b];
            }
            tri.solve_in_place(w);
        }
        x
    }

    /// Solves the bordered system `[A c; cᵀ 0] [x; s] = [f; g]`.
    pub fn solve_bordered(&self, border: &[f64], f: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        let x1 = self.solve(f);
        let x2 = self.solve(border);
        let denom = dot(border, &x2);
        if !denom.is_finite() || denom.abs() < 1e-300 {
            return Err(Error::Singular { row: self.layout.n_dofs, pivot: denom });
        }
        let s = (dot(border, &x1) - g) / denom;
        let x = x1.iter().zip(&x2).map(|(a, b)| a - s * b).collect();
        Ok((x, s))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
