//! Palais–Smale diagnostics: two explicit non-compact sequences living on a
//! half-line, at level `c > 0` (dispersing sines) and at level `0`
//! (dilations of a fixed bump).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_exponent, Error, GraphError, Result};
use crate::functionals::{energy, j_dual_norm};
use crate::graph::MetricGraph;
use crate::mesh::{build_mesh, GraphFunction, Mesh};
use crate::quadrature::integrate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsRow {
    pub n: usize,
    /// Closed-form `E(u_n)`.
    pub energy: f64,
    /// `E` of the continuous profile by adaptive quadrature.
    pub energy_quadrature: f64,
    /// `E` of the normalized mesh interpolant.
    pub energy_discrete: f64,
    pub dual_residual: f64,
    pub sup_norm: f64,
    pub mass_discrete: f64,
    pub support_end: f64,
    pub h: f64,
    pub dofs: usize,
}

fn first_half_line(g: &MetricGraph) -> Result<usize> {
    g.half_lines().next().ok_or(Error::Graph(GraphError::NoHalfLine))
}

/// Mesh whose half-line nodes include `support_end`, with the half-lines
/// truncated a few cells past it.
fn aligned_mesh(g: &Arc<MetricGraph>, support_end: f64, h: f64) -> Result<Arc<Mesh>> {
    let cells = (support_end / h).ceil().max(1.0);
    let h = support_end / cells;
    build_mesh(g.clone(), h, support_end + 8.0 * h)
}

fn interpolate(mesh: &Arc<Mesh>, edge: usize, f: impl Fn(f64) -> f64, mu: f64) -> Result<GraphFunction> {
    GraphFunction::from_edge_fn(mesh.clone(), |e, x| if e == edge { f(x) } else { 0.0 }).normalized(mu)
}

/// `u_n = c_n sin(a x)` on `[0, 2nπ/a]` of a half-line, zero elsewhere, with
/// `a² = 2c/μ` and `c_n² = √(2cμ)/(nπ)`: mass `μ`, energy `c`, sup norm
/// `c_n → 0`.
pub fn ps_sine_sequence(g: &Arc<MetricGraph>, c: f64, mu: f64, n: usize, p: f64, h: f64) -> Result<PsRow> {
    check_exponent(p)?;
    if !(c > 0.0 && mu > 0.0 && n > 0) {
        return Err(Error::InvalidParameter("sine sequence needs c > 0, μ > 0, n ≥ 1".into()));
    }
    let edge = first_half_line(g)?;
    let a = (2.0 * c / mu).sqrt();
    let cn = ((2.0 * c * mu).sqrt() / (n as f64 * PI)).sqrt();
    let end = 2.0 * n as f64 * PI / a;
    let mesh = aligned_mesh(g, end, h)?;
    let profile = |x: f64| if x <= end { cn * (a * x).sin() } else { 0.0 };
    let u = interpolate(&mesh, edge, profile, mu)?;
    let per_period = |f: &dyn Fn(f64) -> f64| -> f64 {
        (0..2 * n).map(|i| integrate(f, i as f64 * PI / a, (i + 1) as f64 * PI / a, 0.0, 1e-14)).sum()
    };
    let energy_quadrature = 0.5 * per_period(&|x: f64| (cn * a * (a * x).cos()).powi(2));
    Ok(PsRow {
        n,
        energy: 0.5 * a * a * mu,
        energy_quadrature,
        energy_discrete: energy(&u, p)?.total,
        dual_residual: j_dual_norm(&u, mu, p)?,
        sup_norm: cn,
        mass_discrete: u.mass(),
        support_end: end,
        h: mesh.target_h(),
        dofs: mesh.n_dofs(),
    })
}

/// The bump `ξ(x) = C sin²(πx/R)` on `[0, R]` with `‖ξ‖² = μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineBump {
    pub amplitude: f64,
    pub radius: f64,
}

impl SineBump {
    pub fn with_mass(mu: f64, radius: f64) -> Self {
        Self { amplitude: (8.0 * mu / (3.0 * radius)).sqrt(), radius }
    }

    pub fn value(&self, x: f64) -> f64 {
        if (0.0..=self.radius).contains(&x) {
            self.amplitude * (PI * x / self.radius).sin().powi(2)
        } else {
            0.0
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if (0.0..=self.radius).contains(&x) {
            self.amplitude * PI / self.radius * (2.0 * PI * x / self.radius).sin()
        } else {
            0.0
        }
    }

    /// `‖ξ'‖² = C²π²/(2R)`.
    pub fn gradient_sq(&self) -> f64 {
        self.amplitude * self.amplitude * PI * PI / (2.0 * self.radius)
    }
}

/// `u_n(x) = n^{−1/2} ξ(x/n)` on a half-line: mass `μ`, energy
/// `½‖ξ'‖²/n²`. The mesh is dilated with `n`, so the interpolants are exact
/// rescalings of one another.
pub fn ps_scaling_sequence(g: &Arc<MetricGraph>, xi: &SineBump, mu: f64, n: usize, p: f64, h: f64) -> Result<PsRow> {
    check_exponent(p)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let edge = first_half_line(g)?;
    let nf = n as f64;
    let end = nf * xi.radius;
    let mesh = aligned_mesh(g, end, h * nf)?;
    let profile = |x: f64| xi.value(x / nf) / nf.sqrt();
    let u = interpolate(&mesh, edge, profile, mu)?;
    let energy_quadrature = 0.5 * integrate(|x| (xi.derivative(x / nf) / nf.powf(1.5)).powi(2), 0.0, end, 0.0, 1e-14);
    Ok(PsRow {
        n,
        energy: 0.5 * xi.gradient_sq() / (nf * nf),
        energy_quadrature,
        energy_discrete: energy(&u, p)?.total,
        dual_residual: j_dual_norm(&u, mu, p)?,
        sup_norm: xi.amplitude / nf.sqrt(),
        mass_discrete: u.mass(),
        support_end: end,
        h: mesh.target_h(),
        dofs: mesh.n_dofs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> Arc<MetricGraph> {
        Arc::new(MetricGraph::dumbbell(4.0).unwrap())
    }

    #[test]
    fn sine_sequence_keeps_level_and_mass() {
        let g = graph();
        let rows: Vec<PsRow> = [1, 4].iter().map(|&n| ps_sine_sequence(&g, 1.0, 2.0, n, 4.0, 0.02).unwrap()).collect();
        for r in &rows {
            assert!((r.energy - 1.0).abs() < 1e-14);
            assert!((r.energy_quadrature - 1.0).abs() < 1e-10);
            assert!((r.mass_discrete - 2.0).abs() < 1e-12);
            assert!((r.energy_discrete - 1.0).abs() < 1e-3);
        }
        assert!(rows[1].dual_residual < rows[0].dual_residual);
        assert!(rows[1].sup_norm < rows[0].sup_norm);
    }

    #[test]
    fn scaling_sequence_quarters_per_doubling() {
        let g = graph();
        let xi = SineBump::with_mass(2.0, 3.0);
        let r1 = ps_scaling_sequence(&g, &xi, 2.0, 1, 4.0, 0.01).unwrap();
        assert!((r1.energy - 0.5 * xi.gradient_sq()).abs() < 1e-15);
        assert!((r1.energy_quadrature - r1.energy).abs() < 1e-12);
        let r2 = ps_scaling_sequence(&g, &xi, 2.0, 2, 4.0, 0.01).unwrap();
        assert!((r2.energy_discrete / r1.energy_discrete - 0.25).abs() < 1e-10);
        assert!((r2.mass_discrete - 2.0).abs() < 1e-12);
        assert!(r2.dual_residual < r1.dual_residual);
    }

    #[test]
    fn dilated_mesh_must_fit_the_core() {
        let g = graph();
        let xi = SineBump::with_mass(2.0, 3.0);
        assert!(ps_scaling_sequence(&g, &xi, 2.0, 1000, 4.0, 0.01).is_err());
    }
}
