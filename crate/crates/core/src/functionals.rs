//! Energy, Lagrange multiplier, the residual functional `J(u)` and its dual
//! norm, the tangent projection, and Gagliardo–Nirenberg ratios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_exponent, Error, Result};
use crate::linalg::dot;
use crate::mesh::{dual_norm_of, GraphFunction};
use crate::soliton::sech_moment;

/// Relative mass mismatch tolerated by the constrained functionals.
pub const MASS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½∫|u'|²`
    pub kinetic: f64,
    /// `(1/p)∫_K |u|^p`
    pub potential: f64,
    pub total: f64,
    pub mass: f64,
    /// `∫_K |u|^p`
    pub lp_core: f64,
}

pub fn energy(u: &GraphFunction, p: f64) -> Result<EnergyBreakdown> {
    check_exponent(p)?;
    let kinetic = 0.5 * u.gradient_sq();
    let lp_core = u.mesh().lp_core(u.values(), p);
    let potential = lp_core / p;
    Ok(EnergyBreakdown { kinetic, potential, total: kinetic - potential, mass: u.mass(), lp_core })
}

fn check_mass(u: &GraphFunction, mu: f64) -> Result<()> {
    let m = u.mass();
    if !(mu > 0.0) || (m - mu).abs() > MASS_TOLERANCE * mu {
        return Err(Error::MassMismatch { expected: mu, found: m });
    }
    Ok(())
}

/// `λ(u) = (∫_K|u|^p − ∫|u'|²)/μ`.
pub fn lambda_of(u: &GraphFunction, mu: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_mass(u, mu)?;
    Ok(multiplier(u, mu, p))
}

fn multiplier(u: &GraphFunction, mu: f64, p: f64) -> f64 {
    (u.mesh().lp_core(u.values(), p) - u.gradient_sq()) / mu
}

/// Dof vector `r` with `J(u)v = r·v`, i.e. `Ku − N(u) + λ(u)Mu`.
pub fn j_residual(u: &GraphFunction, mu: f64, p: f64) -> Result<Vec<f64>> {
    let lambda = lambda_of(u, mu, p)?;
    Ok(crate::mesh::stationarity_residual(u, lambda, p))
}

/// The residual as a nodal function, for CSV export.
pub fn j_residual_function(u: &GraphFunction, mu: f64, p: f64) -> Result<GraphFunction> {
    Ok(u.with_values(j_residual(u, mu, p)?))
}

/// `J(u)v = ∫u'v' − ∫_K|u|^{p−2}uv + λ(u)∫uv`.
pub fn j_apply(u: &GraphFunction, v: &GraphFunction, mu: f64, p: f64) -> Result<f64> {
    u.check_mesh(v)?;
    Ok(dot(&j_residual(u, mu, p)?, v.values()))
}

/// `‖J(u)‖_{H'}` through the Riesz representative in the `K + M` inner product.
pub fn j_dual_norm(u: &GraphFunction, mu: f64, p: f64) -> Result<f64> {
    Ok(dual_norm_of(u.mesh(), &j_residual(u, mu, p)?))
}

/// `‖E'_M(u)‖`: the dual norm of `J(u)` restricted to the tangent space
/// `{v : ∫uv = 0}`, computed exactly as
/// `√(rᵀA⁻¹r − (cᵀA⁻¹r)²/(cᵀA⁻¹c))` with `A = K + M`, `c = Mu`.
pub fn constrained_gradient_norm(u: &GraphFunction, mu: f64, p: f64) -> Result<f64> {
    let r = j_residual(u, mu, p)?;
    let ops = u.mesh().operators();
    let c = ops.mass.matvec(u.values());
    let z = ops.riesz(&c);
    let w = ops.riesz(&r);
    let rr = dot(&r, &w);
    let cr = dot(&c, &w);
    let cc = dot(&c, &z);
    Ok((rr - cr * cr / cc).max(0.0).sqrt())
}

/// `π_u v = v − (μ⁻¹∫uv)u`.
pub fn tangent_project(u: &GraphFunction, v: &GraphFunction, mu: f64) -> Result<GraphFunction> {
    check_mass(u, mu)?;
    let t = u.l2_dot(v)? / mu;
    v.plus_scaled(u, -t)
}

/// A smooth random function: uniform nodal noise passed through the
/// `H¹` Riesz map.
pub fn random_function<R: Rng + ?Sized>(like: &GraphFunction, rng: &mut R) -> GraphFunction {
    let xi: Vec<f64> = (0..like.values().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ops = like.mesh().operators();
    let v = ops.riesz(&ops.mass.matvec(&xi));
    like.with_values(v)
}

/// A random tangent direction at `u`, scaled to unit `H¹` norm.
pub fn random_tangent<R: Rng + ?Sized>(u: &GraphFunction, mu: f64, rng: &mut R) -> Result<GraphFunction> {
    let v = tangent_project(u, &random_function(u, rng), mu)?;
    let n = v.h1_norm();
    Ok(v.scaled(1.0 / n))
}

/// `max |J(u)v|/‖v‖_H` over `samples` random tangent directions; a lower
/// bound for [`constrained_gradient_norm`].
pub fn sampled_gradient_norm<R: Rng + ?Sized>(u: &GraphFunction, mu: f64, p: f64, samples: usize, rng: &mut R) -> Result<f64> {
    let r = j_residual(u, mu, p)?;
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let v = random_tangent(u, mu, rng)?;
        best = best.max(dot(&r, v.values()).abs() / v.h1_norm());
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSandwich {
    pub constrained: f64,
    pub sampled: f64,
    pub dual: f64,
    /// `1 + μ^{-1/2}‖u‖_H`
    pub factor: f64,
}

impl NormSandwich {
    pub fn holds(&self, rel_slack: f64) -> bool {
        let slack = rel_slack * self.dual.max(self.constrained);
        self.sampled <= self.constrained + slack
            && self.constrained <= self.dual + slack
            && self.dual <= self.factor * self.constrained + slack
    }
}

/// `‖E'_M(u)‖ ≤ ‖J(u)‖_{H'} ≤ (1 + μ^{-1/2}‖u‖_H)‖E'_M(u)‖`.
pub fn norm_sandwich<R: Rng + ?Sized>(u: &GraphFunction, mu: f64, p: f64, samples: usize, rng: &mut R) -> Result<NormSandwich> {
    Ok(NormSandwich {
        constrained: constrained_gradient_norm(u, mu, p)?,
        sampled: sampled_gradient_norm(u, mu, p, samples, rng)?,
        dual: j_dual_norm(u, mu, p)?,
        factor: 1.0 + u.h1_norm() / mu.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnRatio {
    /// `‖u‖^p_{L^p(G)}`
    pub lp: f64,
    /// `lp / (‖u‖_2^{p/2+1} ‖u'‖_2^{p/2−1})`
    pub ratio: f64,
}

pub fn gn_check(u: &GraphFunction, p: f64) -> Result<GnRatio> {
    check_exponent(p)?;
    let lp = u.mesh().lp_all(u.values(), p);
    let (m, g) = (u.mass(), u.gradient_sq());
    if !(m > 0.0) {
        return Err(Error::Degenerate("zero function has no Gagliardo–Nirenberg ratio".into()));
    }
    if !(g > 0.0) {
        return Err(Error::Degenerate("u' vanishes identically".into()));
    }
    Ok(GnRatio { lp, ratio: gn_ratio(lp, m, g, p) })
}

fn gn_ratio(lp: f64, mass: f64, grad_sq: f64, p: f64) -> f64 {
    lp / (mass.powf(0.25 * (p + 2.0)) * grad_sq.powf(0.25 * (p - 2.0)))
}

/// Gagliardo–Nirenberg ratio of `sech^q` on the line (scale invariant).
pub fn sech_gn_ratio(p: f64, q: f64) -> f64 {
    let mass = sech_moment(2.0 * q);
    let grad = q * q * (sech_moment(2.0 * q) - sech_moment(2.0 * q + 2.0));
    gn_ratio(sech_moment(p * q), mass, grad, p)
}

/// Line ratio attained by the soliton, the extremal sech power `2/(p−2)`.
pub fn line_gn_ratio(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(sech_gn_ratio(p, 2.0 / (p - 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublevelBound {
    pub h1_sq: f64,
    pub bound: f64,
}

impl SublevelBound {
    pub fn holds(&self) -> bool {
        self.h1_sq <= self.bound
    }
}

/// `‖u‖²_H ≤ μ + 4(E(u) + D)` where `D = max_X (B X^q − X²/4)`,
/// `B = C μ^{(p+2)/4}/p`, `q = p/2 − 1`, valid whenever `C` bounds the
/// Gagliardo–Nirenberg ratio of `u`.
pub fn sublevel_bound(u: &GraphFunction, mu: f64, p: f64, gn_constant: f64) -> Result<SublevelBound> {
    check_mass(u, mu)?;
    let e = energy(u, p)?.total;
    let b = gn_constant * mu.powf(0.25 * (p + 2.0)) / p;
    let q = 0.5 * p - 1.0;
    let x = (2.0 * q * b).powf(1.0 / (2.0 - q));
    let d = b * x.powf(q) - 0.25 * x * x;
    Ok(SublevelBound { h1_sq: u.gradient_sq() + u.mass(), bound: mu + 4.0 * (e + d) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
    /// Error over `‖J(u)‖_{H'}‖v‖_H`.
    pub rel_error: f64,
}

/// Compares `J(u)v` with the central difference of `E` along the retraction
/// `t ↦ √μ (u + tv)/‖u + tv‖` for a tangent `v`.
pub fn gradient_check(u: &GraphFunction, v: &GraphFunction, mu: f64, p: f64, eps: f64) -> Result<GradientCheck> {
    let analytic = j_apply(u, v, mu, p)?;
    let along = |t: f64| -> Result<f64> { Ok(energy(&u.plus_scaled(v, t)?.normalized(mu)?, p)?.total) };
    let finite_difference = (along(eps)? - along(-eps)?) / (2.0 * eps);
    let abs_error = (analytic - finite_difference).abs();
    let scale = j_dual_norm(u, mu, p)? * v.h1_norm();
    Ok(GradientCheck { analytic, finite_difference, abs_error, rel_error: abs_error / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MetricGraph;
    use crate::mesh::build_mesh;
    use crate::soliton::soliton_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    /// Soliton of mass `mu` centered on the middle edge of a three-edge path.
    fn soliton_on_path(p: f64, mu: f64, h: f64) -> GraphFunction {
        let g = Arc::new(MetricGraph::path(&[20.0]).unwrap());
        let mesh = build_mesh(g, h, 30.0).unwrap();
        let s = soliton_params(p, mu).unwrap();
        let f = GraphFunction::from_edge_fn(mesh, |e, x| match e {
            0 => s.value(10.0 + x),
            1 => s.value(x - 10.0),
            _ => s.value(10.0 + x),
        });
        f.normalized(mu).unwrap()
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let u = soliton_on_path(4.0, 1.0, 0.1).scaled(0.0);
        let e = energy(&u, 4.0).unwrap();
        assert_eq!((e.kinetic, e.potential, e.total, e.mass), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn soliton_energy_and_multiplier() {
        let u = soliton_on_path(4.0, 1.0, 0.01);
        let e = energy(&u, 4.0).unwrap();
        assert!((e.total + 1.0 / 96.0).abs() < 1e-4, "{}", e.total);
        assert!((e.total - (e.kinetic - e.potential)).abs() < 1e-15);
        let l = lambda_of(&u, 1.0, 4.0).unwrap();
        assert!((l - 0.0625).abs() < 1e-3, "{l}");
        assert!(matches!(lambda_of(&u, 1.1, 4.0), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn half_line_support_has_no_potential() {
        let g = Arc::new(MetricGraph::path(&[4.0]).unwrap());
        let mesh = build_mesh(g, 0.1, 20.0).unwrap();
        let u = GraphFunction::from_edge_fn(mesh, |e, x| if e == 0 { (x * (20.0 - x)).max(0.0) * 0.01 } else { 0.0 });
        let u = u.normalized(2.0).unwrap();
        let e = energy(&u, 4.0).unwrap();
        assert_eq!(e.potential, 0.0);
        assert_eq!(e.total, e.kinetic);
        let l = lambda_of(&u, 2.0, 4.0).unwrap();
        assert!((l + 2.0 * e.kinetic / 2.0).abs() < 1e-12);
    }

    #[test]
    fn j_annihilates_u_and_projection_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = soliton_on_path(3.0, 2.0, 0.05);
        let r = j_apply(&u, &u, 2.0, 3.0).unwrap();
        assert!(r.abs() < 1e-10 * u.gradient_sq(), "{r}");
        let v = random_function(&u, &mut rng);
        let pv = tangent_project(&u, &v, 2.0).unwrap();
        assert!(u.l2_dot(&pv).unwrap().abs() < 1e-10 * v.h1_norm());
        let ppv = tangent_project(&u, &pv, 2.0).unwrap();
        let diff = ppv.plus_scaled(&pv, -1.0).unwrap().sup_norm();
        assert!(diff < 1e-10 * pv.sup_norm());
        let zero = tangent_project(&u, &u, 2.0).unwrap();
        assert!(zero.sup_norm() < 1e-12 * u.sup_norm());
        let bound = (1.0 + u.h1_norm() / 2f64.sqrt()) * v.h1_norm();
        assert!(pv.h1_norm() <= bound);
    }

    #[test]
    fn norm_sandwich_off_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = soliton_on_path(4.0, 1.0, 0.05).scaled(1.0);
        let v = random_function(&u, &mut rng).scaled(0.02);
        let w = u.plus_scaled(&v, 1.0).unwrap().normalized(1.0).unwrap();
        let s = norm_sandwich(&w, 1.0, 4.0, 100, &mut rng).unwrap();
        assert!(s.dual > 0.0);
        assert!(s.holds(1e-10), "{s:?}");
    }

    #[test]
    fn soliton_is_the_extremal_sech_power() {
        for &p in &[3.0, 4.0, 5.0] {
            let s = 2.0 / (p - 2.0);
            let star = line_gn_ratio(p).unwrap();
            for k in 1..40 {
                let q = 0.1 * k as f64;
                assert!(sech_gn_ratio(p, q) <= star * (1.0 + 1e-12), "p={p} q={q}");
            }
            assert!(sech_gn_ratio(p, 1.01 * s) < star && sech_gn_ratio(p, 0.99 * s) < star);
        }
    }

    #[test]
    fn gn_of_discrete_soliton_is_near_extremal() {
        let u = soliton_on_path(4.0, 1.0, 0.02);
        let r = gn_check(&u, 4.0).unwrap();
        let star = line_gn_ratio(4.0).unwrap();
        assert!((r.ratio / star - 1.0).abs() < 1e-3, "{} vs {star}", r.ratio);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = soliton_on_path(4.0, 1.0, 0.05);
        let v = random_tangent(&u, 1.0, &mut rng).unwrap();
        let c = gradient_check(&u, &v, 1.0, 4.0, 1e-5).unwrap();
        assert!(c.rel_error < 1e-5, "{c:?}");
    }

    #[test]
    fn scaling_of_energy_terms() {
        let u = soliton_on_path(3.0, 1.0, 0.05);
        let a = energy(&u, 3.0).unwrap();
        let b = energy(&u.scaled(-2.0), 3.0).unwrap();
        assert!((b.kinetic - 4.0 * a.kinetic).abs() < 1e-13 * b.kinetic);
        assert!((b.lp_core - 8.0 * a.lp_core).abs() < 1e-13 * b.lp_core);
    }
}
