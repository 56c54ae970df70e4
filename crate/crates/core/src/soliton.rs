//! Solitons of the real-line NLS and their compactly supported cut-offs.
//!
//! For `2 < p < 6` the positive even solution of `u'' + |u|^{p-2}u = λu`
//! with `∫u² = μ` is `A sech^s(b x)` with `s = 2/(p−2)`,
//! `A^{p−2} = pλ/2` and `b = √λ / s`. All moments reduce to
//! `I(q) = ∫ sech^q = B(q/2, 1/2)`, so mass, kinetic term and the
//! `L^p` term are closed-form in `λ`, and the mass relation can be inverted
//! exactly for `λ`.

use std::f64::consts::{LN_2, PI};

use statrs::function::gamma::ln_gamma;

use crate::error::{check_exponent, Error, Result};
use crate::quadrature::integrate_pieces;

/// A real-line profile that can be sampled onto a mesh.
pub trait LineProfile: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Closed support, if bounded.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `∫_ℝ sech^q(t) dt = √π Γ(q/2) / Γ((q+1)/2)`.
pub fn sech_moment(q: f64) -> f64 {
    (0.5 * PI.ln() + ln_gamma(0.5 * q) - ln_gamma(0.5 * (q + 1.0))).exp()
}

/// `ln sech t`, accurate for every `t`.
fn ln_sech(t: f64) -> f64 {
    let a = t.abs();
    -a + LN_2 - (-2.0 * a).exp().ln_1p()
}

/// Constants of the soliton `φ_μ` for exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    pub p: f64,
    pub mu: f64,
    /// `2/(6−p)`
    pub alpha: f64,
    /// `(p−2)/(6−p)`
    pub beta: f64,
    /// `α/β = 2/(p−2)`, the sech power.
    pub power: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub lambda: f64,
    /// Amplitude at unit mass.
    pub unit_amplitude: f64,
    /// Rate at unit mass.
    pub unit_rate: f64,
}

impl SolitonParams {
    pub fn new(p: f64, mu: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mass {mu} must be positive")));
        }
        let s = 2.0 / (p - 2.0);
        let lambda_of = |m: f64| {
            // m = (p/2)^s · s · I(2s) · λ^{s − 1/2}
            let k = (0.5 * p).powf(s) * s * sech_moment(2.0 * s);
            (m / k).powf(1.0 / (s - 0.5))
        };
        let lambda = lambda_of(mu);
        let unit_lambda = lambda_of(1.0);
        let amp = |l: f64| (0.5 * p * l).powf(1.0 / (p - 2.0));
        Ok(Self {
            p,
            mu,
            alpha: 2.0 / (6.0 - p),
            beta: (p - 2.0) / (6.0 - p),
            power: s,
            amplitude: amp(lambda),
            rate: lambda.sqrt() / s,
            lambda,
            unit_amplitude: amp(unit_lambda),
            unit_rate: unit_lambda.sqrt() / s,
        })
    }

    /// Same exponent, different mass.
    pub fn with_mass(&self, mu: f64) -> Result<Self> {
        Self::new(self.p, mu)
    }

    fn sech_pow(&self, x: f64, k: f64) -> f64 {
        (k * ln_sech(self.rate * x)).exp()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * self.sech_pow(x, self.power)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -self.amplitude * self.power * self.rate * (self.rate * x).tanh() * self.sech_pow(x, self.power)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let t = (self.rate * x).tanh();
        let sech2 = self.sech_pow(x, 2.0);
        self.amplitude * self.power * self.rate * self.rate * self.sech_pow(x, self.power) * (self.power * t * t - sech2)
    }

    /// `½|φ'|² − (1/p)|φ|^p`.
    pub fn lagrangian(&self, x: f64) -> f64 {
        0.5 * self.derivative(x).powi(2) - self.value(x).powf(self.p) / self.p
    }

    /// `φ'' + |φ|^{p−2}φ − λφ`.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let v = self.value(x);
        self.second_derivative(x) + v.powf(self.p - 1.0) - self.lambda * v
    }

    /// Scale of the ODE terms, `λ·φ(0)`.
    pub fn ode_scale(&self) -> f64 {
        self.lambda * self.amplitude
    }

    /// Scale of the conservation terms, `λ·φ(0)²/2`.
    pub fn conservation_scale(&self) -> f64 {
        0.5 * self.lambda * self.amplitude * self.amplitude
    }

    /// `∫φ²`, closed form (equals `mu` up to rounding).
    pub fn mass(&self) -> f64 {
        self.amplitude * self.amplitude / self.rate * sech_moment(2.0 * self.power)
    }

    /// `∫|φ'|²`.
    pub fn gradient_sq(&self) -> f64 {
        let s = self.power;
        self.amplitude * self.amplitude * self.rate * s * s * sech_moment(2.0 * s) / (2.0 * s + 1.0)
    }

    /// `∫|φ|^p`.
    pub fn lp_integral(&self) -> f64 {
        let s = self.power;
        self.amplitude.powf(self.p) / self.rate * sech_moment(2.0 * s) * 2.0 * s / (2.0 * s + 1.0)
    }

    /// `ℰ(φ_μ) = ½∫|φ'|² − (1/p)∫|φ|^p`.
    pub fn energy(&self) -> f64 {
        0.5 * self.gradient_sq() - self.lp_integral() / self.p
    }

    /// The point `x_μ > 0` beyond which the Lagrangian density is
    /// nonnegative: `sech²(b x) = 1/2`.
    pub fn sign_point(&self) -> f64 {
        std::f64::consts::SQRT_2.acosh() / self.rate
    }

    /// CSV table `x,phi,dphi,lagrangian` on `n` equispaced points of `[a, b]`.
    pub fn table_csv(&self, a: f64, b: f64, n: usize) -> String {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let x = if n > 1 { a + (b - a) * i as f64 / (n - 1) as f64 } else { a };
                vec![x, self.value(x), self.derivative(x), self.lagrangian(x)]
            })
            .collect();
        crate::report::csv_table(&["x", "phi", "dphi", "lagrangian"], &rows)
    }

    /// Breakpoints on `[0, end]` at dyadic multiples of the width `1/b`.
    fn breakpoints(&self, end: f64) -> Vec<f64> {
        let mut pts = vec![0.0];
        let mut x = 0.25 / self.rate;
        while x < end {
            pts.push(x);
            x *= 2.0;
        }
        pts.push(end);
        pts
    }

    /// `∫_{−τ}^{τ} |φ|^q`.
    pub fn partial_moment(&self, tau: f64, q: f64) -> f64 {
        let pts = self.breakpoints(tau);
        2.0 * integrate_pieces(|x| self.value(x).powf(q), &pts, 0.0, 1e-14)
    }
}

impl LineProfile for SolitonParams {
    fn value(&self, x: f64) -> f64 {
        SolitonParams::value(self, x)
    }

    fn derivative(&self, x: f64) -> f64 {
        SolitonParams::derivative(self, x)
    }
}

pub fn soliton_params(p: f64, mu: f64) -> Result<SolitonParams> {
    SolitonParams::new(p, mu)
}

pub fn soliton_energy(params: &SolitonParams) -> f64 {
    params.energy()
}

/// `½|φ'|² + (1/p)|φ|^p − (λ/2)|φ|²` at `x`.
pub fn energy_conservation_residual(params: &SolitonParams, x: f64) -> f64 {
    let v = params.value(x);
    0.5 * params.derivative(x).powi(2) + v.powf(params.p) / params.p - 0.5 * params.lambda * v * v
}

pub fn sign_point(params: &SolitonParams) -> f64 {
    params.sign_point()
}

/// Certified energy excess `φ_μ(τ)·∫_{−τ}^{τ}|φ_μ|^{p−1}` of the cut-off at
/// `τ = ℓ/2`.
pub fn certified_gap(p: f64, mu: f64, ell: f64) -> Result<f64> {
    let sol = SolitonParams::new(p, mu)?;
    let tau = 0.5 * ell;
    Ok(sol.value(tau) * sol.partial_moment(tau, p - 1.0))
}

/// A soliton truncated at its level `φ_μ(ℓ/2)`, shifted to `[0, ℓ]` and
/// rescaled back to mass `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSoliton {
    pub soliton: SolitonParams,
    pub ell: f64,
    pub tau: f64,
    /// `φ_μ(τ)`
    pub level: f64,
    /// `√μ / ‖v_μ‖`
    pub scale: f64,
    /// `‖v_μ‖²`
    pub unscaled_mass: f64,
    /// `ℰ(v_μ)`
    pub unscaled_energy: f64,
    /// `∫|ψ'|²`
    pub gradient_sq: f64,
    /// `∫|ψ|^p`
    pub lp_integral: f64,
    /// `ℰ(ψ)`
    pub energy: f64,
    pub certified_gap: f64,
}

impl CutoffSoliton {
    /// Builds the cut-off without checking the mass threshold.
    pub fn construct(p: f64, mu: f64, ell: f64) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParameter(format!("support length {ell} must be positive")));
        }
        let soliton = SolitonParams::new(p, mu)?;
        let tau = 0.5 * ell;
        let level = soliton.value(tau);
        let pts = soliton.breakpoints(tau);
        let tol = 1e-14;
        let unscaled_mass = 2.0 * integrate_pieces(|x| (soliton.value(x) - level).powi(2), &pts, 0.0, tol);
        let grad = 2.0 * integrate_pieces(|x| soliton.derivative(x).powi(2), &pts, 0.0, tol);
        let lp = 2.0 * integrate_pieces(|x| (soliton.value(x) - level).max(0.0).powf(p), &pts, 0.0, tol);
        if !(unscaled_mass > 0.0) {
            return Err(Error::Degenerate("cut-off level swallows the whole profile".into()));
        }
        let scale = (mu / unscaled_mass).sqrt();
        let gradient_sq = scale * scale * grad;
        let lp_integral = scale.powf(p) * lp;
        Ok(Self {
            soliton,
            ell,
            tau,
            level,
            scale,
            unscaled_mass,
            unscaled_energy: 0.5 * grad - lp / p,
            gradient_sq,
            lp_integral,
            energy: 0.5 * gradient_sq - lp_integral / p,
            certified_gap: level * soliton.partial_moment(tau, p - 1.0),
        })
    }

    /// `ℰ(φ_μ) + certified_gap`.
    pub fn certified_bound(&self) -> f64 {
        self.soliton.energy() + self.certified_gap
    }

    pub fn mass(&self) -> f64 {
        self.scale * self.scale * self.unscaled_mass
    }
}

impl LineProfile for CutoffSoliton {
    fn value(&self, x: f64) -> f64 {
        if !(0.0..=self.ell).contains(&x) {
            return 0.0;
        }
        self.scale * (self.soliton.value(x - self.tau) - self.level).max(0.0)
    }

    fn derivative(&self, x: f64) -> f64 {
        if !(0.0..=self.ell).contains(&x) {
            return 0.0;
        }
        self.scale * self.soliton.derivative(x - self.tau)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((0.0, self.ell))
    }
}

/// Cut-off soliton of mass `mu` supported in `[0, ell]`, valid when
/// `x_μ ≤ ℓ/2` and `ℰ(φ_μ) + certified_gap < 0`.
pub fn cutoff_soliton(p: f64, mu: f64, ell: f64) -> Result<CutoffSoliton> {
    let c = CutoffSoliton::construct(p, mu, ell)?;
    let x_mu = c.soliton.sign_point();
    if x_mu > c.tau {
        return Err(Error::BelowThreshold {
            mu,
            threshold: mass_threshold(p, ell)?,
            reason: format!("sign point {x_mu} exceeds half the support {}", c.tau),
        });
    }
    if !(c.certified_bound() < 0.0) {
        return Err(Error::BelowThreshold {
            mu,
            threshold: mass_threshold(p, ell)?,
            reason: format!("certified bound {} is not negative", c.certified_bound()),
        });
    }
    Ok(c)
}

/// Smallest mass from which on the cut-off of support `ell` is certified.
///
/// In the variable `y = (ℓ/2) μ^β` both conditions are mass-free:
/// `y ≥ x_1` and `g(y) = φ_1(y)∫_{−y}^{y}φ_1^{p−1} < |ℰ(φ_1)|`. The last
/// crossing of `g` is bracketed on a grid and bisected.
pub fn mass_threshold(p: f64, ell: f64) -> Result<f64> {
    if !(ell.is_finite() && ell > 0.0) {
        return Err(Error::InvalidParameter(format!("support length {ell} must be positive")));
    }
    let unit = SolitonParams::new(p, 1.0)?;
    let level = -unit.energy();
    let x1 = unit.sign_point();
    let g = |y: f64| unit.value(y) * unit.partial_moment(y, p - 1.0);

    let mut y_hi = x1.max(1.0 / unit.rate);
    for _ in 0..200 {
        if g(y_hi) < 1e-3 * level && g(1.01 * y_hi) < g(y_hi) {
            break;
        }
        y_hi *= 1.5;
    }
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| x1 + (y_hi - x1) * i as f64 / n as f64).collect();
    let last_bad = grid.iter().rposition(|&y| g(y) >= level);
    let y_star = match last_bad {
        None => x1,
        Some(i) if i == n => return Err(Error::Degenerate("threshold search did not bracket".into())),
        Some(i) => {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            while hi - lo > 1e-13 * hi {
                let mid = 0.5 * (lo + hi);
                if g(mid) >= level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    let tau = 0.5 * ell;
    Ok((y_star / tau).powf(1.0 / unit.beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn quad(f: impl Fn(f64) -> f64, half_width: f64) -> f64 {
        integrate(f, -half_width, half_width, 0.0, 1e-13)
    }

    #[test]
    fn quartic_unit_soliton_constants() {
        let s = soliton_params(4.0, 1.0).unwrap();
        assert!((s.lambda - 1.0 / 16.0).abs() < 1e-14);
        assert!((s.amplitude - 2f64.sqrt() / 4.0).abs() < 1e-14);
        assert!((s.rate - 0.25).abs() < 1e-14);
        assert!((s.energy() + 1.0 / 96.0).abs() < 1e-15);
        assert!((s.sign_point() - 4.0 * 2f64.sqrt().acosh()).abs() < 1e-12);
    }

    #[test]
    fn moments_match_quadrature() {
        for &p in &[2.5, 3.0, 4.0, 5.0] {
            for &mu in &[1.0, 2.0, 10.0] {
                let s = soliton_params(p, mu).unwrap();
                let w = 60.0 / s.rate;
                let mass = quad(|x| s.value(x).powi(2), w);
                let grad = quad(|x| s.derivative(x).powi(2), w);
                let lp = quad(|x| s.value(x).powf(p), w);
                assert!((mass - mu).abs() < 1e-10 * mu, "p={p} mu={mu}: {mass}");
                assert!((grad - s.gradient_sq()).abs() < 1e-10 * grad);
                assert!((lp - s.lp_integral()).abs() < 1e-10 * lp);
            }
        }
    }

    #[test]
    fn multiplier_scales_with_mass() {
        let s = soliton_params(4.0, 10.0).unwrap();
        assert!((s.lambda - 6.25).abs() < 1e-12);
        for &p in &[2.5, 3.0, 5.0] {
            let one = soliton_params(p, 1.0).unwrap();
            let two = soliton_params(p, 2.0).unwrap();
            assert!((two.lambda / one.lambda - 2f64.powf(2.0 * one.beta)).abs() < 1e-12);
            assert!((2.0 * one.alpha + 2.0 * one.beta - one.alpha * p).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_scaling_for_cubic() {
        let e1 = soliton_params(3.0, 1.0).unwrap();
        let e2 = soliton_params(3.0, 2.0).unwrap();
        let direct = quad(|x| 0.5 * e2.derivative(x).powi(2) - e2.value(x).powi(3) / 3.0, 80.0 / e2.rate);
        assert!((e2.energy() / e1.energy() - 2f64.powf(5.0 / 3.0)).abs() < 1e-12);
        assert!((direct - e2.energy()).abs() < 1e-10 * e2.energy().abs());
    }

    #[test]
    fn conservation_at_peak_and_tail() {
        let s = soliton_params(4.0, 1.0).unwrap();
        assert!(energy_conservation_residual(&s, 0.0).abs() < 1e-17);
        assert!(energy_conservation_residual(&s, 3.0).abs() < 1e-10);
        let s = soliton_params(2.5, 5.0).unwrap();
        let worst = (0..100)
            .map(|i| energy_conservation_residual(&s, -20.0 + 0.4 * i as f64).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9 * s.conservation_scale().max(1.0), "{worst}");
    }

    #[test]
    fn sign_point_by_bisection() {
        let s = soliton_params(4.0, 1.0).unwrap();
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if s.lagrangian(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((hi - s.sign_point()).abs() < 1e-10);
        assert!(s.lagrangian(0.0) < 0.0);
        let ten = soliton_params(4.0, 10.0).unwrap();
        assert!((ten.sign_point() - s.sign_point() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_profile_properties() {
        let c = cutoff_soliton(4.0, 20.0, 4.0).unwrap();
        assert!((c.mass() - 20.0).abs() < 1e-10 * 20.0);
        assert_eq!(c.value(0.0), 0.0);
        assert!(c.value(4.0).abs() < 1e-12);
        assert!(c.value(-0.1) == 0.0 && c.value(4.1) == 0.0);
        assert!((0..=400).all(|i| c.value(i as f64 * 0.01) >= 0.0));
        // direct quadrature of ψ
        let mass = integrate(|x| c.value(x).powi(2), 0.0, 4.0, 0.0, 1e-13);
        let energy = integrate(|x| 0.5 * c.derivative(x).powi(2) - c.value(x).powi(4) / 4.0, 0.0, 4.0, 0.0, 1e-13);
        assert!((mass - 20.0).abs() < 1e-9);
        assert!((energy - c.energy).abs() < 1e-9 * c.energy.abs());
        assert!(c.energy < 0.0);
        assert!(c.energy - c.soliton.energy() <= c.certified_gap);
        assert!(c.energy <= c.unscaled_energy);
    }

    #[test]
    fn gap_decreases_in_mass() {
        let gaps: Vec<f64> = [20.0, 40.0, 80.0].iter().map(|&m| certified_gap(4.0, m, 4.0).unwrap()).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn threshold_brackets_success() {
        let t = mass_threshold(4.0, 4.0).unwrap();
        let x1 = soliton_params(4.0, 1.0).unwrap().sign_point();
        assert!(t >= x1 / 2.0 - 1e-12, "{t}");
        assert!(cutoff_soliton(4.0, 1.01 * t, 4.0).is_ok());
        assert!(matches!(cutoff_soliton(4.0, 0.5 * t, 4.0), Err(Error::BelowThreshold { .. })));
        let t8 = mass_threshold(4.0, 8.0).unwrap();
        assert!(t8 < t);
        for &p in &[2.5, 3.0, 5.0] {
            let t = mass_threshold(p, 2.0).unwrap();
            assert!(cutoff_soliton(p, 1.01 * t, 2.0).is_ok(), "p={p}");
            assert!(cutoff_soliton(p, 0.5 * t, 2.0).is_err(), "p={p}");
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(matches!(soliton_params(7.0, 1.0), Err(Error::ExponentOutOfRange(_))));
        assert!(matches!(soliton_params(2.0, 1.0), Err(Error::ExponentOutOfRange(_))));
    }
}
