//! Time-scaling functions of a pinch — ν, ω, α, β and their log-derivatives
//! — plus the algebraic helpers `û`, `Q`, and the interpolating power
//! `x^{a,b}` used throughout the barrier estimates.

use crate::pinch::{ModelPinch, PinchError};

/// `x^{a,b} = x^a (1+x)^{b-a}`: behaves like `x^a` near 0 and `x^b` at
/// infinity.
pub fn sigma_pow(x: f64, a: f64, b: f64) -> f64 {
    if x == 0.0 {
        return if a == 0.0 {
            1.0
        } else if a > 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    x.powf(a) * (1.0 + x).powf(b - a)
}

/// `û(u, t) = u + μt`, the characteristic coordinate of the frozen-reaction
/// dynamics.
pub fn hat_u(u: f64, t: f64, mu: f64) -> f64 {
    u + mu * t
}

/// `Q(u, t) = û/u >= 1` for t >= 0.
pub fn q_factor(u: f64, t: f64, mu: f64) -> f64 {
    hat_u(u, t, mu) / u
}

/// Log-derivative `t^k f^(k)(t)/f(t)` by centered differences with relative
/// step 1e-4, for functions without an analytic oracle.
pub fn log_deriv_fd<F: Fn(f64) -> f64>(f: F, k: u8, t: f64) -> Result<f64, PinchError> {
    let ft = f(t);
    if ft.abs() < 1e-13 {
        return Err(PinchError::DivisionByZero(ft));
    }
    let h = t * 1e-4;
    match k {
        1 => Ok(t * (f(t + h) - f(t - h)) / (2.0 * h) / ft),
        2 => Ok(t * t * (f(t + h) - 2.0 * ft + f(t - h)) / (h * h) / ft),
        _ => panic!("log_deriv_fd supports k = 1, 2"),
    }
}

/// Time-scale evaluations for one pinch. All functions reject t <= 0: the
/// singular time is approached only through positive t.
pub struct ScaleContext<'a> {
    pub pinch: &'a ModelPinch,
}

impl<'a> ScaleContext<'a> {
    pub fn new(pinch: &'a ModelPinch) -> Self {
        ScaleContext { pinch }
    }

    pub fn mu(&self) -> f64 {
        self.pinch.mu()
    }

    fn arg(&self, t: f64) -> Result<f64, PinchError> {
        if t <= 0.0 {
            return Err(PinchError::NonPositiveTime(t));
        }
        Ok(self.mu() * t)
    }

    /// `ν(t) = V₀(μt)`.
    pub fn nu(&self, t: f64) -> Result<f64, PinchError> {
        self.pinch.v0.eval(self.arg(t)?)
    }

    /// `ν'(t) = μ V₀'(μt)`.
    pub fn nu_dt(&self, t: f64) -> Result<f64, PinchError> {
        Ok(self.mu() * self.pinch.v0.d1(self.arg(t)?)?)
    }

    /// `ν''(t)`.
    pub fn nu_dt2(&self, t: f64) -> Result<f64, PinchError> {
        let mu = self.mu();
        Ok(mu * mu * self.pinch.v0.d2(self.arg(t)?)?)
    }

    /// `⟨ν⟩₁ = t ν'/ν`.
    pub fn nu_log1(&self, t: f64) -> Result<f64, PinchError> {
        let nu = self.nu(t)?;
        if nu.abs() < 1e-13 {
            return Err(PinchError::DivisionByZero(nu));
        }
        Ok(t * self.nu_dt(t)? / nu)
    }

    /// `ω(t) = W₀(μt)`.
    pub fn omega(&self, t: f64) -> Result<f64, PinchError> {
        self.pinch.w0()?.eval(self.arg(t)?)
    }

    pub fn omega_dt(&self, t: f64) -> Result<f64, PinchError> {
        Ok(self.mu() * self.pinch.w0()?.d1(self.arg(t)?)?)
    }

    pub fn omega_dt2(&self, t: f64) -> Result<f64, PinchError> {
        let mu = self.mu();
        Ok(mu * mu * self.pinch.w0()?.d2(self.arg(t)?)?)
    }

    /// `⟨ω⟩₁ = t ω'/ω`.
    pub fn omega_log1(&self, t: f64) -> Result<f64, PinchError> {
        let om = self.omega(t)?;
        if om.abs() < 1e-13 {
            return Err(PinchError::DivisionByZero(om));
        }
        Ok(t * self.omega_dt(t)? / om)
    }

    /// `α(t) = t ν(t)`, the tip distance-squared scale.
    pub fn alpha(&self, t: f64) -> Result<f64, PinchError> {
        Ok(t * self.nu(t)?)
    }

    /// `β = α' = (1 + ⟨ν⟩₁) ν`.
    pub fn beta(&self, t: f64) -> Result<f64, PinchError> {
        Ok(self.nu(t)? + t * self.nu_dt(t)?)
    }

    /// `β'(t) = 2ν' + tν''`.
    pub fn beta_dt(&self, t: f64) -> Result<f64, PinchError> {
        Ok(2.0 * self.nu_dt(t)? + t * self.nu_dt2(t)?)
    }

    /// `(log ω)_θ = α ∂_t log ω = ν ⟨ω⟩₁`.
    pub fn log_omega_theta(&self, t: f64) -> Result<f64, PinchError> {
        Ok(self.nu(t)? * self.omega_log1(t)?)
    }

    /// `∂_t (log ω)_θ`, for the analytic path of time derivatives of the
    /// tip barriers.
    pub fn log_omega_theta_dt(&self, t: f64) -> Result<f64, PinchError> {
        let om = self.omega(t)?;
        let om1 = self.omega_dt(t)?;
        let om2 = self.omega_dt2(t)?;
        // d/dt [ t ν ω'/ω ].
        let nu = self.nu(t)?;
        let nud = self.nu_dt(t)?;
        Ok(nu * om1 / om + t * nud * om1 / om + t * nu * (om2 / om - om1 * om1 / (om * om)))
    }

    /// `σ = u / α(t)`.
    pub fn sigma(&self, u: f64, t: f64) -> Result<f64, PinchError> {
        Ok(u / self.alpha(t)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pinch::{builtin, ModelPinch, Profile};

    fn poly_pinch() -> ModelPinch {
        ModelPinch {
            name: "poly".into(),
            q: 2,
            p: 1,
            mu_f: 0.0,
            fiber_flat: true,
            lambda_ratio: 0.0,
            v0: Profile::power(1.0, 1.0),
            w0: Some(Profile::power(2.0, 1.0)),
            u_star_hint: 0.05,
        }
    }

    #[test]
    fn polynomial_scales() {
        // V₀(u) = u, μ = 2: ν(0.1) = 0.2, α = 0.02, ⟨ν⟩₁ = 1, β = 0.4.
        let p = poly_pinch();
        let sc = p.scales();
        assert!((sc.nu(0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!((sc.alpha(0.1).unwrap() - 0.02).abs() < 1e-15);
        assert!((sc.nu_log1(0.1).unwrap() - 1.0).abs() < 1e-13);
        assert!((sc.beta(0.1).unwrap() - 0.4).abs() < 1e-14);
        // W₀(u) = 2u: ω(0.1) = 0.4.
        assert!((sc.omega(0.1).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_profile_beta_equals_nu() {
        let mut p = poly_pinch();
        p.v0 = Profile::constant(0.37);
        let sc = p.scales();
        assert!((sc.beta(0.2).unwrap() - 0.37).abs() < 1e-15);
        assert!((sc.nu_log1(0.2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn nu_decreases_to_zero_for_log_profile() {
        let p = builtin("ak-neckpinch").unwrap();
        let sc = p.scales();
        let mut prev = f64::INFINITY;
        for &t in &[1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
            let nu = sc.nu(t).unwrap();
            assert!(nu > 0.0 && nu < prev);
            prev = nu;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn nu_value_cross_checked_against_alternative_form() {
        // ν(0.05) with μ = 2 is 1/ln(e + 10); compare against an ln1p-based
        // evaluation as an independent route.
        let p = builtin("ak-neckpinch").unwrap();
        let nu = p.scales().nu(0.05).unwrap();
        let alt = 1.0 / (1.0 + (10.0 / std::f64::consts::E).ln_1p());
        assert!((nu - alt).abs() < 1e-14, "{nu} vs {alt}");
    }

    #[test]
    fn rejects_nonpositive_time() {
        let p = builtin("ak-neckpinch").unwrap();
        assert!(p.scales().nu(0.0).is_err());
        assert!(p.scales().nu(-1e-3).is_err());
    }

    #[test]
    fn hat_u_and_q_examples() {
        assert!((hat_u(0.3, 0.1, 2.0) - 0.5).abs() < 1e-15);
        assert!((q_factor(0.3, 0.1, 2.0) - 5.0 / 3.0).abs() < 1e-15);
        assert!((hat_u(0.3, 0.0, 2.0) - 0.3).abs() < 1e-15);
        assert!((q_factor(0.3, 0.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((q_factor(1e9, 0.1, 2.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn q_times_u_is_hat_u() {
        for &(u, t) in &[(0.1, 0.01), (2e-4, 3e-5), (0.9, 0.2)] {
            let q = q_factor(u, t, 2.0);
            assert!((q * u - hat_u(u, t, 2.0)).abs() < 1e-15 * (1.0 + u));
        }
    }

    #[test]
    fn sigma_pow_examples_and_limits() {
        assert!((sigma_pow(1.0, 1.0, -1.0) - 0.25).abs() < 1e-15);
        assert!((sigma_pow(0.37, 0.0, 0.0) - 1.0).abs() < 1e-15);
        // x = 100: x (1+x)^{-2} = 100/101² ≈ 9.803e-3.
        assert!((sigma_pow(100.0, 1.0, -1.0) - 100.0 / (101.0 * 101.0)).abs() < 1e-15);
        // near-0 and near-∞ power behavior within 1e-4 relative.
        for &(a, b) in &[(1.0, -1.0), (0.5, 2.0), (0.0, 1.0)] {
            let xs = 1e-6;
            assert!((sigma_pow(xs, a, b) / xs.powf(a) - 1.0).abs() < 1e-4);
            let xl = 1e6;
            assert!((sigma_pow(xl, a, b) / xl.powf(b) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn fd_log_deriv_matches_analytic_for_log_profile() {
        let p = builtin("ak-neckpinch").unwrap();
        let sc = p.scales();
        let t = 0.01;
        let fd = log_deriv_fd(|s| sc.nu(s).unwrap(), 1, t).unwrap();
        let analytic = sc.nu_log1(t).unwrap();
        assert!((fd - analytic).abs() < 1e-7, "{fd} vs {analytic}");
    }

    #[test]
    fn power_law_log_deriv_constant_in_time() {
        let mut p = poly_pinch();
        p.v0 = Profile::power(3.0, 0.8);
        let sc = p.scales();
        for &t in &[1e-6, 1e-4, 1e-2, 0.3] {
            assert!((sc.nu_log1(t).unwrap() - 0.8).abs() < 1e-8);
        }
    }
}
