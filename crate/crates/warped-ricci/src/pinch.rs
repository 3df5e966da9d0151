//! Pinch initial data: the profile function library, validators for the
//! pinch conditions, and the productish / tip approximate solutions built
//! from a profile pair (V₀, W₀).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bryant::BryantTables;
use crate::numeric::loglog_slope;
use crate::scales::ScaleContext;

#[derive(Debug, Error)]
pub enum PinchError {
    #[error("argument u = {u} outside profile domain (0, {u_max}]")]
    Domain { u: f64, u_max: f64 },
    #[error("time t = {0} must be positive")]
    NonPositiveTime(f64),
    #[error("profile value |f| = {0} too small for a log-derivative")]
    DivisionByZero(f64),
    #[error("pinch has no fiber profile (p = 0)")]
    NoFiber,
    #[error("unknown builtin pinch `{0}`")]
    UnknownBuiltin(String),
    #[error("bad profile spec `{0}`")]
    BadSpec(String),
}

/// Named profile families. All carry analytic first and second derivatives;
/// the pinch conditions control exactly two derivatives, so nothing higher
/// is ever needed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum ProfileSpec {
    /// `c / log(e + 1/u)^k` — the neckpinch-type profile (k = 1 usually).
    PowerLog { c: f64, gamma: f64, log_exp: f64 },
    /// `c · u^gamma`.
    Power { c: f64, gamma: f64 },
    /// Constant `c`.
    Constant { c: f64 },
}

/// A profile function on `(0, u_max]` with derivative oracles.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Profile {
    pub spec: ProfileSpec,
    pub u_max: f64,
}

impl Profile {
    pub fn new(spec: ProfileSpec) -> Self {
        Profile { spec, u_max: 1.0 }
    }

    /// `c / log(e + 1/u)` with coefficient `a`.
    pub fn log_type(a: f64) -> Self {
        Profile::new(ProfileSpec::PowerLog {
            c: a,
            gamma: 0.0,
            log_exp: 1.0,
        })
    }

    pub fn power(c: f64, gamma: f64) -> Self {
        Profile::new(ProfileSpec::Power { c, gamma })
    }

    pub fn constant(c: f64) -> Self {
        Profile::new(ProfileSpec::Constant { c })
    }

    fn check_domain(&self, u: f64) -> Result<(), PinchError> {
        if u > 0.0 && u <= self.u_max {
            Ok(())
        } else {
            Err(PinchError::Domain {
                u,
                u_max: self.u_max,
            })
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64, PinchError> {
        self.check_domain(u)?;
        Ok(self.eval_unchecked(u))
    }

    pub fn eval_unchecked(&self, u: f64) -> f64 {
        match self.spec {
            ProfileSpec::PowerLog { c, gamma, log_exp } => {
                let g = (std::f64::consts::E + 1.0 / u).ln();
                c * u.powf(gamma) * g.powf(-log_exp)
            }
            ProfileSpec::Power { c, gamma } => c * u.powf(gamma),
            ProfileSpec::Constant { c } => c,
        }
    }

    /// First derivative in `u`.
    pub fn d1(&self, u: f64) -> Result<f64, PinchError> {
        self.check_domain(u)?;
        Ok(self.d1_unchecked(u))
    }

    pub fn d1_unchecked(&self, u: f64) -> f64 {
        match self.spec {
            ProfileSpec::PowerLog { gamma, log_exp, .. } => {
                // V = c u^γ g^{-k}, g = ln(e + 1/u), so V'/V = γ/u + k/(u² h g)
                // with h = e + 1/u.
                let h = std::f64::consts::E + 1.0 / u;
                let g = h.ln();
                let a = gamma / u + log_exp / (u * u * h * g);
                self.eval_unchecked(u) * a
            }
            ProfileSpec::Power { c, gamma } => c * gamma * u.powf(gamma - 1.0),
            ProfileSpec::Constant { .. } => 0.0,
        }
    }

    /// Second derivative in `u`.
    pub fn d2(&self, u: f64) -> Result<f64, PinchError> {
        self.check_domain(u)?;
        Ok(self.d2_unchecked(u))
    }

    pub fn d2_unchecked(&self, u: f64) -> f64 {
        match self.spec {
            ProfileSpec::PowerLog { gamma, log_exp, .. } => {
                // V'' = V (A² + A') with A = γ/u + k/(u²hg),
                // d/du (u²hg) = 2uhg - g - 1.
                let h = std::f64::consts::E + 1.0 / u;
                let g = h.ln();
                let uuhg = u * u * h * g;
                let a = gamma / u + log_exp / uuhg;
                let da = -gamma / (u * u) - log_exp * (2.0 * u * h * g - g - 1.0) / (uuhg * uuhg);
                self.eval_unchecked(u) * (a * a + da)
            }
            ProfileSpec::Power { c, gamma } => c * gamma * (gamma - 1.0) * u.powf(gamma - 2.0),
            ProfileSpec::Constant { .. } => 0.0,
        }
    }

    /// Scale-invariant log-derivative `u^k f^(k)(u) / f(u)` for k = 1, 2.
    pub fn log_deriv(&self, k: u8, u: f64) -> Result<f64, PinchError> {
        let f = self.eval(u)?;
        if f.abs() < 1e-13 {
            return Err(PinchError::DivisionByZero(f));
        }
        match k {
            1 => Ok(u * self.d1_unchecked(u) / f),
            2 => Ok(u * u * self.d2_unchecked(u) / f),
            _ => panic!("log_deriv supports k = 1, 2"),
        }
    }

    /// Parse `"log a"`, `"power c gamma"`, `"powerlog c gamma k"`,
    /// `"constant c"`.
    pub fn parse(s: &str) -> Result<Self, PinchError> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let bad = || PinchError::BadSpec(s.to_string());
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        match toks.as_slice() {
            ["log", a] => Ok(Profile::log_type(num(a)?)),
            ["power", c, g] => Ok(Profile::power(num(c)?, num(g)?)),
            ["powerlog", c, g, k] => Ok(Profile::new(ProfileSpec::PowerLog {
                c: num(c)?,
                gamma: num(g)?,
                log_exp: num(k)?,
            })),
            ["constant", c] => Ok(Profile::constant(num(c)?)),
            _ => Err(bad()),
        }
    }
}

/// Singular doubly-warped initial data `du²/(uV₀) + u g_{S^q} + W₀ g_F`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelPinch {
    pub name: String,
    /// Sphere dimension, `q >= 2`.
    pub q: u32,
    /// Fiber dimension, `p >= 0`; `p = 0` means singly warped.
    pub p: u32,
    /// Fiber Einstein constant: `2 Rc[g_F] = mu_f g_F`.
    pub mu_f: f64,
    /// Whether the fiber metric is flat (used by the permissibility checks).
    pub fiber_flat: bool,
    /// `Λ_F / Λ_{S^q}` for the curvature-operator permissibility check.
    pub lambda_ratio: f64,
    pub v0: Profile,
    pub w0: Option<Profile>,
    pub u_star_hint: f64,
}

impl ModelPinch {
    /// `μ = 2(q-1)`, the sphere reaction constant.
    pub fn mu(&self) -> f64 {
        2.0 * (self.q as f64 - 1.0)
    }

    pub fn w0(&self) -> Result<&Profile, PinchError> {
        self.w0.as_ref().ok_or(PinchError::NoFiber)
    }

    pub fn scales(&self) -> ScaleContext<'_> {
        ScaleContext::new(self)
    }
}

/// The built-in pinch library.
pub fn builtin_profiles() -> Vec<ModelPinch> {
    let mut out = Vec::new();
    // Singly warped neckpinch: V₀ = 1/log(e + 1/u).
    out.push(ModelPinch {
        name: "ak-neckpinch".into(),
        q: 2,
        p: 0,
        mu_f: 0.0,
        fiber_flat: true,
        lambda_ratio: 0.0,
        v0: Profile::log_type(1.0),
        w0: None,
        u_star_hint: 0.05,
    });
    // Degenerate profiles from φ = s^{β_k}, β_k = 2/(2k+1):
    // v = 4 φ_s² = 4 β² s^{2β-2} = 4 β² u^{(β-1)/β}.
    for k in 1..=2u32 {
        let beta = 2.0 / (2.0 * k as f64 + 1.0);
        let gamma = (beta - 1.0) / beta;
        out.push(ModelPinch {
            name: format!("degenerate-{k}"),
            q: 2,
            p: 0,
            mu_f: 0.0,
            fiber_flat: true,
            lambda_ratio: 0.0,
            v0: Profile::power(4.0 * beta * beta, gamma),
            w0: None,
            u_star_hint: 0.05,
        });
    }
    // Doubly warped pinch over a flat S¹ fiber.
    out.push(ModelPinch {
        name: "pancake".into(),
        q: 2,
        p: 1,
        mu_f: 0.0,
        fiber_flat: true,
        lambda_ratio: 0.0,
        v0: Profile::log_type(1.0),
        w0: Some(Profile::power(1.0, 1.0)),
        u_star_hint: 0.05,
    });
    out
}

pub fn builtin(name: &str) -> Result<ModelPinch, PinchError> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| PinchError::UnknownBuiltin(name.to_string()))
}

/// Per-condition validation outcome with the measured constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub name: String,
    /// V₀ decreases to zero as u does.
    pub neck_decays: bool,
    /// Fiber size bound when mu_f > 0; `None` when not applicable.
    pub fiber_size_ok: Option<bool>,
    pub fiber_margin: Option<f64>,
    /// Two-derivative control |uV₀'| + |u²V₀''| <= C V₀ (and for W₀).
    pub derivatives_controlled: bool,
    pub derivative_cap: f64,
    /// Positivity and boundedness away from the singular end.
    pub positive_bounded: bool,
    /// Curvature-operator size bound; `None` when lambda_ratio <= 0.
    pub operator_norm_ok: Option<bool>,
    /// W₀/(uV₀) → ∞ when the fiber is flat with mu_f = 0.
    pub flat_fiber_dominates: Option<bool>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.neck_decays
            && self.fiber_size_ok.unwrap_or(true)
            && self.derivatives_controlled
            && self.positive_bounded
            && self.operator_norm_ok.unwrap_or(true)
            && self.flat_fiber_dominates.unwrap_or(true)
    }
}

/// Check the pinch conditions on a log-spaced grid. The conditions are
/// asymptotic statements near u = 0, so the measured constants are trend
/// fits rather than pointwise assertions.
pub fn validate_model_pinch(pinch: &ModelPinch, u_grid: &[f64]) -> ValidationReport {
    assert!(u_grid.len() >= 8, "need a reasonable sample of (0, u_max]");
    let v0: Vec<f64> = u_grid.iter().map(|&u| pinch.v0.eval_unchecked(u)).collect();

    // MP1: monotone decrease toward zero as u ↓ 0.
    let monotone = v0.windows(2).all(|w| w[0] <= w[1] + 1e-14);
    let neck_decays = monotone && v0[0] < 0.9 * v0[v0.len() - 1] && v0[0] > 0.0;

    // MP3: measured cap on (|uV₀'| + |u²V₀''|)/V₀ plus a trend test; the
    // condition fails if the ratio grows as u ↓ 0.
    let mut cap: f64 = 0.0;
    let mut ratios = Vec::new();
    for &u in u_grid {
        let mut r = (u * pinch.v0.d1_unchecked(u)).abs() + (u * u * pinch.v0.d2_unchecked(u)).abs();
        let mut denom = pinch.v0.eval_unchecked(u);
        if let Some(w0) = &pinch.w0 {
            r += ((u * w0.d1_unchecked(u)).abs() + (u * u * w0.d2_unchecked(u)).abs())
                / w0.eval_unchecked(u)
                * denom;
            denom *= 1.0;
        }
        let ratio = r / denom;
        cap = cap.max(ratio);
        ratios.push(ratio.max(1e-300));
    }
    let trend = loglog_slope(u_grid, &ratios);
    // Growth toward u ↓ 0 shows up as a negative slope in log u.
    let derivatives_controlled = trend > -0.05 && cap.is_finite();

    // MP4: positive, smooth away from zero, and V₀ bounded.
    let positive = v0.iter().all(|&v| v > 0.0)
        && pinch
            .w0
            .as_ref()
            .map(|w| u_grid.iter().all(|&u| w.eval_unchecked(u) > 0.0))
            .unwrap_or(true);
    let bounded = v0[0] <= 2.0 * v0[v0.len() - 1] + 1e-12;
    let positive_bounded = positive && bounded;

    // MP2: W₀(u)/u >= (1+c) mu_f/mu for a positive measured c.
    let (fiber_size_ok, fiber_margin) = if pinch.mu_f > 0.0 {
        let w0 = pinch.w0.as_ref().expect("mu_f > 0 requires a fiber");
        let c = u_grid
            .iter()
            .map(|&u| w0.eval_unchecked(u) / u * pinch.mu() / pinch.mu_f - 1.0)
            .fold(f64::INFINITY, f64::min);
        (Some(c > 0.0), Some(c))
    } else {
        (None, None)
    };

    // RP1: W₀/u >= Λ_F/Λ_{S^q} when the fiber operator norm is positive.
    let operator_norm_ok = if pinch.lambda_ratio > 0.0 {
        let w0 = pinch
            .w0
            .as_ref()
            .expect("lambda_ratio > 0 requires a fiber");
        Some(
            u_grid
                .iter()
                .all(|&u| w0.eval_unchecked(u) / u >= pinch.lambda_ratio - 1e-12),
        )
    } else {
        None
    };

    // RP2: flat fiber with mu_f = 0 needs W₀/(uV₀) → ∞.
    let flat_fiber_dominates = if pinch.mu_f == 0.0 && pinch.fiber_flat && pinch.p > 0 {
        let w0 = pinch.w0.as_ref().unwrap();
        let r: Vec<f64> = u_grid
            .iter()
            .map(|&u| w0.eval_unchecked(u) / (u * pinch.v0.eval_unchecked(u)))
            .collect();
        let growing = r.windows(2).all(|w| w[0] >= w[1] - 1e-12);
        Some(growing && r[0] > 2.0 * r[r.len() - 1])
    } else {
        None
    };

    ValidationReport {
        name: pinch.name.clone(),
        neck_decays,
        fiber_size_ok,
        fiber_margin,
        derivatives_controlled,
        derivative_cap: cap,
        positive_bounded,
        operator_norm_ok,
        flat_fiber_dominates,
    }
}

/// Productish approximation for v: `(u+μt)/u · V₀(u+μt)`.
pub fn v_prish(u: f64, t: f64, pinch: &ModelPinch) -> Result<f64, PinchError> {
    if t < 0.0 {
        return Err(PinchError::NonPositiveTime(t));
    }
    let mu = pinch.mu();
    let hat = u + mu * t;
    Ok(hat / u * pinch.v0.eval(hat)?)
}

/// Productish approximation for the shifted fiber size `ŵ = w + μ_F t`.
pub fn w_hat_prish(u: f64, t: f64, pinch: &ModelPinch) -> Result<f64, PinchError> {
    if t < 0.0 {
        return Err(PinchError::NonPositiveTime(t));
    }
    pinch.w0()?.eval(u + pinch.mu() * t)
}

/// Productish approximation for w: `W₀(u+μt) − μ_F t`.
pub fn w_prish(u: f64, t: f64, pinch: &ModelPinch) -> Result<f64, PinchError> {
    Ok(w_hat_prish(u, t, pinch)? - pinch.mu_f * t)
}

/// Tip approximation for v in rescaled coordinates: `V_Bry(σ) + β V_Pert(σ)`.
pub fn v_tip(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
    tables: &BryantTables,
) -> Result<f64, crate::bryant::BryantError> {
    let beta = pinch
        .scales()
        .beta(t)
        .map_err(crate::bryant::BryantError::from)?;
    Ok(tables.v_bry(sigma)? + beta * tables.v_pert(sigma)?)
}

/// Tip approximation for the normalized fiber size `w̄`.
pub fn wbar_tip(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
    tables: &BryantTables,
) -> Result<f64, crate::bryant::BryantError> {
    let lw = pinch
        .scales()
        .log_omega_theta(t)
        .map_err(crate::bryant::BryantError::from)?;
    Ok(1.0 + lw * tables.w_pert(sigma)?)
}

/// First-order expansions shared by the productish and tip approximations
/// in the matching zone. Valid for νσ small; the caller sees the raw value
/// either way.
pub fn common_expansion(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
) -> Result<(f64, Option<f64>), PinchError> {
    let sc = pinch.scales();
    let mu = pinch.mu();
    let nu = sc.nu(t)?;
    let nu1 = sc.nu_log1(t)?;
    let v_common = mu / sigma * (1.0 + (1.0 + nu1) / mu * nu * sigma);
    let w_common = if pinch.p > 0 {
        let om1 = sc.omega_log1(t)?;
        Some(1.0 + nu * sigma * om1 / mu)
    } else {
        None
    };
    Ok((v_common, w_common))
}

/// Whether the expansion parameter νσ is small enough for
/// [`common_expansion`] to be quantitative.
pub fn common_expansion_trustworthy(sigma: f64, t: f64, pinch: &ModelPinch) -> bool {
    pinch
        .scales()
        .nu(t)
        .map(|nu| nu * sigma <= 0.5)
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::logspace;

    fn fd_d1(p: &Profile, u: f64) -> f64 {
        let h = u * 1e-6;
        (p.eval_unchecked(u + h) - p.eval_unchecked(u - h)) / (2.0 * h)
    }

    fn fd_d2(p: &Profile, u: f64) -> f64 {
        let h = u * 1e-3;
        (p.eval_unchecked(u + h) - 2.0 * p.eval_unchecked(u) + p.eval_unchecked(u - h)) / (h * h)
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let profiles = [
            Profile::log_type(1.0),
            Profile::log_type(2.5),
            Profile::power(0.7, 1.0),
            Profile::power(1.3, -0.5),
            Profile::new(ProfileSpec::PowerLog {
                c: 0.8,
                gamma: 0.5,
                log_exp: 2.0,
            }),
        ];
        for p in &profiles {
            for &u in &[1e-4, 1e-3, 1e-2, 0.1, 0.5] {
                let d1 = p.d1_unchecked(u);
                let d2 = p.d2_unchecked(u);
                assert!(
                    (d1 - fd_d1(p, u)).abs() <= 1e-6 * (1.0 + d1.abs()),
                    "{:?} d1 at {u}: {d1} vs {}",
                    p.spec,
                    fd_d1(p, u)
                );
                let noise = 1e-16 * p.eval_unchecked(u).abs() / (u * u * 1e-6);
                assert!(
                    (d2 - fd_d2(p, u)).abs() <= 1e-4 * (1.0 + d2.abs()) + 10.0 * noise,
                    "{:?} d2 at {u}: {d2} vs {}",
                    p.spec,
                    fd_d2(p, u)
                );
            }
        }
    }

    #[test]
    fn log_deriv_power_law_is_exponent() {
        let p = Profile::power(2.0, 0.7);
        for &u in &[1e-5, 1e-3, 0.3] {
            assert!((p.log_deriv(1, u).unwrap() - 0.7).abs() < 1e-12);
            assert!((p.log_deriv(2, u).unwrap() - 0.7 * (0.7 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let p = Profile::log_type(1.0);
        assert!(p.eval(0.0).is_err());
        assert!(p.eval(-0.1).is_err());
        assert!(p.eval(1.5).is_err());
        assert!(p.eval(0.5).is_ok());
    }

    #[test]
    fn ak_and_pancake_validate() {
        let grid = logspace(1e-8, 1.0, 64);
        for name in ["ak-neckpinch", "pancake"] {
            let report = validate_model_pinch(&builtin(name).unwrap(), &grid);
            assert!(report.all_pass(), "{name}: {report:?}");
            if name == "pancake" {
                // W₀/(uV₀) = log(e + 1/u) → ∞.
                assert_eq!(report.flat_fiber_dominates, Some(true));
            }
        }
    }

    #[test]
    fn constant_profile_fails_decrease() {
        let mut p = builtin("ak-neckpinch").unwrap();
        p.v0 = Profile::constant(0.5);
        let report = validate_model_pinch(&p, &logspace(1e-8, 1.0, 64));
        assert!(!report.neck_decays);
    }

    #[test]
    fn essential_singularity_fails_derivative_bound() {
        // V₀ = u² e^{-2/u} has u V₀'/V₀ = 2/u + 2, unbounded at the end.
        // Model it as a probe over the grid using the analytic ratio; the
        // validator sees the same growth through a PowerLog stand-in is not
        // possible, so check the trend logic directly.
        let grid = logspace(1e-6, 1.0, 48);
        let ratios: Vec<f64> = grid.iter().map(|&u| 2.0 / u + 2.0).collect();
        let slope = loglog_slope(&grid, &ratios);
        assert!(slope < -0.05, "growth toward u=0 must be detected: {slope}");
    }

    #[test]
    fn degenerate_profile_is_flagged() {
        // φ = s^{2/3} gives V₀ ~ u^{-1/2}, which blows up at the singular
        // end; the validator must reject it.
        let report =
            validate_model_pinch(&builtin("degenerate-1").unwrap(), &logspace(1e-8, 1.0, 64));
        assert!(!report.neck_decays);
        assert!(!report.all_pass());
    }

    #[test]
    fn degenerate_exponent_value() {
        let p = builtin("degenerate-1").unwrap();
        match p.v0.spec {
            ProfileSpec::Power { c, gamma } => {
                let beta: f64 = 2.0 / 3.0;
                assert!((c - 4.0 * beta * beta).abs() < 1e-15);
                assert!((gamma - (beta - 1.0) / beta).abs() < 1e-15);
            }
            _ => panic!("degenerate profile should be a power law"),
        }
    }

    #[test]
    fn prish_reduces_to_initial_data_at_t_zero() {
        let pinch = builtin("pancake").unwrap();
        for &u in &[1e-4, 1e-2, 0.3] {
            let v = v_prish(u, 0.0, &pinch).unwrap();
            assert!((v - pinch.v0.eval(u).unwrap()).abs() < 1e-15);
            let w = w_prish(u, 0.0, &pinch).unwrap();
            assert!((w - pinch.w0().unwrap().eval(u).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn prish_polynomial_example() {
        // V₀(u) = u, μ = 2, u = 0.3, t = 0.1: (0.5/0.3)·0.5 = 5/6.
        let pinch = ModelPinch {
            name: "poly".into(),
            q: 2,
            p: 0,
            mu_f: 0.0,
            fiber_flat: true,
            lambda_ratio: 0.0,
            v0: Profile::power(1.0, 1.0),
            w0: None,
            u_star_hint: 0.05,
        };
        let v = v_prish(0.3, 0.1, &pinch).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn common_expansion_forms() {
        // Constant profile: ⟨ν⟩₁ = 0 so v_common = μσ⁻¹(1 + μ⁻¹νσ).
        let mut pinch = builtin("pancake").unwrap();
        pinch.v0 = Profile::constant(0.3);
        let (t, sigma) = (1e-3, 5.0);
        let (vc, wc) = common_expansion(sigma, t, &pinch).unwrap();
        let mu = pinch.mu();
        let nu = 0.3;
        assert!((vc - mu / sigma * (1.0 + nu * sigma / mu)).abs() < 1e-14);
        assert!(wc.is_some());
        // The normalized form v_common·σ/μ recovers the bracket.
        let ak = builtin("ak-neckpinch").unwrap();
        let sc = ak.scales();
        let (vc, _) = common_expansion(sigma, t, &ak).unwrap();
        let bracket = 1.0 + (1.0 + sc.nu_log1(t).unwrap()) / mu * sc.nu(t).unwrap() * sigma;
        assert!((vc * sigma / mu - bracket).abs() < 1e-14);
        assert!(common_expansion_trustworthy(1.0, 1e-4, &ak));
        assert!(!common_expansion_trustworthy(1e3, 1e-3, &ak));
    }

    #[test]
    fn common_expansion_matches_prish_to_second_order() {
        // |v_prish − v_common|/v_prish <= K(νσ)² on {νσ <= 0.3} with a
        // stable measured K.
        let pinch = builtin("ak-neckpinch").unwrap();
        let sc = pinch.scales();
        let t = 1e-3;
        let nu = sc.nu(t).unwrap();
        let alpha = sc.alpha(t).unwrap();
        let mut k_measured: f64 = 0.0;
        for i in 1..=30 {
            let nusigma = 0.3 * i as f64 / 30.0;
            let sigma = nusigma / nu;
            let u = sigma * alpha;
            let vp = v_prish(u, t, &pinch).unwrap();
            let (vc, _) = common_expansion(sigma, t, &pinch).unwrap();
            let k = (vp - vc).abs() / vp / (nusigma * nusigma);
            k_measured = k_measured.max(k);
        }
        assert!(
            k_measured.is_finite() && k_measured < 1.0,
            "measured K = {k_measured}"
        );
    }

    #[test]
    fn frozen_reaction_exactness() {
        // Along u(t) = u₀ - μt the productish value is V₀(u₀)·u₀/u(t).
        let pinch = builtin("ak-neckpinch").unwrap();
        let mu = pinch.mu();
        let u0 = 0.4;
        for &t in &[0.01, 0.05, 0.09] {
            let u = u0 - mu * t;
            let v = v_prish(u, t, &pinch).unwrap();
            let expected = pinch.v0.eval(u0).unwrap() * u0 / u;
            assert!((v - expected).abs() < 1e-14);
        }
    }
}
