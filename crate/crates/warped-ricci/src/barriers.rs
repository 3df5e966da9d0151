//! Productish and tip barrier families, their crossing order, the generic
//! supersolution constructor for nearly-constant reaction-diffusion
//! solutions, and pointwise residual checks of the sub/supersolution
//! inequalities at concrete parameter values.
//!
//! The underlying estimates hold for existential constants; everything here
//! reports margins at the configured parameters rather than asserting
//! universal truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bryant::{BryantError, BryantTables};
use crate::pinch::{self, ModelPinch, PinchError, Profile};
use crate::scales::{hat_u, q_factor, sigma_pow};

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error(transparent)]
    Pinch(#[from] PinchError),
    #[error(transparent)]
    Bryant(#[from] BryantError),
    #[error("bad parameter: {0}")]
    Parameter(String),
}

/// Constants governing both barrier families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierParams {
    pub d: f64,
    pub u_star: f64,
    pub sigma_star: f64,
    pub zeta_star: f64,
    pub eps_v: f64,
    pub eps_w: f64,
    pub delta: f64,
    /// Times beyond this are outside the validated window.
    pub t_star: f64,
    /// Reported margin coefficient in the v-supersolution inequality.
    pub margin_c: f64,
    /// Coefficient of the κ̃² cap `c·ε_v·ν·σ^{1,0}` fed to the residuals.
    pub kappa_cap: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        let eps_v = 0.1;
        let zeta_star = 20.0;
        BarrierParams {
            d: 10.0,
            u_star: 0.05,
            sigma_star: 40.0,
            zeta_star,
            eps_v,
            eps_w: 0.01,
            delta: (eps_v * zeta_star / 10.0).min(0.1),
            t_star: 0.01,
            margin_c: 0.01,
            kappa_cap: 0.01,
        }
    }
}

/// Productish region membership: `u + μt < u_*` and `σ > σ_*`.
pub fn in_productish_region(u: f64, t: f64, pinch: &ModelPinch, params: &BarrierParams) -> bool {
    let sc = pinch.scales();
    match sc.alpha(t) {
        Ok(alpha) => u + pinch.mu() * t < params.u_star && u / alpha > params.sigma_star,
        Err(_) => false,
    }
}

/// Tip region membership: `σ < ζ_* ν^{-1/2}`.
pub fn in_tip_region(sigma: f64, t: f64, pinch: &ModelPinch, params: &BarrierParams) -> bool {
    match pinch.scales().nu(t) {
        Ok(nu) => sigma < params.zeta_star / nu.sqrt(),
        Err(_) => false,
    }
}

/// Productish barriers at one point.
#[derive(Debug, Clone, Copy)]
pub struct ProductishBarriers {
    pub v_minus: f64,
    pub v_plus: f64,
    /// Barriers for w (the shifted `Ŵ± − μ_F t`), absent for p = 0.
    pub w_minus: Option<f64>,
    pub w_plus: Option<f64>,
    /// The approximations themselves.
    pub v_mid: f64,
    pub w_hat_mid: Option<f64>,
}

/// `V^± = (1 ± DV)V`, `Ŵ^± = (1 ± DV)Ŵ` with `V = v_prish`, `Ŵ = Ŵ_prish`.
pub fn prish_barriers(
    u: f64,
    t: f64,
    pinch: &ModelPinch,
    params: &BarrierParams,
) -> Result<ProductishBarriers, BarrierError> {
    let v = pinch::v_prish(u, t, pinch)?;
    let dv = params.d * v;
    let (w_minus, w_plus, w_hat_mid) = if pinch.p > 0 {
        let w_hat = pinch::w_hat_prish(u, t, pinch)?;
        let shift = pinch.mu_f * t;
        (
            Some((1.0 - dv) * w_hat - shift),
            Some((1.0 + dv) * w_hat - shift),
            Some(w_hat),
        )
    } else {
        (None, None, None)
    };
    Ok(ProductishBarriers {
        v_minus: (1.0 - dv) * v,
        v_plus: (1.0 + dv) * v,
        w_minus,
        w_plus,
        v_mid: v,
        w_hat_mid,
    })
}

/// Tip barriers at one rescaled point.
#[derive(Debug, Clone, Copy)]
pub struct TipBarriers {
    pub v_minus: f64,
    pub v_plus: f64,
    /// Barriers for the normalized fiber size w̄, absent for p = 0.
    pub wbar_minus: Option<f64>,
    pub wbar_plus: Option<f64>,
    pub v_mid: f64,
    pub wbar_mid: Option<f64>,
    pub k_plus: f64,
    pub k_minus: f64,
}

/// `V^± = V_{k±Bry} + (β ∓ ε_v ν) V_{k±Pert}` and
/// `W̄^± = 1 ± ε_w ν^{1/2} + ((log ω)_θ ∓ δ ε_w ν) W_Pert`, with
/// `k± = 1 ∓ δ⁻¹ ε_v ν^{1/2}`.
pub fn tip_barriers(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
) -> Result<TipBarriers, BarrierError> {
    let sc = pinch.scales();
    let nu = sc.nu(t)?;
    let beta = sc.beta(t)?;
    let shift = params.eps_v * nu.sqrt() / params.delta;
    let k_plus = 1.0 - shift;
    let k_minus = 1.0 + shift;
    if k_plus <= 0.0 {
        return Err(BarrierError::Parameter(format!(
            "k+ = {k_plus} nonpositive: ν too large for these barrier constants"
        )));
    }
    let v_at = |k: f64, eps: f64| -> Result<f64, BarrierError> {
        Ok(tables.v_bry(k * sigma)? + (beta + eps) / k * tables.v_pert(k * sigma)?)
    };
    let v_plus = v_at(k_plus, -params.eps_v * nu)?;
    let v_minus = v_at(k_minus, params.eps_v * nu)?;
    let v_mid = tables.v_bry(sigma)? + beta * tables.v_pert(sigma)?;
    let (wbar_minus, wbar_plus, wbar_mid) = if pinch.p > 0 {
        let lw = sc.log_omega_theta(t)?;
        let wp = tables.w_pert(sigma)?;
        let bump = params.eps_w * nu.sqrt();
        let tilt = params.delta * params.eps_w * nu;
        (
            Some(1.0 - bump + (lw + tilt) * wp),
            Some(1.0 + bump + (lw - tilt) * wp),
            Some(1.0 + lw * wp),
        )
    } else {
        (None, None, None)
    };
    Ok(TipBarriers {
        v_minus,
        v_plus,
        wbar_minus,
        wbar_plus,
        v_mid,
        wbar_mid,
        k_plus,
        k_minus,
    })
}

/// One crossing inequality in the buckling report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucklingInequality {
    pub name: String,
    pub band: String,
    /// Worst value of (required-smaller − required-larger); <= 0 passes.
    pub worst_margin: f64,
    pub worst_sigma: f64,
    pub pass: bool,
    pub applicable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucklingReport {
    pub t: f64,
    pub within_t_star: bool,
    pub inequalities: Vec<BucklingInequality>,
}

impl BucklingReport {
    pub fn all_pass(&self) -> bool {
        self.within_t_star && self.inequalities.iter().all(|i| !i.applicable || i.pass)
    }

    pub fn v_inequalities_pass(&self) -> bool {
        self.inequalities
            .iter()
            .filter(|i| i.name.starts_with('v'))
            .all(|i| !i.applicable || i.pass)
    }
}

/// Evaluate the eight barrier-crossing inequalities on the two matching
/// bands: tip barriers outside productish on
/// `[ζ_*ν^{-1/2}, 2ζ_*ν^{-1/2}]`, the reverse on `[σ_*/2, σ_*]`.
pub fn check_buckling(
    t: f64,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
) -> Result<BucklingReport, BarrierError> {
    let sc = pinch.scales();
    let within = t <= params.t_star;
    let nu = sc.nu(t)?;
    let alpha = sc.alpha(t)?;
    let omega = if pinch.p > 0 {
        Some(sc.omega(t)?)
    } else {
        None
    };
    let n_samples = 25;

    let mut inequalities = Vec::new();
    let mut run_band =
        |lo: f64, hi: f64, band: &str, tip_outside: bool| -> Result<(), BarrierError> {
            // margins[i]: v+, v-, w+, w-.
            let mut worst = [f64::NEG_INFINITY; 4];
            let mut worst_sigma = [lo; 4];
            for i in 0..n_samples {
                let sigma = lo + (hi - lo) * i as f64 / (n_samples - 1) as f64;
                let u = sigma * alpha;
                let tip = tip_barriers(sigma, t, pinch, params, tables)?;
                let prish = prish_barriers(u, t, pinch, params)?;
                // In "tip outside" order the tip barriers must strictly contain
                // the productish ones; margins are (inner - outer).
                let (mv_p, mv_m) = if tip_outside {
                    (prish.v_plus - tip.v_plus, tip.v_minus - prish.v_minus)
                } else {
                    (tip.v_plus - prish.v_plus, prish.v_minus - tip.v_minus)
                };
                for (slot, m) in [(0usize, mv_p), (1, mv_m)] {
                    if m > worst[slot] {
                        worst[slot] = m;
                        worst_sigma[slot] = sigma;
                    }
                }
                if let (Some(om), Some(wp_hat), Some(wm_hat)) = (omega, prish.w_plus, prish.w_minus)
                {
                    // Compare in the normalized variable w̄ = (w + μ_F t)/ω.
                    let shift = pinch.mu_f * t;
                    let prish_bar_p = (wp_hat + shift) / om;
                    let prish_bar_m = (wm_hat + shift) / om;
                    let (mw_p, mw_m) = if tip_outside {
                        (
                            prish_bar_p - tip.wbar_plus.unwrap(),
                            tip.wbar_minus.unwrap() - prish_bar_m,
                        )
                    } else {
                        (
                            tip.wbar_plus.unwrap() - prish_bar_p,
                            prish_bar_m - tip.wbar_minus.unwrap(),
                        )
                    };
                    for (slot, m) in [(2usize, mw_p), (3, mw_m)] {
                        if m > worst[slot] {
                            worst[slot] = m;
                            worst_sigma[slot] = sigma;
                        }
                    }
                }
            }
            let names = if tip_outside {
                [
                    "v+: tip > prish",
                    "v-: tip < prish",
                    "w+: tip > prish",
                    "w-: tip < prish",
                ]
            } else {
                [
                    "v+: prish > tip",
                    "v-: prish < tip",
                    "w+: prish > tip",
                    "w-: prish < tip",
                ]
            };
            for slot in 0..4 {
                let applicable = slot < 2 || pinch.p > 0;
                inequalities.push(BucklingInequality {
                    name: names[slot].into(),
                    band: band.into(),
                    worst_margin: if applicable { worst[slot] } else { 0.0 },
                    worst_sigma: worst_sigma[slot],
                    pass: !applicable || worst[slot] <= 0.0,
                    applicable,
                });
            }
            Ok(())
        };

    let zeta_band = params.zeta_star / nu.sqrt();
    run_band(zeta_band, 2.0 * zeta_band, "tip-productish", true)?;
    run_band(
        0.5 * params.sigma_star,
        params.sigma_star,
        "productish-tip",
        false,
    )?;

    Ok(BucklingReport {
        t,
        within_t_star: within,
        inequalities,
    })
}

/// Generic approximate solution `Z = Q^a (Z₀ ∘ û)` with its sub- and
/// supersolutions `(1 ∓ DV)Z`.
pub fn generic_supersolution(
    z0: &Profile,
    a: f64,
    d: f64,
    u: f64,
    t: f64,
    pinch: &ModelPinch,
) -> Result<(f64, f64, f64), BarrierError> {
    let mu = pinch.mu();
    let z = q_factor(u, t, mu).powf(a) * z0.eval(hat_u(u, t, mu))?;
    let v = pinch::v_prish(u, t, pinch)?;
    Ok(((1.0 - d * v) * z, z, (1.0 + d * v) * z))
}

// --- Supersolution residuals ----------------------------------------------

/// Quadratic operator `Q(A, B, C) = AC - ½B² - ¼μA²` with `A = v`,
/// `B = σ∂v`, `C = σ²∂²v`; pinned against the expanded evolution equation by
/// the operator tests.
pub fn q_operator(mu: f64, a: f64, b: f64, c: f64) -> f64 {
    a * c - 0.5 * b * b - 0.25 * mu * a * a
}

/// Linear operator `L(A, B) = μA + μB` with `B = σ∂v`.
pub fn l_operator(mu: f64, a: f64, b: f64) -> f64 {
    mu * (a + b)
}

/// `F_σ[v, κ̃] = σ⁻¹Q_σ[v,v] + σ⁻¹L_σ[v] − 2κ̃²v` on values
/// `(v, ∂_σv, ∂²_σv)`.
pub fn f_sigma_operator(mu: f64, sigma: f64, v: f64, dv: f64, d2v: f64, kappa_sq: f64) -> f64 {
    let b = sigma * dv;
    let c = sigma * sigma * d2v;
    (q_operator(mu, v, b, c) + l_operator(mu, v, b)) / sigma - 2.0 * kappa_sq * v
}

struct TipBarrierDerivs {
    v: f64,
    dv: f64,
    d2v: f64,
}

/// σ-derivatives of a tip v-barrier via the tabulated columns and the ODE
/// identities for the second derivatives.
fn tip_v_barrier_derivs(
    sigma: f64,
    k: f64,
    coeff: f64,
    tables: &BryantTables,
) -> Result<TipBarrierDerivs, BryantError> {
    let ks = k * sigma;
    Ok(TipBarrierDerivs {
        v: tables.v_bry(ks)? + coeff / k * tables.v_pert(ks)?,
        dv: k * tables.dv_bry(ks)? + coeff * tables.dv_pert(ks)?,
        d2v: k * k * tables.d2v_bry(ks)? + coeff * k * tables.d2v_pert(ks)?,
    })
}

/// Residuals of the v-barrier sub/supersolution inequalities at one point.
/// Both are nonnegative when the inequalities hold with margin
/// `c ε_v ν σ^{1,-1}`:
/// `plus  = ∂_θV⁺ − F_σ[V⁺, κ̃] − βσ∂V⁺ − margin`,
/// `minus = −(∂_θV⁻ − F_σ[V⁻, κ̃] − βσ∂V⁻) − margin`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualPair {
    pub plus: f64,
    pub minus: f64,
    pub margin: f64,
}

pub fn vsupsoln_residual(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
    kappa_tilde_sq: f64,
) -> Result<ResidualPair, BarrierError> {
    let sc = pinch.scales();
    let nu = sc.nu(t)?;
    let beta = sc.beta(t)?;
    let mu = pinch.mu();
    let side = |sign: f64, t_eval: f64| -> Result<TipBarrierDerivs, BarrierError> {
        let nu_e = sc.nu(t_eval)?;
        let beta_e = sc.beta(t_eval)?;
        let k = 1.0 - sign * params.eps_v * nu_e.sqrt() / params.delta;
        if k <= 0.0 {
            return Err(BarrierError::Parameter("k nonpositive".into()));
        }
        Ok(tip_v_barrier_derivs(
            sigma,
            k,
            beta_e - sign * params.eps_v * nu_e,
            tables,
        )?)
    };
    // θ-derivative by centered difference in t with dθ = α⁻¹ dt.
    let dt = t * 1e-3;
    let alpha = sc.alpha(t)?;
    let mut out = [0.0_f64; 2];
    for (slot, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        let here = side(sign, t)?;
        let fwd = side(sign, t + dt)?;
        let bwd = side(sign, t - dt)?;
        let dtheta = alpha * (fwd.v - bwd.v) / (2.0 * dt);
        let lhs = dtheta
            - f_sigma_operator(mu, sigma, here.v, here.dv, here.d2v, kappa_tilde_sq)
            - beta * sigma * here.dv;
        out[slot] = sign * lhs;
    }
    let margin = params.margin_c * params.eps_v * nu * sigma_pow(sigma, 1.0, -1.0);
    Ok(ResidualPair {
        plus: out[0] - margin,
        minus: out[1] - margin,
        margin,
    })
}

/// The w̄-equation operator `D(w̄, v)` of the tip analysis, evaluated on a
/// barrier with σ-derivatives from the tables and the θ-derivative by
/// centered difference.
#[allow(clippy::too_many_arguments)]
fn d_operator(
    sigma: f64,
    wbar: f64,
    d_wbar: f64,
    d2_wbar: f64,
    dtheta_wbar: f64,
    v: f64,
    mu: f64,
    mu_f_t_over_omega: f64,
    beta: f64,
    log_omega_theta: f64,
) -> f64 {
    let r_part = sigma * v * d2_wbar + (mu + v) * d_wbar;
    dtheta_wbar
        - (r_part
            - v * sigma * d_wbar * d_wbar / (wbar - mu_f_t_over_omega)
            - beta * sigma * d_wbar
            - log_omega_theta * wbar)
}

pub fn wsupsoln_residual(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
    v_field: Option<f64>,
) -> Result<ResidualPair, BarrierError> {
    if pinch.p == 0 {
        return Err(BarrierError::Pinch(PinchError::NoFiber));
    }
    let sc = pinch.scales();
    let nu = sc.nu(t)?;
    let beta = sc.beta(t)?;
    let mu = pinch.mu();
    let omega = sc.omega(t)?;
    let lw = sc.log_omega_theta(t)?;
    let v = match v_field {
        Some(v) => v,
        None => pinch::v_tip(sigma, t, pinch, tables)?,
    };
    let wp = tables.w_pert(sigma)?;
    let dwp = tables.dw_pert(sigma)?;
    let d2wp = tables.d2w_pert(sigma)?;
    let dt = t * 1e-3;
    let mut out = [0.0_f64; 2];
    for (slot, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        let wbar_at = |t_eval: f64| -> Result<f64, BarrierError> {
            let nu_e = sc.nu(t_eval)?;
            let lw_e = sc.log_omega_theta(t_eval)?;
            Ok(1.0
                + sign * params.eps_w * nu_e.sqrt()
                + (lw_e - sign * params.delta * params.eps_w * nu_e) * wp)
        };
        let wbar = wbar_at(t)?;
        let dtheta = sc.alpha(t)? * (wbar_at(t + dt)? - wbar_at(t - dt)?) / (2.0 * dt);
        let coeff = lw - sign * params.delta * params.eps_w * nu;
        let d = d_operator(
            sigma,
            wbar,
            coeff * dwp,
            coeff * d2wp,
            dtheta,
            v,
            mu,
            pinch.mu_f * t / omega,
            beta,
            lw,
        );
        out[slot] = sign * d;
    }
    let margin = 0.5 * params.delta * params.eps_w * nu;
    Ok(ResidualPair {
        plus: out[0] - margin,
        minus: out[1] - margin,
        margin,
    })
}

/// Barricade check of one time slice against both barrier families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotBarricade {
    pub t: f64,
    pub prish_checked: usize,
    pub prish_violations: usize,
    /// Worst normalized excursion beyond a productish barrier; <= 0 means
    /// strictly barricaded.
    pub worst_prish_margin: f64,
    pub worst_prish_u: Option<f64>,
    pub tip_checked: usize,
    pub tip_violations: usize,
    pub worst_tip_margin: f64,
    pub worst_tip_sigma: Option<f64>,
}

/// Check arrays (u, v[, w]) at time t against the productish barriers in
/// Ω_prish and the tip barriers in Ω_tip.
pub fn barricade_snapshot(
    t: f64,
    u: &[f64],
    v: &[f64],
    w: Option<&[f64]>,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
) -> Result<SnapshotBarricade, BarrierError> {
    let sc = pinch.scales();
    let alpha = sc.alpha(t)?;
    let omega = if pinch.p > 0 {
        Some(sc.omega(t)?)
    } else {
        None
    };
    let mut out = SnapshotBarricade {
        t,
        prish_checked: 0,
        prish_violations: 0,
        worst_prish_margin: f64::NEG_INFINITY,
        worst_prish_u: None,
        tip_checked: 0,
        tip_violations: 0,
        worst_tip_margin: f64::NEG_INFINITY,
        worst_tip_sigma: None,
    };
    for i in 0..u.len() {
        if u[i] <= 0.0 {
            continue;
        }
        if in_productish_region(u[i], t, pinch, params) {
            let b = prish_barriers(u[i], t, pinch, params)?;
            let mut m = (b.v_minus - v[i]).max(v[i] - b.v_plus) / b.v_mid;
            if let (Some(w), Some(wm), Some(wp), Some(wmid)) = (w, b.w_minus, b.w_plus, b.w_hat_mid)
            {
                let m_w = (wm - w[i]).max(w[i] - wp) / wmid;
                m = m.max(m_w);
            }
            out.prish_checked += 1;
            if m > 0.0 {
                out.prish_violations += 1;
            }
            if m > out.worst_prish_margin {
                out.worst_prish_margin = m;
                out.worst_prish_u = Some(u[i]);
            }
        }
        let sigma = u[i] / alpha;
        if in_tip_region(sigma, t, pinch, params) {
            let b = tip_barriers(sigma, t, pinch, params, tables)?;
            let mut m = (b.v_minus - v[i]).max(v[i] - b.v_plus) / b.v_mid;
            if let (Some(w), Some(om)) = (w, omega) {
                let wbar = (w[i] + pinch.mu_f * t) / om;
                let m_w = (b.wbar_minus.unwrap() - wbar).max(wbar - b.wbar_plus.unwrap())
                    / b.wbar_mid.unwrap();
                m = m.max(m_w);
            }
            out.tip_checked += 1;
            if m > 0.0 {
                out.tip_violations += 1;
            }
            if m > out.worst_tip_margin {
                out.worst_tip_margin = m;
                out.worst_tip_sigma = Some(sigma);
            }
        }
    }
    Ok(out)
}

/// Bound on `1/(W̄^- − μ_F t/ω)` from the fiber-size hypothesis; finite for
/// valid parameters.
pub fn wbar_denominator_bound(
    sigma: f64,
    t: f64,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
) -> Result<f64, BarrierError> {
    let tb = tip_barriers(sigma, t, pinch, params, tables)?;
    let omega = pinch.scales().omega(t)?;
    let denom = tb.wbar_minus.ok_or(PinchError::NoFiber)? - pinch.mu_f * t / omega;
    if denom <= 0.0 {
        return Err(BarrierError::Parameter(format!(
            "w̄ denominator {denom} nonpositive"
        )));
    }
    Ok(1.0 / denom)
}
