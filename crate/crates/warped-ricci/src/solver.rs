//! Explicit time integration of the reduced flow equations in the φ = √u
//! spatial coordinate: the state is the bounded curvature-like quantity
//! `L = (1 - v/4)/u` together with the fiber size `w`, evolved by midpoint
//! Runge-Kutta on a graded grid with a closed tip at φ = 0 and a Dirichlet
//! right boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::{self, BarrierError, BarrierParams};
use crate::bryant::{BryantError, BryantTables};
use crate::geometry::CurvaturePoint;
use crate::interp::MonotoneCubic;
use crate::numeric::{d1_nonuniform, d2_nonuniform};
use crate::pinch::{self, ModelPinch, PinchError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("coordinate breakdown: v = {v} at φ = {phi}, t = {t}")]
    CoordinateBreakdown { t: f64, phi: f64, v: f64 },
    #[error("fiber collapse: w = {w} at φ = {phi}, t = {t}")]
    FiberCollapse { t: f64, phi: f64, w: f64 },
    #[error("CFL violation: {0}")]
    CflViolation(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error(transparent)]
    Pinch(#[from] PinchError),
    #[error(transparent)]
    Bryant(#[from] BryantError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

/// Spatial grid request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    /// Right endpoint; the default pipeline uses φ_b = √(2u_*).
    pub phi_b: f64,
    /// Closed tip at φ = 0 (left end); otherwise the grid starts at phi_a
    /// with a Dirichlet condition there too.
    pub tip: bool,
    pub phi_a: f64,
    /// Power grading exponent; `None` picks one from the tip resolution
    /// requirements.
    pub grading: Option<f64>,
}

impl GridSpec {
    pub fn tip_grid(nodes: usize, phi_b: f64) -> Self {
        GridSpec {
            nodes,
            phi_b,
            tip: true,
            phi_a: 0.0,
            grading: None,
        }
    }

    pub fn interval_grid(nodes: usize, phi_a: f64, phi_b: f64) -> Self {
        GridSpec {
            nodes,
            phi_b,
            tip: false,
            phi_a,
            grading: Some(1.0),
        }
    }

    /// Materialize the node positions for a grading exponent.
    pub fn build(&self, gamma: f64) -> Vec<f64> {
        let n = self.nodes;
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                if self.tip {
                    self.phi_b * s.powf(gamma)
                } else {
                    self.phi_a + (self.phi_b - self.phi_a) * s
                }
            })
            .collect()
    }
}

/// Right-boundary closure for the Dirichlet endpoint.
#[derive(Debug, Clone)]
pub enum RightBoundary {
    /// Pin to the time-dependent productish approximations.
    Productish,
    /// Freeze at fixed values.
    Frozen { l: f64, w: Option<f64> },
    /// Track the homothetic round-sphere solution of initial radius² r0_sq.
    SphereExact { r0_sq: f64 },
    /// Reaction-only closure: L frozen, w(t) = w0 − μ_F t.
    ReactionOnly { l: f64, w0: Option<f64> },
}

/// Everything a step needs besides the state itself.
pub struct FlowContext<'a> {
    pub pinch: &'a ModelPinch,
    pub right: RightBoundary,
    pub cfl: f64,
}

impl<'a> FlowContext<'a> {
    pub fn new(pinch: &'a ModelPinch) -> Self {
        FlowContext {
            pinch,
            right: RightBoundary::Productish,
            cfl: 0.4,
        }
    }

    fn boundary(&self, t: f64) -> Result<(f64, Option<f64>), SolverError> {
        Ok(match &self.right {
            RightBoundary::Productish => (f64::NAN, None), // filled by caller with u_b
            RightBoundary::Frozen { l, w } => (*l, *w),
            RightBoundary::SphereExact { r0_sq } => {
                let q = self.pinch.q as f64;
                (1.0 / (r0_sq - 2.0 * q * t), None)
            }
            RightBoundary::ReactionOnly { l, w0 } => (*l, w0.map(|w| w - self.pinch.mu_f * t)),
        })
    }
}

/// One time slice of the reduced flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: Vec<f64>,
    pub l: Vec<f64>,
    pub w: Option<Vec<f64>>,
    /// Mollification scale this state was built with (0 for harnesses).
    pub m: f64,
    pub t1: f64,
    pub tip: bool,
}

impl FlowState {
    pub fn u(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p * p).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(&self.l)
            .map(|(p, l)| 4.0 * (1.0 - p * p * l))
            .collect()
    }

    pub fn sigma(&self, pinch: &ModelPinch) -> Result<Vec<f64>, SolverError> {
        let alpha = pinch.scales().alpha(self.t)?;
        Ok(self.phi.iter().map(|p| p * p / alpha).collect())
    }

    fn validate(&self) -> Result<(), SolverError> {
        for (i, (&p, &l)) in self.phi.iter().zip(&self.l).enumerate() {
            let v = 4.0 * (1.0 - p * p * l);
            if !(v > 0.0 && v <= 4.0 + 1e-9) || !v.is_finite() {
                return Err(SolverError::CoordinateBreakdown {
                    t: self.t,
                    phi: p,
                    v,
                });
            }
            if let Some(w) = &self.w {
                if w[i] <= 0.0 || !w[i].is_finite() {
                    return Err(SolverError::FiberCollapse {
                        t: self.t,
                        phi: p,
                        w: w[i],
                    });
                }
            }
        }
        Ok(())
    }
}

// --- Initial data ----------------------------------------------------------

/// Smooth cutoff: 1 for x < 1, 0 for x > 2.
pub fn bump(x: f64) -> f64 {
    fn s(y: f64) -> f64 {
        if y > 0.0 {
            (-1.0 / y).exp()
        } else {
            0.0
        }
    }
    let (a, b) = (s(2.0 - x), s(x - 1.0));
    if a + b == 0.0 {
        if x <= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        a / (a + b)
    }
}

fn eta_r(x: f64, r: f64) -> f64 {
    bump(x / r)
}

/// Geometric node chain from `start` with initial spacing `h`, using `m`
/// intervals to land on `end`; the stretch ratio comes from bisection.
/// Returns the appended nodes and the final spacing, or None if even a
/// strong stretch cannot span the gap.
fn geometric_zone(start: f64, end: f64, h: f64, m: usize) -> Option<(Vec<f64>, f64)> {
    let span = end - start;
    if m == 0 || span <= 0.0 {
        return if span <= 0.0 {
            Some((Vec::new(), h))
        } else {
            None
        };
    }
    if h * m as f64 >= span {
        // Enough budget for uniform (slightly shrunken) spacing.
        let hu = span / m as f64;
        return Some(((1..=m).map(|i| start + hu * i as f64).collect(), hu));
    }
    let target = span / h;
    let sum = |r: f64| -> f64 { r * (r.powi(m as i32) - 1.0) / (r - 1.0) };
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    if sum(hi) < target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let mut nodes = Vec::with_capacity(m);
    let mut x = start;
    let mut hh = h;
    for _ in 0..m {
        hh *= r;
        x += hh;
        nodes.push(x);
    }
    // Land exactly on the endpoint.
    let scale = span / (x - start);
    for p in &mut nodes {
        *p = start + (*p - start) * scale;
    }
    Some((nodes, hh * scale))
}

/// Tip grid uniform at spacing `h_tip` over the first 20 intervals, then
/// geometrically stretched to reach `phi_b`. When a band scale is given,
/// enough of the node budget is spent below it to keep the requested
/// fraction of nodes inside the band. Keeps the explicit CFL step at the
/// tip-resolution scale instead of the much finer first interval a global
/// power grading would produce.
fn two_zone_grid(
    n: usize,
    phi_b: f64,
    h_tip: f64,
    band: Option<(f64, f64)>,
) -> Result<Vec<f64>, SolverError> {
    let k = 20usize;
    if n < k + 10 {
        return Err(SolverError::Config(format!("{n} nodes is too few")));
    }
    let inner = h_tip * k as f64;
    if inner >= 0.5 * phi_b {
        // Tip scale comparable to the domain: uniform covers it.
        return Ok((0..n).map(|i| phi_b * i as f64 / (n - 1) as f64).collect());
    }
    let m = n - 1 - k;
    let mut phi: Vec<f64> = (0..=k).map(|i| h_tip * i as f64).collect();
    let coarse = |n: usize, h: f64| {
        SolverError::Config(format!(
            "{n} nodes cannot span the domain from tip spacing {h:.3e}"
        ))
    };
    // Single stretched zone first; if it starves the band, split the budget
    // so the band fraction holds by construction.
    let (nodes, h_end) = geometric_zone(inner, phi_b, h_tip, m).ok_or_else(|| coarse(n, h_tip))?;
    if let Some((band_scale, fraction)) = band {
        if band_scale > inner && band_scale < 0.9 * phi_b {
            let have = k + 1 + nodes.iter().filter(|&&p| p <= band_scale).count();
            let want = (fraction * n as f64).ceil() as usize;
            if have < want {
                let m1 = want.saturating_sub(k + 1);
                let m2 = m.checked_sub(m1).ok_or_else(|| coarse(n, h_tip))?;
                let (zone1, h_mid) =
                    geometric_zone(inner, band_scale, h_tip, m1).ok_or_else(|| coarse(n, h_tip))?;
                let (zone2, _) =
                    geometric_zone(band_scale, phi_b, h_mid, m2).ok_or_else(|| coarse(n, h_tip))?;
                phi.extend(zone1);
                phi.extend(zone2);
                let _ = h_end;
                return Ok(phi);
            }
        }
    }
    phi.extend(nodes);
    Ok(phi)
}

/// Mollified initial slice: tip approximation inside `ζ <= 2ζ_*`, productish
/// in the middle band, raw profile data above `u = 2m`, with smooth blends.
pub fn mollified_initial(
    pinch: &ModelPinch,
    tables: &BryantTables,
    params: &BarrierParams,
    m: f64,
    t1: f64,
    grid: &GridSpec,
) -> Result<FlowState, SolverError> {
    if t1 <= 0.0 || t1 >= m {
        return Err(SolverError::Config(format!(
            "need 0 < T1 < m, got T1 = {t1}, m = {m}"
        )));
    }
    if !grid.tip {
        return Err(SolverError::Config(
            "mollified data needs a tip grid".into(),
        ));
    }
    let sc = pinch.scales();
    let alpha = sc.alpha(t1)?;
    let nu = sc.nu(t1)?;
    let tip_scale = alpha.sqrt();
    let band_scale = (4.0 * params.zeta_star * nu.sqrt() * t1).sqrt();

    // Grid: at least 20 nodes inside the tip scale and 30% of nodes in
    // the tip band.
    let n = grid.nodes;
    let phi = match grid.grading {
        Some(gamma) => grid.build(gamma),
        None => two_zone_grid(n, grid.phi_b, tip_scale / 20.0, Some((band_scale, 0.315)))?,
    };
    let in_tip_scale = phi.iter().filter(|&&p| p <= tip_scale).count();
    if in_tip_scale < 20 {
        return Err(SolverError::Config(format!(
            "grid too coarse: {in_tip_scale} nodes inside the tip scale {tip_scale:.3e}"
        )));
    }
    let in_band = phi.iter().filter(|&&p| p <= band_scale).count();
    if (in_band as f64) < 0.3 * n as f64 {
        return Err(SolverError::Config(format!(
            "grid too coarse: {in_band}/{n} nodes inside the tip band"
        )));
    }

    let mut l = vec![0.0; n];
    let mut w = if pinch.p > 0 {
        Some(vec![0.0; n])
    } else {
        None
    };
    let omega = if pinch.p > 0 {
        Some(sc.omega(t1)?)
    } else {
        None
    };
    for (i, &p) in phi.iter().enumerate() {
        let u = p * p;
        if i == 0 {
            // Closed tip: v → 4, L → tip curvature of the rescaled profile.
            l[0] = tables.kappa_tip / alpha;
            if let Some(w) = &mut w {
                let wbar = pinch::wbar_tip(0.0, t1, pinch, tables)?;
                w[0] = omega.unwrap() * wbar - pinch.mu_f * t1;
            }
            continue;
        }
        let sigma = u / alpha;
        let zeta = nu.sqrt() * sigma;
        let eta_tip = eta_r(zeta, 2.0 * params.zeta_star);
        let eta_moll = eta_r(u, m);
        let v_outer =
            eta_moll * pinch::v_prish(u, t1, pinch)? + (1.0 - eta_moll) * pinch.v0.eval(u)?;
        let v = if eta_tip > 0.0 {
            eta_tip * pinch::v_tip(sigma, t1, pinch, tables)? + (1.0 - eta_tip) * v_outer
        } else {
            v_outer
        };
        l[i] = (1.0 - 0.25 * v) / u;
        if let Some(w) = &mut w {
            let w0 = pinch.w0()?;
            let what_outer =
                eta_moll * pinch::w_hat_prish(u, t1, pinch)? + (1.0 - eta_moll) * w0.eval(u)?;
            let what = if eta_tip > 0.0 {
                let wbar = pinch::wbar_tip(sigma, t1, pinch, tables)?;
                eta_tip * omega.unwrap() * wbar + (1.0 - eta_tip) * what_outer
            } else {
                what_outer
            };
            w[i] = what - pinch.mu_f * t1;
        }
    }
    let state = FlowState {
        t: t1,
        phi,
        l,
        w,
        m,
        t1,
        tip: true,
    };
    state.validate()?;
    Ok(state)
}

// --- Time stepping ---------------------------------------------------------

struct Rhs {
    dl: Vec<f64>,
    dw: Option<Vec<f64>>,
}

/// Interior right-hand side of the L-evolution at one point (φ > 0):
/// `(1-u L)L'' + ½u(L')² + (½μ+3-u L)φ⁻¹L' + (μ+2)L² + ½u⁻¹κ²v`.
#[allow(clippy::too_many_arguments)]
pub fn l_rhs_point(q: u32, p: u32, phi: f64, l: f64, lp: f64, lpp: f64, w: f64, wp: f64) -> f64 {
    let mu = 2.0 * (q as f64 - 1.0);
    let u = phi * phi;
    let v = 4.0 * (1.0 - u * l);
    let coupling = if p > 0 {
        let ratio = wp / phi;
        p as f64 / 32.0 * v * v / (w * w) * ratio * ratio
    } else {
        0.0
    };
    (1.0 - u * l) * lpp
        + 0.5 * u * lp * lp
        + (0.5 * mu + 3.0 - u * l) * lp / phi
        + (mu + 2.0) * l * l
        + coupling
}

/// Interior right-hand side of the fiber-size evolution at one point:
/// `¼v w'' + (½μ+¼v)φ⁻¹w' − μ_F − y` with `y = v(w')²/(4w)`.
pub fn w_rhs_point(q: u32, mu_f: f64, phi: f64, v: f64, wp: f64, wpp: f64, w: f64) -> f64 {
    let mu = 2.0 * (q as f64 - 1.0);
    0.25 * v * wpp + (0.5 * mu + 0.25 * v) * wp / phi - mu_f - v * wp * wp / (4.0 * w)
}

/// Right-hand sides of the φ-coordinate evolution:
/// `∂_t L = (1-φ²L)L'' + ½φ²(L')² + φ⁻¹(½μ+3-φ²L)L' + (μ+2)L² + ½u⁻¹κ²v`
/// `∂_t w = ¼v w'' + (½μ+¼v)φ⁻¹w' − μ_F − y`,
/// with even symmetry at the tip, where the φ⁻¹∂_φ terms combine with the
/// second derivatives into higher-dimensional radial Laplacians.
fn rhs(state: &FlowState, pinch: &ModelPinch) -> Rhs {
    let n = state.phi.len();
    let mu = pinch.mu();
    let p_dim = pinch.p as f64;
    let mu_f = pinch.mu_f;
    let phi = &state.phi;
    let l = &state.l;
    let mut dl = vec![0.0; n];
    let mut dw = state.w.as_ref().map(|_| vec![0.0; n]);
    let w = state.w.as_ref();

    let start = if state.tip { 0 } else { 1 };
    for i in start..n - 1 {
        let (lp, lpp, wp, wpp);
        let p = phi[i];
        if i == 0 {
            // Even symmetry: L'(0) = 0, L''(0) from the symmetric stencil.
            let h = phi[1];
            lp = 0.0;
            lpp = 2.0 * (l[1] - l[0]) / (h * h);
            if let Some(w) = w {
                wp = 0.0;
                wpp = 2.0 * (w[1] - w[0]) / (h * h);
            } else {
                wp = 0.0;
                wpp = 0.0;
            }
        } else {
            let (x0, x1, x2) = (phi[i - 1], phi[i], phi[i + 1]);
            lp = d1_nonuniform(x0, x1, x2, l[i - 1], l[i], l[i + 1]);
            lpp = d2_nonuniform(x0, x1, x2, l[i - 1], l[i], l[i + 1]);
            if let Some(w) = w {
                wp = d1_nonuniform(x0, x1, x2, w[i - 1], w[i], w[i + 1]);
                wpp = d2_nonuniform(x0, x1, x2, w[i - 1], w[i], w[i + 1]);
            } else {
                wp = 0.0;
                wpp = 0.0;
            }
        }
        let u = p * p;
        let v = 4.0 * (1.0 - u * l[i]);
        if i == 0 {
            // Tip: φ⁻¹∂_φ terms combine with the second derivatives into
            // higher-dimensional radial Laplacians; the coupling reads
            // φ⁻¹∂_φw → w''(0).
            let coupling = if p_dim > 0.0 {
                let wi = w.unwrap()[0];
                p_dim / 32.0 * v * v / (wi * wi) * wpp * wpp
            } else {
                0.0
            };
            dl[0] = (1.0 + 0.5 * mu + 3.0) * lpp + (mu + 2.0) * l[0] * l[0] + coupling;
            if let (Some(dw), Some(_)) = (dw.as_mut(), w) {
                dw[0] = (0.5 * v + 0.5 * mu) * wpp - mu_f;
            }
        } else {
            let wi = w.map(|w| w[i]).unwrap_or(1.0);
            dl[i] = l_rhs_point(pinch.q, pinch.p, p, l[i], lp, lpp, wi, wp);
            if let (Some(dw), Some(w)) = (dw.as_mut(), w) {
                dw[i] = w_rhs_point(pinch.q, mu_f, p, v, wp, wpp, w[i]);
            }
        }
    }
    Rhs { dl, dw }
}

/// Stability limit inspector for development probes.
pub fn debug_cfl(state: &FlowState, pinch: &ModelPinch, cfl: f64) -> f64 {
    cfl_dt(state, pinch, cfl)
}

/// Stability limit for the explicit step.
fn cfl_dt(state: &FlowState, pinch: &ModelPinch, cfl: f64) -> f64 {
    let n = state.phi.len();
    let mu = pinch.mu();
    let mut dt = f64::INFINITY;
    let start = if state.tip { 0 } else { 1 };
    for i in start..n - 1 {
        let h = if i == 0 {
            state.phi[1] - state.phi[0]
        } else {
            (state.phi[i] - state.phi[i - 1]).min(state.phi[i + 1] - state.phi[i])
        };
        let p = state.phi[i];
        let u = p * p;
        let v = 4.0 * (1.0 - u * state.l[i]);
        // Diffusion coefficients for L and w, with the tip Laplacian factor.
        let d_l = if i == 0 {
            0.5 * mu + 4.0
        } else {
            (1.0 - u * state.l[i]).abs().max(1e-12)
        };
        let d_w = if i == 0 {
            0.5 * mu + 1.0 + 0.25 * v
        } else {
            0.25 * v
        };
        let d = d_l.max(if state.w.is_some() { d_w } else { 0.0 });
        dt = dt.min(h * h / (2.0 * d.max(1e-12)));
        if i > 0 {
            // Advective limits from the φ⁻¹ drift terms.
            let adv_l = (0.5 * mu + 3.0 - u * state.l[i]).abs() / p;
            let adv_w = (0.5 * mu + 0.25 * v) / p;
            let adv = adv_l.max(if state.w.is_some() { adv_w } else { 0.0 });
            dt = dt.min(h / adv.max(1e-12));
        }
    }
    cfl * dt
}

fn set_right_boundary(state: &mut FlowState, ctx: &FlowContext, t: f64) -> Result<(), SolverError> {
    let n = state.phi.len();
    let u_b = state.phi[n - 1] * state.phi[n - 1];
    match &ctx.right {
        RightBoundary::Productish => {
            let v = pinch::v_prish(u_b, t, ctx.pinch)?;
            state.l[n - 1] = (1.0 - 0.25 * v) / u_b;
            if let Some(w) = &mut state.w {
                w[n - 1] = pinch::w_prish(u_b, t, ctx.pinch)?;
            }
        }
        _ => {
            let (lb, wb) = ctx.boundary(t)?;
            state.l[n - 1] = lb;
            if let (Some(w), Some(wb)) = (&mut state.w, wb) {
                w[n - 1] = wb;
            }
        }
    }
    // For interval grids, pin the left endpoint the same way (reaction-only
    // and cylinder harnesses).
    if !state.tip {
        match &ctx.right {
            RightBoundary::Productish => {
                let u_a = state.phi[0] * state.phi[0];
                let v = pinch::v_prish(u_a, t, ctx.pinch)?;
                state.l[0] = (1.0 - 0.25 * v) / u_a;
                if let Some(w) = &mut state.w {
                    w[0] = pinch::w_prish(u_a, t, ctx.pinch)?;
                }
            }
            RightBoundary::Frozen { .. } | RightBoundary::ReactionOnly { .. } => {
                // Same closure values at both ends, but L differs with u:
                // recompute from the stored profile value at the left.
                let (_, wb) = ctx.boundary(t)?;
                if let (Some(w), Some(wb)) = (&mut state.w, wb) {
                    w[0] = wb;
                }
                // L at the left endpoint keeps its initial value: the
                // harness closures are spatially uniform in v, so L = const
                // in time is handled by the caller's initial data.
            }
            RightBoundary::SphereExact { r0_sq } => {
                let q = ctx.pinch.q as f64;
                state.l[0] = 1.0 / (r0_sq - 2.0 * q * t);
            }
        }
    }
    Ok(())
}

/// One explicit midpoint step of size dt.
pub fn step(state: &FlowState, dt: f64, ctx: &FlowContext) -> Result<FlowState, SolverError> {
    let n = state.phi.len();
    let k1 = rhs(state, ctx.pinch);
    let mut mid = state.clone();
    mid.t = state.t + 0.5 * dt;
    for i in 0..n - 1 {
        mid.l[i] = state.l[i] + 0.5 * dt * k1.dl[i];
    }
    if let (Some(wm), Some(w0), Some(dw)) = (mid.w.as_mut(), state.w.as_ref(), k1.dw.as_ref()) {
        for i in 0..n - 1 {
            wm[i] = w0[i] + 0.5 * dt * dw[i];
        }
    }
    let t_mid = mid.t;
    set_right_boundary(&mut mid, ctx, t_mid)?;
    let k2 = rhs(&mid, ctx.pinch);
    let mut new = state.clone();
    new.t = state.t + dt;
    for i in 0..n - 1 {
        new.l[i] = state.l[i] + dt * k2.dl[i];
    }
    if let (Some(wn), Some(w0), Some(dw)) = (new.w.as_mut(), state.w.as_ref(), k2.dw.as_ref()) {
        for i in 0..n - 1 {
            wn[i] = w0[i] + dt * dw[i];
        }
    }
    let t_new = new.t;
    set_right_boundary(&mut new, ctx, t_new)?;
    new.validate()?;
    Ok(new)
}

// --- Trajectories ----------------------------------------------------------

/// Curvature and coordinate diagnostics for one slice.
#[derive(Debug, Clone)]
pub struct DiagnosticSlice {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma: Vec<f64>,
    pub y: Vec<f64>,
    pub curv: Vec<CurvaturePoint>,
    pub sup_rm: f64,
    /// Monotone-cubic sampler of v as a function of u.
    pub v_of_u: MonotoneCubic,
    /// Sampler of w as a function of u, when the fiber is present.
    pub w_of_u: Option<MonotoneCubic>,
}

/// Pointwise curvature from the L-representation; tip-regular by
/// construction (the sphere sectional L1 is the evolved field itself).
pub fn diagnostics(state: &FlowState, pinch: &ModelPinch) -> Result<DiagnosticSlice, SolverError> {
    let n = state.phi.len();
    let u = state.u();
    let v = state.v();
    let sigma = state.sigma(pinch)?;
    let q = pinch.q;
    let p_dim = pinch.p;
    let mut curv = Vec::with_capacity(n);
    let mut y = vec![0.0; n];
    let phi = &state.phi;
    let l = &state.l;
    let w = state.w.as_ref();
    for i in 0..n {
        let (lp, wp, wpp);
        if i == 0 || i == n - 1 {
            let (a, b, c) = if i == 0 {
                (0, 1, 2)
            } else {
                (n - 3, n - 2, n - 1)
            };
            // One-sided estimates at the ends; the tip knows L' = 0.
            if i == 0 && state.tip {
                lp = 0.0;
                if let Some(w) = w {
                    wp = 0.0;
                    wpp = 2.0 * (w[1] - w[0]) / (phi[1] * phi[1]);
                } else {
                    wp = 0.0;
                    wpp = 0.0;
                }
            } else {
                lp = (l[c] - l[a]) / (phi[c] - phi[a]);
                if let Some(w) = w {
                    wp = (w[c] - w[a]) / (phi[c] - phi[a]);
                    wpp = d2_nonuniform(phi[a], phi[b], phi[c], w[a], w[b], w[c]);
                } else {
                    wp = 0.0;
                    wpp = 0.0;
                }
            }
        } else {
            let (x0, x1, x2) = (phi[i - 1], phi[i], phi[i + 1]);
            lp = d1_nonuniform(x0, x1, x2, l[i - 1], l[i], l[i + 1]);
            if let Some(w) = w {
                wp = d1_nonuniform(x0, x1, x2, w[i - 1], w[i], w[i + 1]);
                wpp = d2_nonuniform(x0, x1, x2, w[i - 1], w[i], w[i + 1]);
            } else {
                wp = 0.0;
                wpp = 0.0;
            }
        }
        let mut c = CurvaturePoint {
            l1: l[i],
            k1: l[i] + 0.5 * phi[i] * lp,
            ..Default::default()
        };
        if let Some(w) = w {
            let wi = w[i];
            let dw_ratio = if i == 0 && state.tip {
                wpp
            } else {
                wp / phi[i]
            };
            y[i] = v[i] * wp * wp / (4.0 * wi);
            c.l2 = if p_dim >= 2 {
                // flat fibers carry sec2 = 0; spherical fibers would add it.
                -v[i] / 16.0 * (wp / wi) * (wp / wi)
            } else {
                0.0
            };
            c.kmix = -v[i] / 8.0 * dw_ratio / wi;
            c.k2 = v[i] / 16.0 * (wp / wi) * (wp / wi) - v[i] / 8.0 * wpp / wi
                + phi[i] * wp * c.k1 / (2.0 * wi);
            c.a_norm_sq = if u[i] > 0.0 {
                0.25 * q as f64 * v[i] / u[i] + 0.25 * p_dim as f64 * y[i] / wi
            } else {
                0.0
            };
        } else if u[i] > 0.0 {
            c.a_norm_sq = 0.25 * q as f64 * v[i] / u[i];
        }
        // Assemble Ricci eigenvalues and scalar curvature by plane sums.
        let (qf, pf) = (q as f64, p_dim as f64);
        c.ric_s = qf * c.k1 + pf * c.k2;
        c.ric_sph = c.k1 + (qf - 1.0) * c.l1 + pf * c.kmix;
        c.ric_fib = if p_dim > 0 {
            c.k2 + (pf - 1.0) * c.l2 + qf * c.kmix
        } else {
            0.0
        };
        c.r = c.ric_s + qf * c.ric_sph + pf * c.ric_fib;
        curv.push(c);
    }
    let sup_rm = curv
        .iter()
        .map(|c| c.max_abs_sectional())
        .fold(0.0, f64::max);
    let v_of_u = MonotoneCubic::from_slices(&u, &v);
    let w_of_u = state.w.as_ref().map(|w| MonotoneCubic::from_slices(&u, w));
    Ok(DiagnosticSlice {
        u,
        v,
        sigma,
        y,
        curv,
        sup_rm,
        v_of_u,
        w_of_u,
    })
}

/// Resample `v` and `w̄` on a uniform σ grid near the tip.
pub fn rescale_tip(
    state: &FlowState,
    pinch: &ModelPinch,
    sigma_view: f64,
    samples: usize,
) -> Result<(Vec<f64>, Vec<f64>, Option<Vec<f64>>), SolverError> {
    let sc = pinch.scales();
    let alpha = sc.alpha(state.t)?;
    let u = state.u();
    let v = state.v();
    let u_view = sigma_view * alpha;
    let covered = u.iter().filter(|&&x| x <= u_view).count();
    if covered < 10 || *u.last().unwrap() < u_view {
        return Err(SolverError::Resolution(format!(
            "only {covered} nodes resolve σ <= {sigma_view}"
        )));
    }
    let vi = MonotoneCubic::from_slices(&u, &v);
    let sigma_grid: Vec<f64> = (0..samples)
        .map(|i| sigma_view * i as f64 / (samples - 1) as f64)
        .collect();
    let v_of_sigma: Vec<f64> = sigma_grid.iter().map(|&s| vi.eval(s * alpha)).collect();
    let wbar = if let Some(w) = &state.w {
        let omega = sc.omega(state.t)?;
        let what: Vec<f64> = w
            .iter()
            .map(|x| (x + pinch.mu_f * state.t) / omega)
            .collect();
        let wi = MonotoneCubic::from_slices(&u, &what);
        Some(sigma_grid.iter().map(|&s| wi.eval(s * alpha)).collect())
    } else {
        None
    };
    Ok((sigma_grid, v_of_sigma, wbar))
}

/// Stored snapshot of a run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub phi: Vec<f64>,
    pub l: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub curv: Vec<CurvaturePoint>,
}

impl Snapshot {
    pub fn u(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p * p).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(&self.l)
            .map(|(p, l)| 4.0 * (1.0 - p * p * l))
            .collect()
    }

    pub fn as_state(&self, m: f64, t1: f64) -> FlowState {
        FlowState {
            t: self.t,
            phi: self.phi.clone(),
            l: self.l.clone(),
            w: self.w.clone(),
            m,
            t1,
            tip: self.phi[0] == 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorEntry {
    pub t: f64,
    pub dt: f64,
    pub min_v: f64,
    pub min_w: Option<f64>,
    pub prish_violations: usize,
    pub tip_violations: usize,
    pub worst_prish_margin: f64,
    pub worst_prish_u: Option<f64>,
    pub worst_tip_margin: f64,
    pub worst_tip_sigma: Option<f64>,
}

#[derive(Debug)]
pub struct Trajectory {
    pub m: f64,
    pub t1: f64,
    pub snapshots: Vec<Snapshot>,
    pub monitor: Vec<MonitorEntry>,
}

/// March the state to `t_end`, snapshotting at the requested output times,
/// with adaptive CFL steps and periodic coarsening regrids as the tip scale
/// grows.
pub fn run(
    mut state: FlowState,
    ctx: &FlowContext,
    t_end: f64,
    output_times: &[f64],
    params: &BarrierParams,
    tables: Option<&BryantTables>,
) -> Result<Trajectory, SolverError> {
    if t_end <= state.t {
        return Err(SolverError::Config("t_end before the state time".into()));
    }
    // The productish closure needs the profile up to û at the boundary.
    if matches!(ctx.right, RightBoundary::Productish) {
        let u_b = state.phi.last().unwrap().powi(2);
        let needed = u_b + ctx.pinch.mu() * t_end;
        if needed > ctx.pinch.v0.u_max {
            return Err(SolverError::Pinch(PinchError::Domain {
                u: needed,
                u_max: ctx.pinch.v0.u_max,
            }));
        }
    }
    let mut outputs: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&t| t > state.t && t <= t_end * (1.0 + 1e-12))
        .collect();
    outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut snapshots = Vec::new();
    let mut monitor = Vec::new();
    let mut next_out = 0usize;
    let regrid_enabled = state.tip && state.m > 0.0;
    let mut alpha_ref = if regrid_enabled {
        ctx.pinch.scales().alpha(state.t)?
    } else {
        f64::INFINITY
    };

    let mut guard = 0usize;
    while state.t < t_end - 1e-18 {
        guard += 1;
        if guard > 500_000_000 {
            return Err(SolverError::CflViolation("step budget exhausted".into()));
        }
        let mut dt = cfl_dt(&state, ctx.pinch, ctx.cfl);
        if !dt.is_finite() || dt <= 0.0 {
            return Err(SolverError::CflViolation(format!("dt = {dt}")));
        }
        let mut hit_output = false;
        if next_out < outputs.len() && state.t + dt >= outputs[next_out] {
            dt = outputs[next_out] - state.t;
            hit_output = true;
        } else if state.t + dt > t_end {
            dt = t_end - state.t;
        }
        state = step(&state, dt, ctx)?;
        if hit_output {
            state.t = outputs[next_out];
            next_out += 1;
            let diag = diagnostics(&state, ctx.pinch)?;
            let entry = monitor_entry(&state, &diag, ctx.pinch, params, tables, dt)?;
            monitor.push(entry);
            snapshots.push(Snapshot {
                t: state.t,
                phi: state.phi.clone(),
                l: state.l.clone(),
                w: state.w.clone(),
                curv: diag.curv,
            });
        }
        if regrid_enabled {
            let alpha_now = ctx.pinch.scales().alpha(state.t)?;
            if alpha_now > 2.0 * alpha_ref {
                state = regrid(&state, ctx.pinch)?;
                alpha_ref = alpha_now;
            }
        }
    }
    Ok(Trajectory {
        m: state.m,
        t1: state.t1,
        snapshots,
        monitor,
    })
}

fn monitor_entry(
    state: &FlowState,
    diag: &DiagnosticSlice,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: Option<&BryantTables>,
    dt: f64,
) -> Result<MonitorEntry, SolverError> {
    let min_v = diag.v.iter().copied().fold(f64::INFINITY, f64::min);
    let min_w = state
        .w
        .as_ref()
        .map(|w| w.iter().copied().fold(f64::INFINITY, f64::min));
    let (mut pv, mut tv) = (0usize, 0usize);
    let (mut wp, mut wt) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut wpu, mut wts) = (None, None);
    if let Some(tables) = tables {
        let b = barriers::barricade_snapshot(
            state.t,
            &diag.u,
            &diag.v,
            state.w.as_deref(),
            pinch,
            params,
            tables,
        )?;
        pv = b.prish_violations;
        tv = b.tip_violations;
        wp = b.worst_prish_margin;
        wt = b.worst_tip_margin;
        wpu = b.worst_prish_u;
        wts = b.worst_tip_sigma;
    }
    Ok(MonitorEntry {
        t: state.t,
        dt,
        min_v,
        min_w,
        prish_violations: pv,
        tip_violations: tv,
        worst_prish_margin: wp,
        worst_prish_u: wpu,
        worst_tip_margin: wt,
        worst_tip_sigma: wts,
    })
}

/// Rebuild the graded grid for the current tip scale and interpolate the
/// state onto it. Coarsening the tip cluster as √(tν) grows keeps the
/// explicit CFL step proportional to the running scale.
fn regrid(state: &FlowState, pinch: &ModelPinch) -> Result<FlowState, SolverError> {
    let sc = pinch.scales();
    let alpha = sc.alpha(state.t)?;
    let n = state.phi.len();
    let phi_b = *state.phi.last().unwrap();
    let new_phi = two_zone_grid(n, phi_b, alpha.sqrt() / 20.0, None)?;
    let li = MonotoneCubic::from_slices(&state.phi, &state.l);
    let new_l: Vec<f64> = new_phi.iter().map(|&p| li.eval(p)).collect();
    let new_w = if let Some(w) = &state.w {
        let wi = MonotoneCubic::from_slices(&state.phi, w);
        Some(new_phi.iter().map(|&p| wi.eval(p)).collect())
    } else {
        None
    };
    let out = FlowState {
        t: state.t,
        phi: new_phi,
        l: new_l,
        w: new_w,
        m: state.m,
        t1: state.t1,
        tip: true,
    };
    out.validate()?;
    Ok(out)
}

// --- CSV I/O ----------------------------------------------------------------

/// Snapshot CSV with the fixed column set; 17 significant digits keeps the
/// round trip byte-identical.
pub fn snapshot_to_csv(snap: &Snapshot, pinch: &ModelPinch) -> String {
    let mut s = String::from("t,phi,u,v,w,L,sigma,L1,L2,K1,K2,Kmix,R\n");
    let alpha = pinch.scales().alpha(snap.t).unwrap_or(f64::NAN);
    for i in 0..snap.phi.len() {
        let u = snap.phi[i] * snap.phi[i];
        let v = 4.0 * (1.0 - u * snap.l[i]);
        let w = snap.w.as_ref().map(|w| w[i]).unwrap_or(0.0);
        let c = &snap.curv[i];
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            snap.t, snap.phi[i], u, v, w, snap.l[i], u / alpha, c.l1, c.l2, c.k1, c.k2, c.kmix, c.r
        ));
    }
    s
}

pub fn snapshot_from_csv(text: &str, has_fiber: bool) -> Result<Snapshot, SolverError> {
    let mut phi = Vec::new();
    let mut l = Vec::new();
    let mut w = Vec::new();
    let mut curv = Vec::new();
    let mut t = 0.0;
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SolverError::Config(format!("csv line {}: {e}", ln + 1)))?;
        if cols.len() != 13 {
            return Err(SolverError::Config(format!(
                "csv line {}: expected 13 columns, got {}",
                ln + 1,
                cols.len()
            )));
        }
        t = cols[0];
        phi.push(cols[1]);
        l.push(cols[5]);
        w.push(cols[4]);
        curv.push(CurvaturePoint {
            l1: cols[7],
            l2: cols[8],
            k1: cols[9],
            k2: cols[10],
            kmix: cols[11],
            r: cols[12],
            ..Default::default()
        });
    }
    if phi.len() < 3 {
        return Err(SolverError::Config("csv too short".into()));
    }
    for (i, pair) in phi.windows(2).enumerate() {
        if !(pair[1] > pair[0]) || !pair[0].is_finite() {
            return Err(SolverError::Config(format!(
                "csv grid not strictly increasing near row {}",
                i + 2
            )));
        }
    }
    if l.iter().any(|x| !x.is_finite()) || w.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::Config("csv contains non-finite fields".into()));
    }
    Ok(Snapshot {
        t,
        phi,
        l,
        w: if has_fiber { Some(w) } else { None },
        curv,
    })
}
