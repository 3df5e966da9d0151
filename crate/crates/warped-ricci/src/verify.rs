//! Post-hoc verification: the warped Anderson-Chow inequality and the
//! curvature-operator norm with its brute-force oracle, plus trajectory
//! checks for barricading, curvature bounds, soliton convergence,
//! approximate-solution residuals, mollification convergence, and the
//! initial-time convergence rate. All checks are pure functions of
//! trajectories and report margins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::{self, BarrierParams, SnapshotBarricade};
use crate::bryant::BryantTables;
use crate::interp::MonotoneCubic;
use crate::numeric::{d1_nonuniform, d2_nonuniform, loglog_slope};
use crate::pinch::{ModelPinch, Profile};
use crate::solver::{self, Snapshot, Trajectory};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("not enough data: {0}")]
    NotEnoughData(String),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Barrier(#[from] barriers::BarrierError),
    #[error(transparent)]
    Pinch(#[from] crate::pinch::PinchError),
}

/// Stable report schema shared by all checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub status: String,
    pub margins: serde_json::Value,
    pub fit_constants: serde_json::Value,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == "pass" || self.status == "skipped"
    }
}

// --- Anderson-Chow ----------------------------------------------------------

/// `A(α, q) = qα² + (α+1)² − ½(2α+1)(1 + √(4qα²+1))`, the normalized
/// nonnegative combination `(|Rc|² − R·Λ_Rm)/(q(q−1)²L²)` on singly warped
/// products with nonnegative curvature.
pub fn ac_quantity(alpha: f64, q: u32) -> f64 {
    let qf = q as f64;
    qf * alpha * alpha + (alpha + 1.0) * (alpha + 1.0)
        - 0.5 * (2.0 * alpha + 1.0) * (1.0 + (4.0 * qf * alpha * alpha + 1.0).sqrt())
}

/// Largest eigenvalue of the curvature operator on symmetric 2-tensors for
/// the singly warped model: `Λ_Rm = (q−1)L·½(1 + √(4qα²+1))` with
/// `α = K/((q−1)L)`; the `L → 0` limit is `√q·K`.
pub fn lambda_rm_singly(k: f64, l: f64, q: u32) -> f64 {
    let qf = q as f64;
    if l <= 0.0 {
        return qf.sqrt() * k;
    }
    let alpha = k / ((qf - 1.0) * l);
    (qf - 1.0) * l * 0.5 * (1.0 + (4.0 * qf * alpha * alpha + 1.0).sqrt())
}

/// Brute-force oracle: assemble the curvature operator on Sym²(T_pM) for
/// the (1+q)-dimensional singly warped model from its sectional curvatures
/// and take the top eigenvalue by shifted power iteration.
pub fn lambda_rm_brute_force(k: f64, l: f64, q: u32) -> f64 {
    let n = 1 + q as usize;
    let kappa = |a: usize, b: usize| -> f64 {
        if a == b {
            0.0
        } else if a == 0 || b == 0 {
            k
        } else {
            l
        }
    };
    // Operator on symmetric matrices: (Mh)_{aa} = Σ_{i≠a} κ(a,i) h_{ii},
    // (Mh)_{ab} = −κ(a,b) h_{ab} for a ≠ b. This is the gradient of
    // ⟨Rm[h], h⟩ = Σ_{a≠i} κ(a,i)(h_{aa}h_{ii} − h_{ai}²).
    let apply = |h: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for i in 0..n {
                if i != a {
                    out[a * n + a] += kappa(a, i) * h[i * n + i];
                }
            }
            for b in 0..n {
                if b != a {
                    out[a * n + b] = -kappa(a, b) * h[a * n + b];
                }
            }
        }
        out
    };
    // Shift to make the operator positive, then power-iterate.
    let shift = 2.0 * (k.abs() + l.abs()) * n as f64 + 1.0;
    let mut h: Vec<f64> = (0..n * n)
        .map(|i| 1.0 + 0.1 * ((i * 37 + 11) % 17) as f64)
        .collect();
    // Symmetrize the start.
    for a in 0..n {
        for b in 0..a {
            let m = 0.5 * (h[a * n + b] + h[b * n + a]);
            h[a * n + b] = m;
            h[b * n + a] = m;
        }
    }
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let mut next = apply(&h);
        for i in 0..n * n {
            next[i] += shift * h[i];
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut next {
            *x /= norm;
        }
        let mh = apply(&next);
        let ray: f64 = next.iter().zip(&mh).map(|(a, b)| a * b).sum();
        if (ray - lambda).abs() < 1e-15 * (1.0 + ray.abs()) {
            return ray;
        }
        lambda = ray;
        h = next;
    }
    lambda
}

// --- Trajectory checks -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationReport {
    pub per_snapshot: Vec<ScoredBarricade>,
    pub total_prish_violations: usize,
    pub total_tip_violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredBarricade {
    pub scored: bool,
    #[serde(flatten)]
    pub data: SnapshotBarricade,
}

/// Replay the barricade check on every snapshot; snapshots past the
/// configured T_* are reported but unscored.
pub fn barricade_monitor(
    traj: &Trajectory,
    pinch: &ModelPinch,
    params: &BarrierParams,
    tables: &BryantTables,
) -> Result<ViolationReport, VerifyError> {
    let mut per = Vec::new();
    let (mut tp, mut tt) = (0usize, 0usize);
    for snap in &traj.snapshots {
        let scored = snap.t <= params.t_star;
        let data = barriers::barricade_snapshot(
            snap.t,
            &snap.u(),
            &snap.v(),
            snap.w.as_deref(),
            pinch,
            params,
            tables,
        )?;
        if scored {
            tp += data.prish_violations;
            tt += data.tip_violations;
        }
        per.push(ScoredBarricade { scored, data });
    }
    Ok(ViolationReport {
        per_snapshot: per,
        total_prish_violations: tp,
        total_tip_violations: tt,
        pass: tp == 0 && tt == 0,
    })
}

impl ViolationReport {
    pub fn to_check_report(&self) -> CheckReport {
        CheckReport {
            check: "barricade".into(),
            status: if self.pass { "pass" } else { "fail" }.into(),
            margins: serde_json::json!({
                "prish_violations": self.total_prish_violations,
                "tip_violations": self.total_tip_violations,
                "worst_prish": self.per_snapshot.iter().map(|s| s.data.worst_prish_margin).fold(f64::NEG_INFINITY, f64::max),
                "worst_tip": self.per_snapshot.iter().map(|s| s.data.worst_tip_margin).fold(f64::NEG_INFINITY, f64::max),
            }),
            fit_constants: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureBoundReport {
    /// (t, sup|Rm|·tν) over the tip region per snapshot.
    pub tip_series: Vec<(f64, f64)>,
    pub tip_slope: f64,
    pub tip_applicable: bool,
    /// (t, sup over productish of |Rm|·u) per snapshot.
    pub prish_series: Vec<(f64, f64)>,
    pub prish_slope: f64,
    pub prish_applicable: bool,
    pub pass: bool,
}

/// Scale-invariant curvature caps: `|Rm|·tν(t)` in the tip region and
/// `|Rm|·u` in the productish region must have flat trends as t varies.
pub fn curvature_bound_check(
    traj: &Trajectory,
    pinch: &ModelPinch,
    params: &BarrierParams,
) -> Result<CurvatureBoundReport, VerifyError> {
    let sc = pinch.scales();
    // Case gates from the corollaries' hypotheses.
    let tip_applicable = pinch.mu_f != 0.0 || pinch.fiber_flat || pinch.p == 0;
    let prish_applicable =
        pinch.mu_f > 0.0 || pinch.p == 0 || (pinch.mu_f <= 0.0 && pinch.fiber_flat);
    let mut tip_series = Vec::new();
    let mut prish_series = Vec::new();
    for snap in &traj.snapshots {
        let alpha = sc.alpha(snap.t)?;
        let nu = sc.nu(snap.t)?;
        let u = snap.u();
        let mut tip_max: f64 = 0.0;
        let mut prish_max: f64 = 0.0;
        for (i, c) in snap.curv.iter().enumerate() {
            let rm =
                c.l1.abs()
                    .max(c.l2.abs())
                    .max(c.k1.abs())
                    .max(c.k2.abs())
                    .max(c.kmix.abs());
            let sigma = u[i] / alpha;
            if sigma < params.zeta_star / nu.sqrt() {
                tip_max = tip_max.max(rm);
            }
            if barriers::in_productish_region(u[i], snap.t, pinch, params) {
                prish_max = prish_max.max(rm * u[i]);
            }
        }
        tip_series.push((snap.t, tip_max * alpha));
        if prish_max > 0.0 {
            prish_series.push((snap.t, prish_max));
        }
    }
    let slope_of = |series: &[(f64, f64)]| -> f64 {
        if series.len() < 3 {
            return 0.0;
        }
        let xs: Vec<f64> = series.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = series.iter().map(|p| p.1).collect();
        loglog_slope(&xs, &ys)
    };
    let tip_slope = slope_of(&tip_series);
    let prish_slope = slope_of(&prish_series);
    let pass = (!tip_applicable || tip_slope.abs() <= 0.2)
        && (!prish_applicable || prish_series.len() < 3 || prish_slope.abs() <= 0.2);
    Ok(CurvatureBoundReport {
        tip_series,
        tip_slope,
        tip_applicable,
        prish_series,
        prish_slope,
        prish_applicable,
        pass,
    })
}

impl CurvatureBoundReport {
    pub fn to_check_report(&self) -> CheckReport {
        CheckReport {
            check: "curvature_bound".into(),
            status: if self.pass { "pass" } else { "fail" }.into(),
            margins: serde_json::json!({
                "tip_slope": self.tip_slope,
                "prish_slope": self.prish_slope,
            }),
            fit_constants: serde_json::json!({
                "tip_cap": self.tip_series.iter().map(|p| p.1).fold(0.0, f64::max),
                "prish_cap": self.prish_series.iter().map(|p| p.1).fold(0.0, f64::max),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// (t, e(t), ν(t)) with e = sup_{σ<=σ_view} |v_rescaled − V_Bry|.
    pub series: Vec<(f64, f64, f64)>,
    pub decreasing_toward_zero_time: bool,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub skipped: bool,
    pub pass: bool,
}

/// Tip convergence to the soliton profile: e(t) must shrink toward t → 0
/// with e/ν bounded.
pub fn bryant_convergence_check(
    traj: &Trajectory,
    pinch: &ModelPinch,
    tables: &BryantTables,
    sigma_view: f64,
    last_n: usize,
) -> Result<ConvergenceReport, VerifyError> {
    if traj.m == 0.0 {
        // Harness runs carry no mollified pinch data; not applicable.
        return Ok(ConvergenceReport {
            series: Vec::new(),
            decreasing_toward_zero_time: true,
            ratio_min: 0.0,
            ratio_max: 0.0,
            skipped: true,
            pass: true,
        });
    }
    if traj.snapshots.len() < 4 {
        return Err(VerifyError::NotEnoughData(format!(
            "{} snapshots, need at least 4",
            traj.snapshots.len()
        )));
    }
    let sc = pinch.scales();
    let mut series = Vec::new();
    for snap in &traj.snapshots {
        let state = snap.as_state(traj.m, traj.t1);
        let (sg, v_resc, _) = solver::rescale_tip(&state, pinch, sigma_view, 161)?;
        let mut e: f64 = 0.0;
        for (s, v) in sg.iter().zip(&v_resc) {
            e = e.max((v - tables.v_bry(*s).map_err(solver::SolverError::from)?).abs());
        }
        series.push((snap.t, e, sc.nu(snap.t)?));
    }
    let tail = &series[series.len().saturating_sub(last_n)..];
    let decreasing = tail.windows(2).all(|w| w[0].1 < w[1].1);
    let ratios: Vec<f64> = series.iter().map(|(_, e, nu)| e / nu).collect();
    let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().copied().fold(0.0, f64::max);
    let pass = decreasing && ratio_min >= 0.05 && ratio_max <= 20.0;
    Ok(ConvergenceReport {
        series,
        decreasing_toward_zero_time: decreasing,
        ratio_min,
        ratio_max,
        skipped: false,
        pass,
    })
}

impl ConvergenceReport {
    pub fn to_check_report(&self) -> CheckReport {
        CheckReport {
            check: "bryant_convergence".into(),
            status: if self.skipped {
                "skipped"
            } else if self.pass {
                "pass"
            } else {
                "fail"
            }
            .into(),
            margins: serde_json::json!({
                "ratio_min": self.ratio_min,
                "ratio_max": self.ratio_max,
                "decreasing": self.decreasing_toward_zero_time,
            }),
            fit_constants: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppendixAReport {
    /// (t, sup|E|) over the productish nodes per snapshot.
    pub series: Vec<(f64, f64)>,
    /// Fitted cap coefficient sup|E|/(1 + |⟨Z₀⟩₁| + |⟨Z₀⟩₂|).
    pub cap: f64,
    pub log_derivative_budget: f64,
    pub slope: f64,
    pub pass: bool,
}

/// Pointwise defect of the approximate solution `Z = Q^a (Z₀ ∘ û)` against
/// the reaction-diffusion equation it nearly solves:
/// `(□ − aμu⁻¹)Z = E·u⁻¹ v Z`, with the Laplacian taken in the evolving
/// metric read off the trajectory.
pub fn appendix_a_residual(
    traj: &Trajectory,
    pinch: &ModelPinch,
    params: &BarrierParams,
    z0: &Profile,
    a: f64,
) -> Result<AppendixAReport, VerifyError> {
    let mu = pinch.mu();
    let mut series = Vec::new();
    let mut budget: f64 = 0.0;
    for snap in &traj.snapshots {
        let t = snap.t;
        let u = snap.u();
        let v = snap.v();
        let n = u.len();
        let mut sup_e: f64 = 0.0;
        for i in 1..n - 1 {
            if !barriers::in_productish_region(u[i], t, pinch, params) {
                continue;
            }
            let ui = u[i];
            if ui + mu * t > z0.u_max {
                continue;
            }
            let e = match residual_coefficient(ui, t, v[i], z0, a, mu) {
                Some(e) => e,
                None => continue,
            };
            sup_e = sup_e.max(e.abs());
            let hat = ui + mu * t;
            let z0v = z0.eval_unchecked(hat);
            let z0d = z0.d1_unchecked(hat);
            let z0dd = z0.d2_unchecked(hat);
            let lg1 = (hat * z0d / z0v).abs();
            let lg2 = (hat * hat * z0dd / z0v).abs();
            budget = budget.max(1.0 + lg1 + lg2);
        }
        if sup_e > 0.0 {
            series.push((t, sup_e));
        }
    }
    if series.is_empty() {
        return Err(VerifyError::NotEnoughData(
            "no productish nodes resolved the residual".into(),
        ));
    }
    let cap = series.iter().map(|p| p.1).fold(0.0, f64::max) / budget;
    let xs: Vec<f64> = series.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1).collect();
    let slope = if series.len() >= 3 {
        loglog_slope(&xs, &ys)
    } else {
        0.0
    };
    let pass = cap.is_finite() && slope.abs() <= 0.2;
    Ok(AppendixAReport {
        series,
        cap,
        log_derivative_budget: budget,
        slope,
        pass,
    })
}

impl AppendixAReport {
    pub fn to_check_report(&self) -> CheckReport {
        CheckReport {
            check: "appendix_a_residual".into(),
            status: if self.pass { "pass" } else { "fail" }.into(),
            margins: serde_json::json!({"slope": self.slope}),
            fit_constants: serde_json::json!({
                "cap": self.cap,
                "budget": self.log_derivative_budget,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollificationReport {
    /// (m_coarse, m_fine, d) per consecutive pair.
    pub diffs: Vec<(f64, f64, f64)>,
    pub strictly_decreasing: bool,
}

/// Final-time differences between runs with halving mollification scales,
/// measured in v over a fixed u window.
pub fn mollification_convergence(
    runs: &[(f64, &Trajectory)],
    u_window: (f64, f64),
) -> Result<MollificationReport, VerifyError> {
    if runs.len() < 2 {
        return Err(VerifyError::MismatchedRuns("need at least two runs".into()));
    }
    let (ua, ub) = u_window;
    if ub <= ua {
        return Err(VerifyError::MismatchedRuns(format!(
            "empty u window [{ua}, {ub}]"
        )));
    }
    let mut sorted: Vec<&(f64, &Trajectory)> = runs.iter().collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let final_v = |traj: &Trajectory| -> Result<(f64, MonotoneCubic), VerifyError> {
        let snap = traj
            .snapshots
            .last()
            .ok_or_else(|| VerifyError::NotEnoughData("run with no snapshots".into()))?;
        let u = snap.u();
        if *u.last().unwrap() < ub || u[0] > ua {
            return Err(VerifyError::MismatchedRuns(format!(
                "u window [{ua}, {ub}] outside run range"
            )));
        }
        Ok((snap.t, MonotoneCubic::from_slices(&u, &snap.v())))
    };
    let mut diffs = Vec::new();
    for pair in sorted.windows(2) {
        let (m0, t0) = (pair[0].0, pair[0].1);
        let (m1, t1) = (pair[1].0, pair[1].1);
        let (ta, va) = final_v(t0)?;
        let (tb, vb) = final_v(t1)?;
        if (ta - tb).abs() > 1e-12 * ta.max(tb) {
            return Err(VerifyError::MismatchedRuns(format!(
                "final output times differ: {ta} vs {tb}"
            )));
        }
        let mut d: f64 = 0.0;
        for i in 0..200 {
            let u = ua + (ub - ua) * i as f64 / 199.0;
            d = d.max((va.eval(u) - vb.eval(u)).abs());
        }
        diffs.push((m0, m1, d));
    }
    let strictly_decreasing = diffs.windows(2).all(|w| w[1].2 < w[0].2);
    Ok(MollificationReport {
        diffs,
        strictly_decreasing,
    })
}

impl MollificationReport {
    pub fn to_check_report(&self) -> CheckReport {
        CheckReport {
            check: "mollification_convergence".into(),
            status: if self.strictly_decreasing || self.diffs.len() < 2 {
                "pass"
            } else {
                "fail"
            }
            .into(),
            margins: serde_json::json!(self.diffs),
            fit_constants: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialRateReport {
    /// (u₀, t, ratio) for the sphere-factor drift |∂_t u + μ| / v₀.
    pub u_samples: Vec<(f64, f64, f64)>,
    /// (u₀, t, ratio) for the fiber drift |∂_t w + μ_F|·u₀/(w₀ v₀).
    pub w_samples: Vec<(f64, f64, f64)>,
    pub c0: f64,
    pub trend_slope: f64,
    pub pass: bool,
}

/// Early-time drift of the metric components beyond the linear reaction:
/// `∂_t u + μ = Δ_M u − v` evaluated from single slices, compared against
/// the pointwise budget `C₀ v₀`.
pub fn initial_convergence_rate(
    traj: &Trajectory,
    pinch: &ModelPinch,
    u0_samples: &[f64],
    eps0: f64,
) -> Result<InitialRateReport, VerifyError> {
    let mu = pinch.mu();
    let (qf, pf) = (pinch.q as f64, pinch.p as f64);
    let mut u_samples = Vec::new();
    let mut w_samples = Vec::new();
    for snap in &traj.snapshots {
        let t = snap.t;
        let u = snap.u();
        let v = snap.v();
        let n = u.len();
        for &u0 in u0_samples {
            if t >= eps0 * u0 {
                continue;
            }
            // Locate the grid node nearest the (drifted) level u₀ − μt.
            let target = u0 - mu * t;
            let mut idx = 1usize;
            for i in 1..n - 1 {
                if (u[i] - target).abs() < (u[idx] - target).abs() {
                    idx = i;
                }
            }
            if idx == 0 || idx + 1 >= n {
                continue;
            }
            let (x0, x1, x2) = (u[idx - 1], u[idx], u[idx + 1]);
            let dv = d1_nonuniform(x0, x1, x2, v[idx - 1], v[idx], v[idx + 1]);
            let v0 = pinch.v0.eval_unchecked(u0);
            // Δ_M u = ½(v + u ∂_u v) + ½qv + ½p u v w⁻¹ ∂_u w.
            let mut lap_u = 0.5 * (v[idx] + x1 * dv) + 0.5 * qf * v[idx];
            if let Some(w) = &snap.w {
                let dw = d1_nonuniform(x0, x1, x2, w[idx - 1], w[idx], w[idx + 1]);
                lap_u += 0.5 * pf * x1 * v[idx] * dw / w[idx];
                // Fiber drift: ∂_t w + μ_F = Δ_M w − y.
                let d2w = d2_nonuniform(x0, x1, x2, w[idx - 1], w[idx], w[idx + 1]);
                let lap_w = x1 * v[idx] * d2w
                    + 0.5 * (v[idx] + x1 * dv) * dw
                    + 0.5 * qf * v[idx] * dw
                    + 0.5 * pf * x1 * v[idx] * dw * dw / w[idx];
                let y = x1 * v[idx] * dw * dw / w[idx];
                let w0 = pinch.w0()?.eval_unchecked(u0);
                w_samples.push((u0, t, (lap_w - y).abs() * u0 / (w0 * v0)));
            }
            u_samples.push((u0, t, (lap_u - v[idx]).abs() / v0));
        }
    }
    if u_samples.is_empty() {
        return Err(VerifyError::NotEnoughData(
            "no snapshots inside the early-time window".into(),
        ));
    }
    let c0 = u_samples
        .iter()
        .map(|s| s.2)
        .chain(w_samples.iter().map(|s| s.2))
        .fold(0.0, f64::max);
    let xs: Vec<f64> = u_samples.iter().map(|s| s.1).collect();
    let ys: Vec<f64> = u_samples.iter().map(|s| s.2.max(1e-300)).collect();
    let trend_slope = if u_samples.len() >= 3 {
        loglog_slope(&xs, &ys)
    } else {
        0.0
    };
    let pass = c0.is_finite();
    Ok(InitialRateReport {
        u_samples,
        w_samples,
        c0,
        trend_slope,
        pass,
    })
}

impl InitialRateReport {
    pub fn to_check_report(&self) -> CheckReport {
        CheckReport {
            check: "initial_convergence_rate".into(),
            status: if self.pass { "pass" } else { "fail" }.into(),
            margins: serde_json::json!({"trend_slope": self.trend_slope}),
            fit_constants: serde_json::json!({"c0": self.c0}),
        }
    }
}

/// Pointwise coefficient E in `(□ − aμu⁻¹)Z = E·u⁻¹vZ` for the approximate
/// solution `Z = Q^a (Z₀ ∘ û)`, with the heat operator taken along a flow
/// whose coordinate field at this point is v. The Laplacian of u cancels
/// against the u-evolution, leaving
/// `E = [∂_t|_u Z − (μ+v)∂_u Z − uv ∂_u²Z − aμu⁻¹Z]·u/(vZ)`.
pub fn residual_coefficient(u: f64, t: f64, v: f64, z0: &Profile, a: f64, mu: f64) -> Option<f64> {
    let hat = u + mu * t;
    if hat > z0.u_max || v <= 0.0 {
        return None;
    }
    let q_f = hat / u;
    let z0v = z0.eval_unchecked(hat);
    let z0d = z0.d1_unchecked(hat);
    let z0dd = z0.d2_unchecked(hat);
    let z = q_f.powf(a) * z0v;
    if z.abs() < 1e-300 {
        return None;
    }
    let dq = -mu * t / (u * u);
    let d2q = 2.0 * mu * t / (u * u * u);
    let dqa = a * q_f.powf(a - 1.0) * dq;
    let d2qa = a * (a - 1.0) * q_f.powf(a - 2.0) * dq * dq + a * q_f.powf(a - 1.0) * d2q;
    let dz = dqa * z0v + q_f.powf(a) * z0d;
    let d2z = d2qa * z0v + 2.0 * dqa * z0d + q_f.powf(a) * z0dd;
    let dtz = a * q_f.powf(a - 1.0) * (mu / u) * z0v + q_f.powf(a) * z0d * mu;
    let numer = dtz - (mu + v) * dz - u * v * d2z - a * mu / u * z;
    Some(numer * u / (v * z))
}

/// Tip-region e(t) for a synthetic slice built from the tip approximation:
/// used by the construction tests.
pub fn synthetic_tip_error(
    pinch: &ModelPinch,
    tables: &BryantTables,
    t: f64,
    sigma_view: f64,
) -> Result<f64, VerifyError> {
    let beta = pinch.scales().beta(t)?;
    let mut e: f64 = 0.0;
    for i in 0..200 {
        let s = sigma_view * i as f64 / 199.0;
        e = e.max((beta * tables.v_pert(s).map_err(solver::SolverError::from)?).abs());
    }
    Ok(e)
}

/// Worst snapshot sup|Rm| restricted to the tip region (helper for reports).
pub fn tip_sup_rm(snap: &Snapshot, pinch: &ModelPinch, params: &BarrierParams) -> Option<f64> {
    let sc = pinch.scales();
    let alpha = sc.alpha(snap.t).ok()?;
    let nu = sc.nu(snap.t).ok()?;
    let u = snap.u();
    let mut best: f64 = 0.0;
    for (i, c) in snap.curv.iter().enumerate() {
        if u[i] / alpha < params.zeta_star / nu.sqrt() {
            best = best.max(c.max_abs_sectional());
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{logspace, Rng};

    #[test]
    fn ac_quantity_zeros_and_positivity() {
        for q in 2..=9u32 {
            let qf = q as f64;
            // α = 1/(q−1): constant-curvature equality, using
            // 4qα² + 1 = ((q+1)/(q−1))².
            let alpha = 1.0 / (qf - 1.0);
            assert!(ac_quantity(alpha, q).abs() < 1e-10, "q={q}");
            assert!(ac_quantity(0.0, q).abs() < 1e-12, "q={q}");
            for &a in &logspace(1e-6, 1e6, 60) {
                let v = ac_quantity(a, q);
                assert!(v >= -1e-12, "A({a}, {q}) = {v}");
            }
        }
    }

    #[test]
    fn ac_quantity_grows_with_q() {
        // dA/dq = α²(1 − (2α+1)/√(4qα²+1)) is nonnegative for α >= 1; for
        // smaller α it can dip below zero by at most O(α³), which never
        // threatens A >= 0.
        for &alpha in &[1.0, 10.0, 1e4] {
            for q in 2..9u32 {
                let lo = ac_quantity(alpha, q);
                let hi = ac_quantity(alpha, q + 1);
                assert!(hi >= lo - 1e-12, "alpha={alpha}, q={q}: {lo} -> {hi}");
            }
        }
        for &alpha in &[1e-3f64, 0.1] {
            for q in 2..9u32 {
                let lo = ac_quantity(alpha, q);
                let hi = ac_quantity(alpha, q + 1);
                assert!(
                    hi >= lo - 2.5 * alpha.powi(3),
                    "alpha={alpha}, q={q}: {lo} -> {hi}"
                );
                assert!(hi >= -1e-12);
            }
        }
    }

    #[test]
    fn ac_large_alpha_positive_growth() {
        let a = 1e6;
        let v = ac_quantity(a, 2);
        assert!(v > 0.0);
        // grows quadratically with positive leading coefficient.
        let v2 = ac_quantity(2.0 * a, 2);
        assert!(v2 > 3.0 * v);
    }

    #[test]
    fn lambda_formula_examples() {
        // K = 0 ⟹ Λ = (q−1)L.
        assert!((lambda_rm_singly(0.0, 0.7, 3) - 2.0 * 0.7).abs() < 1e-14);
        // Constant curvature K = L, q = 2 ⟹ Λ = 2L.
        assert!((lambda_rm_singly(0.5, 0.5, 2) - 1.0).abs() < 1e-14);
        // L → 0 limit is √q·K.
        assert!((lambda_rm_singly(0.8, 0.0, 4) - 2.0 * 0.8).abs() < 1e-14);
    }

    #[test]
    fn lambda_matches_brute_force_oracle() {
        let mut rng = Rng::new(20240801);
        for _ in 0..100 {
            let q = 2 + (rng.next_u64() % 8) as u32;
            let k = rng.log_range(1e-3, 1e3);
            let l = rng.log_range(1e-3, 1e3);
            let formula = lambda_rm_singly(k, l, q);
            let brute = lambda_rm_brute_force(k, l, q);
            assert!(
                (formula - brute).abs() <= 1e-10 * (1.0 + formula.abs()),
                "q={q}, K={k}, L={l}: {formula} vs {brute}"
            );
        }
    }

    #[test]
    fn brute_force_limit_case() {
        // K = L, q = 2 cross-check of the worked constant: Λ = 2L.
        let v = lambda_rm_brute_force(1.0, 1.0, 2);
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn residual_coefficient_cases() {
        use crate::pinch::Profile;
        // Constant data with a = 0 is an exact solution: E ≡ 0.
        let one = Profile::constant(1.0);
        for &(u, t, v) in &[(0.1, 1e-3, 0.2), (0.4, 1e-2, 0.05)] {
            let e = residual_coefficient(u, t, v, &one, 0.0, 2.0).unwrap();
            assert!(e.abs() < 1e-14, "E = {e}");
        }
        // For Z₀ = V₀ (a = 1) evaluated with the frozen-reaction field
        // v = V_prish itself, E = -(⟨Z⟩₁ + ⟨Z⟩₂) stays bounded by the
        // log-derivative budget.
        let pinch = crate::pinch::builtin("ak-neckpinch").unwrap();
        for &(u, t) in &[(1e-3, 1e-4), (1e-2, 1e-3), (0.03, 1e-3)] {
            let v = crate::pinch::v_prish(u, t, &pinch).unwrap();
            let e = residual_coefficient(u, t, v, &pinch.v0, 1.0, pinch.mu()).unwrap();
            let hat = u + pinch.mu() * t;
            let budget = 1.0
                + pinch.v0.log_deriv(1, hat).unwrap().abs()
                + pinch.v0.log_deriv(2, hat).unwrap().abs();
            assert!(e.abs() <= 4.0 * budget, "E = {e}, budget {budget}");
        }
    }

    #[test]
    fn mollification_window_guard() {
        let err = mollification_convergence(&[], (0.1, 0.2));
        assert!(err.is_err());
    }
}
