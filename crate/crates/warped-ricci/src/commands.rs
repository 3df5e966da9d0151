//! Command implementations behind the CLI: soliton table solves, mollified
//! flow runs with an m sweep, post-hoc verification of stored runs, and
//! plot-script emission. Exit codes: 0 pass, 1 check failure, 2 usage or
//! configuration error, 3 runtime error.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barriers::{self, BarrierParams};
use crate::bryant::{self, BryantTables};
use crate::config::RunConfig;
use crate::numeric::logspace;
use crate::pinch::{self, ModelPinch};
use crate::solver::{self, FlowContext, GridSpec, Trajectory};
use crate::verify;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Error carrying its intended process exit code.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

impl CmdError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_RUNTIME,
            message: msg.into(),
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn io_err(e: std::io::Error) -> CmdError {
    CmdError::runtime(format!("io error: {e}"))
}

/// Worker cap from the environment, at least 1.
pub fn thread_cap() -> usize {
    std::env::var("WARPED_RICCI_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(4)
}

// --- bryant ------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct BryantReport {
    pub summary: bryant::BryantSummary,
    /// σ·v/μ over the last decade of the table.
    pub sigma_v_over_mu_tail: Vec<f64>,
    /// W_Pert/σ over the last decade, with the measured asymptotic slope
    /// in units of 1/μ.
    pub w_pert_slope_tail: Vec<f64>,
    pub w_pert_slope_times_mu: f64,
}

pub fn cmd_bryant(q: u32, sigma_max: f64, tol: f64, out: &Path) -> Result<i32, CmdError> {
    if q < 2 {
        return Err(CmdError::usage(format!("q = {q} must be at least 2")));
    }
    let tables = bryant::solve(q, sigma_max, tol)
        .map_err(|e| CmdError::runtime(format!("bryant solve failed: {e}")))?;
    fs::create_dir_all(out).map_err(io_err)?;
    fs::write(out.join("bryant.csv"), tables.to_csv()).map_err(io_err)?;
    let mut svm = Vec::new();
    let mut wps = Vec::new();
    for (i, &s) in tables.sigma_grid.iter().enumerate() {
        if s >= sigma_max / 10.0 {
            svm.push(s * tables.v_bry_col[i] / tables.mu);
            wps.push(tables.w_pert_col[i] / s);
        }
    }
    let report = BryantReport {
        summary: tables.summary(),
        sigma_v_over_mu_tail: svm.clone(),
        w_pert_slope_tail: wps.clone(),
        w_pert_slope_times_mu: wps.last().copied().unwrap_or(f64::NAN) * tables.mu,
    };
    fs::write(
        out.join("bryant_report.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )
    .map_err(io_err)?;
    // The limit is judged at the right end of the table; the start of the
    // decade still carries the O(1/σ) correction.
    let tail_ok = svm.last().map(|r| (r - 1.0).abs() <= 0.02).unwrap_or(false);
    println!(
        "bryant q={q}: sigma·v/mu = {:.4} at sigma_max (decade range [{:.4}, {:.4}]) ({}), W_Pert slope·mu = {:.4}, R0 = {:.6}",
        svm.last().unwrap_or(&f64::NAN),
        svm.iter().copied().fold(f64::INFINITY, f64::min),
        svm.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        if tail_ok { "ok" } else { "DRIFTED" },
        report.w_pert_slope_times_mu,
        tables.r0,
    );
    Ok(if tail_ok {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}

// --- simulate ------------------------------------------------------------------

/// On-disk description of a finished sweep.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub pinch: ModelPinch,
    pub barriers: BarrierParams,
    pub nodes: usize,
    pub phi_b: f64,
    pub t1: f64,
    pub t1_scale_with_m: bool,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub cfl: f64,
    pub m_list: Vec<f64>,
    pub bryant_sigma_max: f64,
    pub bryant_tol: f64,
    pub checks: Vec<String>,
}

impl Manifest {
    fn from_config(cfg: &RunConfig) -> Self {
        Manifest {
            pinch: cfg.pinch.clone(),
            barriers: cfg.barriers.clone(),
            nodes: cfg.nodes,
            phi_b: cfg.phi_b,
            t1: cfg.t1,
            t1_scale_with_m: cfg.t1_scale_with_m,
            t_end: cfg.t_end,
            output_times: cfg.output_times.clone(),
            cfl: cfg.cfl,
            m_list: cfg.m_list.clone(),
            bryant_sigma_max: cfg.bryant_sigma_max,
            bryant_tol: cfg.bryant_tol,
            checks: cfg.checks.clone(),
        }
    }

    pub fn t1_for(&self, m: f64) -> f64 {
        if self.t1_scale_with_m {
            self.t1 * (m / 1e-2)
        } else {
            self.t1
        }
    }
}

/// Run one mollified flow to completion.
pub fn run_single(cfg: &RunConfig, tables: &BryantTables, m: f64) -> Result<Trajectory, CmdError> {
    let t1 = cfg.t1_for(m);
    let spec = GridSpec::tip_grid(cfg.nodes, cfg.phi_b);
    let state = solver::mollified_initial(&cfg.pinch, tables, &cfg.barriers, m, t1, &spec)
        .map_err(|e| CmdError::runtime(format!("initial data (m = {m}): {e}")))?;
    let ctx = FlowContext {
        pinch: &cfg.pinch,
        right: solver::RightBoundary::Productish,
        cfl: cfg.cfl,
    };
    solver::run(
        state,
        &ctx,
        cfg.t_end,
        &cfg.output_times,
        &cfg.barriers,
        Some(tables),
    )
    .map_err(|e| CmdError::runtime(format!("run (m = {m}): {e}")))
}

pub fn cmd_simulate(cfg: &RunConfig, out_override: Option<&Path>) -> Result<i32, CmdError> {
    let out = out_override
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    fs::create_dir_all(&out).map_err(io_err)?;
    let tables = bryant::solve(cfg.pinch.q, cfg.bryant_sigma_max, cfg.bryant_tol)
        .map_err(|e| CmdError::runtime(format!("bryant solve: {e}")))?;
    fs::write(out.join("bryant.csv"), tables.to_csv()).map_err(io_err)?;
    let manifest = Manifest::from_config(cfg);
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )
    .map_err(io_err)?;

    // Dispatch the m sweep to a small worker pool.
    let cap = thread_cap().min(cfg.m_list.len()).max(1);
    let mut results: Vec<Option<Result<Trajectory, CmdError>>> =
        (0..cfg.m_list.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> = (0..cap)
            .map(|w| {
                (0..cfg.m_list.len())
                    .filter(|i| i % cap == w)
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut handles = Vec::new();
        for chunk in chunks {
            let tables = &tables;
            let cfg = &cfg;
            handles.push(scope.spawn(move || {
                chunk
                    .into_iter()
                    .map(|i| (i, run_single(cfg, tables, cfg.m_list[i])))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            for (i, res) in h.join().expect("worker panicked") {
                results[i] = Some(res);
            }
        }
    });

    for (i, res) in results.into_iter().enumerate() {
        let traj = res.expect("missing result")?;
        let dir = out.join(format!("run_{i:02}"));
        fs::create_dir_all(&dir).map_err(io_err)?;
        for (j, snap) in traj.snapshots.iter().enumerate() {
            fs::write(
                dir.join(format!("snap_{j:03}.csv")),
                solver::snapshot_to_csv(snap, &cfg.pinch),
            )
            .map_err(io_err)?;
        }
        fs::write(
            dir.join("monitors.json"),
            serde_json::to_string_pretty(&traj.monitor).unwrap(),
        )
        .map_err(io_err)?;
        let violations: usize = traj
            .monitor
            .iter()
            .map(|e| e.prish_violations + e.tip_violations)
            .sum();
        println!(
            "run_{i:02}: m = {:.3e}, {} snapshots, {} barrier violations",
            cfg.m_list[i],
            traj.snapshots.len(),
            violations
        );
    }
    Ok(EXIT_PASS)
}

// --- verify ------------------------------------------------------------------

pub fn load_manifest(run_dir: &Path) -> Result<Manifest, CmdError> {
    let text = fs::read_to_string(run_dir.join("manifest.json"))
        .map_err(|e| CmdError::runtime(format!("missing manifest: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CmdError::runtime(format!("bad manifest: {e}")))
}

pub fn load_trajectory(
    run_dir: &Path,
    index: usize,
    manifest: &Manifest,
) -> Result<Trajectory, CmdError> {
    let dir = run_dir.join(format!("run_{index:02}"));
    let mut snaps = Vec::new();
    let mut j = 0usize;
    loop {
        let path = dir.join(format!("snap_{j:03}.csv"));
        if !path.exists() {
            break;
        }
        let text = fs::read_to_string(&path).map_err(io_err)?;
        let snap = solver::snapshot_from_csv(&text, manifest.pinch.p > 0)
            .map_err(|e| CmdError::runtime(format!("{}: {e}", path.display())))?;
        snaps.push(snap);
        j += 1;
    }
    if snaps.is_empty() {
        return Err(CmdError::runtime(format!(
            "no snapshots found under {}",
            dir.display()
        )));
    }
    let m = manifest.m_list[index];
    Ok(Trajectory {
        m,
        t1: manifest.t1_for(m),
        snapshots: snaps,
        monitor: Vec::new(),
    })
}

const KNOWN_CHECKS: &[&str] = &[
    "barricade",
    "curvature_bound",
    "bryant_convergence",
    "buckling",
    "mollification",
    "appendix_a",
    "initial_rate",
];

/// Run the selected checks (or the manifest's configured list when none
/// are given) against a stored sweep.
pub fn cmd_verify(run_dir: &Path, checks: &[String]) -> Result<i32, CmdError> {
    let manifest = load_manifest(run_dir)?;
    let checks: Vec<String> = if checks.is_empty() {
        manifest.checks.clone()
    } else {
        checks.to_vec()
    };
    let checks = &checks;
    for c in checks {
        if !KNOWN_CHECKS.contains(&c.as_str()) {
            return Err(CmdError::usage(format!(
                "unknown check `{c}`; available: {}",
                KNOWN_CHECKS.join(", ")
            )));
        }
    }
    let tables = bryant::solve(
        manifest.pinch.q,
        manifest.bryant_sigma_max,
        manifest.bryant_tol,
    )
    .map_err(|e| CmdError::runtime(format!("bryant solve: {e}")))?;
    let mut trajs = Vec::new();
    for i in 0..manifest.m_list.len() {
        trajs.push(load_trajectory(run_dir, i, &manifest)?);
    }
    let finest = trajs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            manifest.m_list[a.0]
                .partial_cmp(&manifest.m_list[b.0])
                .unwrap()
        })
        .map(|(_, t)| t)
        .unwrap();

    let reports_dir = run_dir.join("reports");
    fs::create_dir_all(&reports_dir).map_err(io_err)?;
    let mut all_pass = true;
    let mut reports = Vec::new();
    for check in checks {
        let report = match check.as_str() {
            "barricade" => {
                let mut worst: Option<verify::CheckReport> = None;
                for traj in &trajs {
                    let r = verify::barricade_monitor(
                        traj,
                        &manifest.pinch,
                        &manifest.barriers,
                        &tables,
                    )
                    .map_err(|e| CmdError::runtime(e.to_string()))?;
                    let cr = r.to_check_report();
                    if worst.is_none() || !cr.passed() {
                        worst = Some(cr);
                    }
                }
                worst.unwrap()
            }
            "curvature_bound" => {
                verify::curvature_bound_check(finest, &manifest.pinch, &manifest.barriers)
                    .map_err(|e| CmdError::runtime(e.to_string()))?
                    .to_check_report()
            }
            "bryant_convergence" => {
                verify::bryant_convergence_check(finest, &manifest.pinch, &tables, 10.0, 5)
                    .map_err(|e| CmdError::runtime(e.to_string()))?
                    .to_check_report()
            }
            "buckling" => {
                let times = logspace(1e-7, 1e-3, 20);
                let mut pass = true;
                let mut worst = f64::NEG_INFINITY;
                for &t in &times {
                    let rep =
                        barriers::check_buckling(t, &manifest.pinch, &manifest.barriers, &tables)
                            .map_err(|e| CmdError::runtime(e.to_string()))?;
                    for ineq in &rep.inequalities {
                        if ineq.applicable {
                            pass &= ineq.pass;
                            worst = worst.max(ineq.worst_margin);
                        }
                    }
                }
                verify::CheckReport {
                    check: "buckling".into(),
                    status: if pass { "pass" } else { "fail" }.into(),
                    margins: serde_json::json!({ "worst_margin": worst }),
                    fit_constants: serde_json::Value::Null,
                }
            }
            "mollification" => {
                let runs: Vec<(f64, &Trajectory)> =
                    manifest.m_list.iter().copied().zip(trajs.iter()).collect();
                verify::mollification_convergence(&runs, (5e-3, 3e-2))
                    .map_err(|e| CmdError::runtime(e.to_string()))?
                    .to_check_report()
            }
            "appendix_a" => verify::appendix_a_residual(
                finest,
                &manifest.pinch,
                &manifest.barriers,
                &manifest.pinch.v0.clone(),
                1.0,
            )
            .map_err(|e| CmdError::runtime(e.to_string()))?
            .to_check_report(),
            "initial_rate" => {
                let samples = [0.02, 0.03];
                verify::initial_convergence_rate(finest, &manifest.pinch, &samples, 0.25)
                    .map_err(|e| CmdError::runtime(e.to_string()))?
                    .to_check_report()
            }
            _ => unreachable!(),
        };
        all_pass &= report.passed();
        println!("check {}: {}", report.check, report.status);
        fs::write(
            reports_dir.join(format!("{check}.json")),
            serde_json::to_string_pretty(&report).unwrap(),
        )
        .map_err(io_err)?;
        reports.push(report);
    }
    Ok(if all_pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}

// --- plot ---------------------------------------------------------------------

pub fn cmd_plot(run_dir: &Path) -> Result<i32, CmdError> {
    let manifest = load_manifest(run_dir)?;
    let tables = bryant::solve(
        manifest.pinch.q,
        manifest.bryant_sigma_max,
        manifest.bryant_tol,
    )
    .map_err(|e| CmdError::runtime(format!("bryant solve: {e}")))?;
    let traj = load_trajectory(run_dir, manifest.m_list.len() - 1, &manifest)?;
    let plots = run_dir.join("plots");
    fs::create_dir_all(&plots).map_err(io_err)?;

    // Barrier comparison data per snapshot, drawn by one plot statement.
    let mut vbar_parts = Vec::new();
    for (j, snap) in traj.snapshots.iter().enumerate() {
        let mut dat = String::from("# u v v_minus v_plus\n");
        let u = snap.u();
        let v = snap.v();
        for i in 0..u.len() {
            if u[i] <= 0.0 {
                continue;
            }
            if let Ok(b) =
                barriers::prish_barriers(u[i], snap.t, &manifest.pinch, &manifest.barriers)
            {
                dat.push_str(&format!(
                    "{:.10e} {:.10e} {:.10e} {:.10e}\n",
                    u[i], v[i], b.v_minus, b.v_plus
                ));
            }
        }
        fs::write(plots.join(format!("vbar_{j:03}.dat")), dat).map_err(io_err)?;
        vbar_parts.push(format!(
            "'plots/vbar_{j:03}.dat' using 1:2 with lines title 't={:.2e}'",
            snap.t
        ));
        if j + 1 == traj.snapshots.len() {
            vbar_parts.push(format!(
                "'plots/vbar_{j:03}.dat' using 1:3 with lines dt 2 title 'barriers', 'plots/vbar_{j:03}.dat' using 1:4 with lines dt 2 notitle"
            ));
        }
    }
    let vbar_script = format!(
        "set key outside\nset logscale x\nset xlabel 'u'\nset ylabel 'v'\nplot {}\n",
        vbar_parts.join(", \\\n     ")
    );
    fs::write(run_dir.join("plot_v_barriers.gp"), vbar_script).map_err(io_err)?;

    // Rescaled tip vs the soliton profile, one plot statement.
    let mut tip_parts = Vec::new();
    for (j, snap) in traj.snapshots.iter().enumerate() {
        let state = snap.as_state(traj.m, traj.t1);
        if let Ok((sg, vr, _)) = solver::rescale_tip(&state, &manifest.pinch, 10.0, 101) {
            let mut dat = String::from("# sigma v_rescaled v_bry\n");
            for (s, v) in sg.iter().zip(&vr) {
                dat.push_str(&format!(
                    "{:.10e} {:.10e} {:.10e}\n",
                    s,
                    v,
                    tables.v_bry(*s).unwrap_or(f64::NAN)
                ));
            }
            fs::write(plots.join(format!("tip_{j:03}.dat")), dat).map_err(io_err)?;
            if tip_parts.is_empty() {
                tip_parts.push(format!(
                    "'plots/tip_{j:03}.dat' using 1:3 with lines lw 2 title 'soliton'"
                ));
            }
            tip_parts.push(format!(
                "'plots/tip_{j:03}.dat' using 1:2 with lines title 't={:.2e}'",
                snap.t
            ));
        }
    }
    let tip_script = format!(
        "set xlabel 'sigma'\nset ylabel 'v'\nplot {}\n",
        tip_parts.join(", \\\n     ")
    );
    fs::write(run_dir.join("plot_tip_rescaled.gp"), tip_script).map_err(io_err)?;

    // Curvature trend.
    let sc = manifest.pinch.scales();
    let mut dat = String::from("# t suprm_times_tnu\n");
    for snap in &traj.snapshots {
        if let (Some(rm), Ok(alpha)) = (
            verify::tip_sup_rm(snap, &manifest.pinch, &manifest.barriers),
            sc.alpha(snap.t),
        ) {
            dat.push_str(&format!("{:.10e} {:.10e}\n", snap.t, rm * alpha));
        }
    }
    fs::write(plots.join("curv_trend.dat"), dat).map_err(io_err)?;
    fs::write(
        run_dir.join("plot_curvature_trend.gp"),
        "set logscale x\nset xlabel 't'\nset ylabel '|Rm|·t·nu(t)'\nplot 'plots/curv_trend.dat' using 1:2 with linespoints notitle\n",
    )
    .map_err(io_err)?;
    println!("wrote 3 plot scripts under {}", run_dir.display());
    Ok(EXIT_PASS)
}

// --- validate-pinch -------------------------------------------------------------

pub fn cmd_validate_pinch(pinch: &ModelPinch) -> Result<i32, CmdError> {
    let grid = logspace(1e-8, pinch.v0.u_max, 64);
    let report = pinch::validate_model_pinch(pinch, &grid);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(if report.all_pass() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}
