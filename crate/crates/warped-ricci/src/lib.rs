//! Numerical laboratory for Ricci flow of doubly warped products over an
//! interval.
//!
//! The crate builds singular "pinch" initial metrics of the form
//! `du²/(u V₀(u)) + u g_{S^q} + W₀(u) g_F`, integrates the reduced flow
//! equations forward from mollified versions of them, solves the Bryant
//! soliton profile ODEs, and checks the resulting trajectories against
//! barrier, curvature, and soliton-convergence predictions.
//!
//! Modules mirror the pipeline:
//!
//! * [`pinch`] — profile families, pinch validation, approximate solutions.
//! * [`scales`] — time scales ν, ω, α, β and algebraic helpers.
//! * [`geometry`] — curvature formulas for doubly warped products.
//! * [`bryant`] — Bryant soliton profile and perturbation tables.
//! * [`barriers`] — productish and tip barrier families and residual checks.
//! * [`solver`] — explicit time integration of the reduced flow.
//! * [`verify`] — post-hoc checks on trajectories and standalone estimates.
//! * [`config`], [`commands`] — command-line front end.

pub mod barriers;
pub mod bryant;
pub mod commands;
pub mod config;
pub mod geometry;
pub mod interp;
pub mod numeric;
pub mod pinch;
pub mod scales;
pub mod solver;
pub mod verify;
