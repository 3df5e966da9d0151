//! Command-line front end. Subcommands: bryant, simulate, verify, plot,
//! validate-pinch.

use std::path::PathBuf;
use std::process::ExitCode;

use warped_ricci::commands::{self, CmdError};
use warped_ricci::config::RunConfig;
use warped_ricci::pinch;

const USAGE: &str = "\
warped-ricci — reduced Ricci flow laboratory for pinched warped products

USAGE:
    warped-ricci bryant --q <Q> [--sigma-max <S>] [--tol <T>] --out <DIR>
    warped-ricci simulate --config <FILE> [--out <DIR>]
    warped-ricci verify --run <DIR> [--checks a,b,c]
    warped-ricci plot --run <DIR>
    warped-ricci validate-pinch (--name <BUILTIN> | --config <FILE>)

Environment:
    WARPED_RICCI_THREADS   caps the simulate worker pool (default 4)
";

struct Args {
    flags: Vec<(String, String)>,
}

impl Args {
    fn parse(args: &[String]) -> Result<Args, CmdError> {
        let mut flags = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let a = &args[i];
            if let Some(name) = a.strip_prefix("--") {
                let value = args
                    .get(i + 1)
                    .ok_or_else(|| CmdError::usage(format!("flag --{name} needs a value")))?;
                flags.push((name.to_string(), value.clone()));
                i += 2;
            } else {
                return Err(CmdError::usage(format!("unexpected argument `{a}`")));
            }
        }
        Ok(Args { flags })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.flags
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, name: &str) -> Result<&str, CmdError> {
        self.get(name)
            .ok_or_else(|| CmdError::usage(format!("missing required flag --{name}")))
    }
}

fn dispatch() -> Result<i32, CmdError> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some(cmd) = argv.first() else {
        return Err(CmdError::usage(USAGE));
    };
    let args = Args::parse(&argv[1..])?;
    match cmd.as_str() {
        "bryant" => {
            let q: u32 = args
                .require("q")?
                .parse()
                .map_err(|_| CmdError::usage("--q must be an integer"))?;
            let sigma_max: f64 = args
                .get("sigma-max")
                .unwrap_or("1e3")
                .parse()
                .map_err(|_| CmdError::usage("--sigma-max must be a number"))?;
            let tol: f64 = args
                .get("tol")
                .unwrap_or("1e-10")
                .parse()
                .map_err(|_| CmdError::usage("--tol must be a number"))?;
            let out = PathBuf::from(args.require("out")?);
            commands::cmd_bryant(q, sigma_max, tol, &out)
        }
        "simulate" => {
            let path = args.require("config")?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::usage(format!("cannot read config {path}: {e}")))?;
            let cfg = RunConfig::from_text(&text)
                .map_err(|e| CmdError::usage(format!("config {path}: {e}")))?;
            let out = args.get("out").map(PathBuf::from);
            commands::cmd_simulate(&cfg, out.as_deref())
        }
        "verify" => {
            let run = PathBuf::from(args.require("run")?);
            // Without an explicit list the run's configured checks apply.
            let checks: Vec<String> = match args.get("checks") {
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
                None => Vec::new(),
            };
            commands::cmd_verify(&run, &checks)
        }
        "plot" => {
            let run = PathBuf::from(args.require("run")?);
            commands::cmd_plot(&run)
        }
        "validate-pinch" => {
            let p = if let Some(name) = args.get("name") {
                pinch::builtin(name).map_err(|e| CmdError::usage(e.to_string()))?
            } else if let Some(path) = args.get("config") {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CmdError::usage(format!("cannot read config {path}: {e}")))?;
                RunConfig::from_text(&text)
                    .map_err(|e| CmdError::usage(format!("config {path}: {e}")))?
                    .pinch
            } else {
                return Err(CmdError::usage("validate-pinch needs --name or --config"));
            };
            commands::cmd_validate_pinch(&p)
        }
        other => Err(CmdError::usage(format!(
            "unknown subcommand `{other}`\n{USAGE}"
        ))),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
