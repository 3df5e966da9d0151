//! Flat key-value run configuration with `[section]` headers. No external
//! config-language semantics: every value is a scalar, a word, or a
//! whitespace-separated list.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::BarrierParams;
use crate::pinch::{self, ModelPinch, Profile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error(transparent)]
    Pinch(#[from] pinch::PinchError),
}

/// Raw parsed file: (section, key) -> value string.
pub fn parse_flat(text: &str) -> Result<BTreeMap<(String, String), String>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section = String::from("");
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') || line.len() < 3 {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: format!("malformed section header `{line}`"),
                });
            }
            section = line[1..line.len() - 1].trim().to_lowercase();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.insert(
            (section.clone(), k.trim().to_lowercase()),
            v.trim().to_string(),
        );
    }
    Ok(out)
}

/// Full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub pinch: ModelPinch,
    pub nodes: usize,
    pub phi_b: f64,
    pub t1: f64,
    pub t1_scale_with_m: bool,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub cfl: f64,
    pub barriers: BarrierParams,
    pub m_list: Vec<f64>,
    pub out_dir: String,
    pub checks: Vec<String>,
    pub bryant_sigma_max: f64,
    pub bryant_tol: f64,
}

struct Reader<'a> {
    map: &'a BTreeMap<(String, String), String>,
}

impl<'a> Reader<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.map
            .get(&(section.to_string(), key.to_string()))
            .map(|s| s.as_str())
    }

    fn f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: format!("{section}.{key}"),
                msg: format!("`{v}` is not a number"),
            }),
        }
    }

    fn usize(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: format!("{section}.{key}"),
                msg: format!("`{v}` is not an integer"),
            }),
        }
    }

    fn bool(&self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: format!("{section}.{key}"),
                msg: format!("`{v}` is not a boolean"),
            }),
        }
    }

    fn list_f64(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => {
                let parsed: Result<Vec<f64>, _> =
                    v.split_whitespace().map(|t| t.parse::<f64>()).collect();
                parsed.map(Some).map_err(|_| ConfigError::BadValue {
                    key: format!("{section}.{key}"),
                    msg: format!("`{v}` is not a list of numbers"),
                })
            }
        }
    }
}

/// Build a pinch either from a builtin name or from inline profile specs.
fn pinch_from(r: &Reader) -> Result<ModelPinch, ConfigError> {
    if let Some(name) = r.get("pinch", "name") {
        if r.get("pinch", "v0").is_none() {
            return Ok(pinch::builtin(name)?);
        }
    }
    let q = r.usize("pinch", "q", 2)? as u32;
    let p = r.usize("pinch", "p", 0)? as u32;
    let v0 = Profile::parse(
        r.get("pinch", "v0")
            .ok_or_else(|| ConfigError::Missing("pinch.v0".into()))?,
    )?;
    let w0 = match r.get("pinch", "w0") {
        Some(spec) => Some(Profile::parse(spec)?),
        None => None,
    };
    if p > 0 && w0.is_none() {
        return Err(ConfigError::Missing("pinch.w0".into()));
    }
    Ok(ModelPinch {
        name: r.get("pinch", "name").unwrap_or("inline").to_string(),
        q,
        p,
        mu_f: r.f64("pinch", "mu_f", 0.0)?,
        fiber_flat: r.bool("pinch", "fiber_flat", true)?,
        lambda_ratio: r.f64("pinch", "lambda_ratio", 0.0)?,
        v0,
        w0,
        u_star_hint: r.f64("pinch", "u_star_hint", 0.05)?,
    })
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let map = parse_flat(text)?;
        let r = Reader { map: &map };
        let pinch = pinch_from(&r)?;
        let defaults = BarrierParams::default();
        let barriers = BarrierParams {
            d: r.f64("barriers", "d", defaults.d)?,
            u_star: r.f64("barriers", "u_star", defaults.u_star)?,
            sigma_star: r.f64("barriers", "sigma_star", defaults.sigma_star)?,
            zeta_star: r.f64("barriers", "zeta_star", defaults.zeta_star)?,
            eps_v: r.f64("barriers", "eps_v", defaults.eps_v)?,
            eps_w: r.f64("barriers", "eps_w", defaults.eps_w)?,
            delta: r.f64("barriers", "delta", defaults.delta)?,
            t_star: r.f64("barriers", "t_star", defaults.t_star)?,
            margin_c: r.f64("barriers", "margin_c", defaults.margin_c)?,
            kappa_cap: r.f64("barriers", "kappa_cap", defaults.kappa_cap)?,
        };
        let phi_b = r.f64("grid", "phi_b", (2.0 * barriers.u_star).sqrt())?;
        let t1 = r.f64("time", "t1", 1e-4)?;
        let t_end = r.f64("time", "t_end", 5e-3)?;
        let output_times = match r.list_f64("time", "output_times")? {
            Some(list) => list,
            None => {
                let count = r.usize("time", "output_count", 10)?;
                let start = r.f64("time", "output_start", t_end / 10.0)?;
                crate::numeric::logspace(start, t_end, count)
            }
        };
        let m_list = r.list_f64("mollify", "m")?.unwrap_or_else(|| vec![1e-2]);
        if m_list.is_empty() {
            return Err(ConfigError::Missing("mollify.m".into()));
        }
        let t1_scale_with_m = r.bool("time", "t1_scale_with_m", false)?;
        if !t1_scale_with_m {
            let m_min = m_list.iter().copied().fold(f64::INFINITY, f64::min);
            if t1 >= m_min {
                return Err(ConfigError::BadValue {
                    key: "time.t1".into(),
                    msg: format!("t1 = {t1} must be below the smallest m = {m_min}"),
                });
            }
        }
        let checks = r
            .get("checks", "run")
            .map(|s| s.split_whitespace().map(|t| t.to_string()).collect())
            .unwrap_or_else(|| {
                vec![
                    "barricade".to_string(),
                    "curvature_bound".to_string(),
                    "bryant_convergence".to_string(),
                ]
            });
        Ok(RunConfig {
            pinch,
            nodes: r.usize("grid", "nodes", 700)?,
            phi_b,
            t1,
            t1_scale_with_m,
            t_end,
            output_times,
            cfl: r.f64("time", "cfl", 0.4)?,
            barriers,
            m_list,
            out_dir: r.get("output", "dir").unwrap_or("runs/unnamed").to_string(),
            checks,
            bryant_sigma_max: r.f64("bryant", "sigma_max", 1e3)?,
            bryant_tol: r.f64("bryant", "tol", 1e-10)?,
        })
    }

    /// Mollification start time for one member of the m sweep.
    pub fn t1_for(&self, m: f64) -> f64 {
        if self.t1_scale_with_m {
            self.t1 * (m / 1e-2)
        } else {
            self.t1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reference_style_config() {
        let text = "\
[pinch]
name = ak-neckpinch

[grid]
nodes = 500

[time]
t1 = 1e-4
t1_scale_with_m = true
t_end = 5e-3
output_times = 5e-4 1e-3 5e-3

[mollify]
m = 2e-2 1e-2 5e-3

[output]
dir = runs/test
";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.pinch.name, "ak-neckpinch");
        assert_eq!(cfg.nodes, 500);
        assert_eq!(cfg.m_list.len(), 3);
        assert!((cfg.t1_for(2e-2) - 2e-4).abs() < 1e-18);
        assert_eq!(cfg.output_times.len(), 3);
    }

    #[test]
    fn inline_pinch() {
        let text = "\
[pinch]
q = 3
p = 1
mu_f = 0
v0 = log 1.0
w0 = power 1.0 1.0
";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.pinch.q, 3);
        assert_eq!(cfg.pinch.p, 1);
    }

    #[test]
    fn malformed_lines_are_reported_with_numbers() {
        let text = "[pinch]\nname = ak-neckpinch\nbogus line without equals\n";
        match RunConfig::from_text(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn t1_must_precede_smallest_m() {
        let text = "[time]\nt1 = 2e-2\n[mollify]\nm = 1e-2\n[pinch]\nname = ak-neckpinch\n";
        assert!(RunConfig::from_text(text).is_err());
    }
}
