//! Flat `key=value` experiment configs.
//!
//! One namespace, one line per setting, `#` comments, blank lines ignored.
//! Unknown and repeated keys are hard errors: a typo that silently fell
//! back to a default would poison every number downstream. Missing keys
//! mean defaults, so an empty file is a valid config.

use thiserror::Error;

use crate::icp::IcpConfig;
use crate::matching::MatchConfig;
use crate::sim::ScenarioConfig;

/// Everything an experiment run needs, with defaults matching the standard
/// corpus. Success thresholds live here because they define the headline
/// success-rate metric: a pose is a success when its translation error is
/// at most `success_trans_threshold` meters and its rotation error at most
/// `success_rot_threshold` radians (defaults 1 m and 0.1 rad, roughly two
/// cells of a 0.4 m feature grid).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub matcher: MatchConfig,
    pub icp: IcpConfig,
    pub success_trans_threshold: f64,
    pub success_rot_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            matcher: MatchConfig::default(),
            icp: IcpConfig::default(),
            success_trans_threshold: 1.0,
            success_rot_threshold: 0.1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected key=value")]
    Malformed { line: usize },
    #[error("config line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: key '{key}' set twice")]
    DuplicateKey { line: usize, key: String },
    #[error("config line {line}: bad value for '{key}': {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
}

fn parse_as<T: std::str::FromStr>(
    value: &str,
    line: usize,
    key: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: "expected true or false".to_string(),
        }),
    }
}

/// Parses config text over the defaults. Never panics, whatever the input.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.trim();
        if stripped.is_empty() || stripped.starts_with('#') {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(ConfigError::Malformed { line });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::Malformed { line });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        match key {
            "seed" => cfg.scenario.seed = parse_as(value, line, key)?,
            "num_objects" => cfg.scenario.num_objects = parse_as(value, line, key)?,
            "num_agents" => cfg.scenario.num_agents = parse_as(value, line, key)?,
            "world_extent" => cfg.scenario.world_extent = parse_as(value, line, key)?,
            "num_frames" => cfg.scenario.num_frames = parse_as(value, line, key)?,
            "sensing_radius" => cfg.scenario.sensing_radius = parse_as(value, line, key)?,
            "p_miss" => cfg.scenario.p_miss = parse_as(value, line, key)?,
            "fp_rate" => cfg.scenario.fp_rate = parse_as(value, line, key)?,
            "det_sigma_xy" => cfg.scenario.det_sigma_xy = parse_as(value, line, key)?,
            "det_sigma_yaw" => cfg.scenario.det_sigma_yaw = parse_as(value, line, key)?,
            "det_sigma_dim" => cfg.scenario.det_sigma_dim = parse_as(value, line, key)?,
            "object_speed_range" => {
                cfg.scenario.object_speed_range = parse_as(value, line, key)?
            }
            "loc_sigma_t" => cfg.scenario.loc_sigma_t = parse_as(value, line, key)?,
            "loc_sigma_r" => cfg.scenario.loc_sigma_r = parse_as(value, line, key)?,
            "spoof_attack" => cfg.scenario.spoof_attack = parse_bool(value, line, key)?,
            "min_node_affinity" => cfg.matcher.min_node_affinity = parse_as(value, line, key)?,
            "min_edge_affinity" => cfg.matcher.min_edge_affinity = parse_as(value, line, key)?,
            "sigma_extent" => cfg.matcher.sigma_extent = parse_as(value, line, key)?,
            "sigma_range" => cfg.matcher.sigma_range = parse_as(value, line, key)?,
            "sigma_bearing" => cfg.matcher.sigma_bearing = parse_as(value, line, key)?,
            "sigma_heading" => cfg.matcher.sigma_heading = parse_as(value, line, key)?,
            "max_candidates" => cfg.matcher.max_candidates = parse_as(value, line, key)?,
            "icp_max_iterations" => cfg.icp.max_iterations = parse_as(value, line, key)?,
            "icp_convergence_tol" => cfg.icp.convergence_tol = parse_as(value, line, key)?,
            "icp_max_pair_dist" => cfg.icp.max_pair_dist = parse_as(value, line, key)?,
            "boundary_samples_per_box" => {
                cfg.icp.boundary_samples_per_box = parse_as(value, line, key)?
            }
            "success_trans_threshold" => {
                cfg.success_trans_threshold = parse_as(value, line, key)?
            }
            "success_rot_threshold" => cfg.success_rot_threshold = parse_as(value, line, key)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    Ok(cfg)
}

/// Canonical text form; `parse_config(render_config(c)) == c` for any
/// config with finite fields.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let s = &cfg.scenario;
    let m = &cfg.matcher;
    let i = &cfg.icp;
    let mut out = String::new();
    for (key, value) in [
        ("seed", s.seed.to_string()),
        ("num_objects", s.num_objects.to_string()),
        ("num_agents", s.num_agents.to_string()),
        ("world_extent", s.world_extent.to_string()),
        ("num_frames", s.num_frames.to_string()),
        ("sensing_radius", s.sensing_radius.to_string()),
        ("p_miss", s.p_miss.to_string()),
        ("fp_rate", s.fp_rate.to_string()),
        ("det_sigma_xy", s.det_sigma_xy.to_string()),
        ("det_sigma_yaw", s.det_sigma_yaw.to_string()),
        ("det_sigma_dim", s.det_sigma_dim.to_string()),
        ("object_speed_range", s.object_speed_range.to_string()),
        ("loc_sigma_t", s.loc_sigma_t.to_string()),
        ("loc_sigma_r", s.loc_sigma_r.to_string()),
        ("spoof_attack", s.spoof_attack.to_string()),
        ("min_node_affinity", m.min_node_affinity.to_string()),
        ("min_edge_affinity", m.min_edge_affinity.to_string()),
        ("sigma_extent", m.sigma_extent.to_string()),
        ("sigma_range", m.sigma_range.to_string()),
        ("sigma_bearing", m.sigma_bearing.to_string()),
        ("sigma_heading", m.sigma_heading.to_string()),
        ("max_candidates", m.max_candidates.to_string()),
        ("icp_max_iterations", i.max_iterations.to_string()),
        ("icp_convergence_tol", i.convergence_tol.to_string()),
        ("icp_max_pair_dist", i.max_pair_dist.to_string()),
        (
            "boundary_samples_per_box",
            i.boundary_samples_per_box.to_string(),
        ),
        (
            "success_trans_threshold",
            cfg.success_trans_threshold.to_string(),
        ),
        (
            "success_rot_threshold",
            cfg.success_rot_threshold.to_string(),
        ),
    ] {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    }
    out
}
