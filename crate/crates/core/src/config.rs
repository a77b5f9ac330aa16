//! Session tunables, loadable from a JSON file. Missing keys take defaults.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Release within this distance (m) of the arc snaps to default.
    pub corridor_radius: f64,
    /// Surface path length (m) below which a stroke counts as a click.
    pub click_threshold: f64,
    /// Minimum spacing (m) between retained lasso boundary points.
    pub lasso_spacing: f64,
    /// Lasso depth cap as a multiple of the farthest boundary distance.
    pub t_max_factor: f64,
    /// Executor progress steps per instruction.
    pub step_count: u32,
    /// Lower bound (m) on the arc lift above the chord midpoint.
    pub arc_min_apex: f64,
    /// Arc lift as a fraction of the chord length.
    pub arc_apex_ratio: f64,
    /// Samples in arc polylines sent to clients.
    pub arc_polyline_samples: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            corridor_radius: 0.15,
            click_threshold: 0.02,
            lasso_spacing: 0.01,
            t_max_factor: 1.5,
            step_count: 4,
            arc_min_apex: 0.3,
            arc_apex_ratio: 0.25,
            arc_polyline_samples: 32,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("corridor_radius", self.corridor_radius),
            ("click_threshold", self.click_threshold),
            ("lasso_spacing", self.lasso_spacing),
            ("t_max_factor", self.t_max_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.t_max_factor < 1.0 {
            return Err(ConfigError::Invalid("t_max_factor must be at least 1".into()));
        }
        if self.step_count == 0 {
            return Err(ConfigError::Invalid("step_count must be at least 1".into()));
        }
        if !(self.arc_min_apex >= 0.0 && self.arc_apex_ratio >= 0.0) {
            return Err(ConfigError::Invalid("arc parameters must be non-negative".into()));
        }
        if self.arc_polyline_samples < 2 {
            return Err(ConfigError::Invalid("arc_polyline_samples must be at least 2".into()));
        }
        Ok(())
    }
}
