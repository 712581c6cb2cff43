use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::net::DEFAULT_OVERSAMPLE;

/// How the graph radius follows the net scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoRule {
    Fixed {
        rho: f64,
    },
    /// `rho = c * eps^alpha`.
    PowerLaw {
        c: f64,
        alpha: f64,
    },
}

impl RhoRule {
    pub fn rho(&self, eps: f64) -> f64 {
        match *self {
            RhoRule::Fixed { rho } => rho,
            RhoRule::PowerLaw { c, alpha } => c * eps.powf(alpha),
        }
    }
}

impl Default for RhoRule {
    fn default() -> Self {
        RhoRule::PowerLaw { c: 1.0, alpha: 0.5 }
    }
}

impl FromStr for RhoRule {
    type Err = Error;

    /// `pow:c,alpha` or `fixed:rho`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "rho rule `{s}` (expected pow:c,alpha or fixed:rho)"
            ))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("pow", &[c, alpha]) => Ok(RhoRule::PowerLaw { c, alpha }),
            ("fixed", &[rho]) => Ok(RhoRule::Fixed { rho }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for RhoRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoRule::Fixed { rho } => write!(f, "fixed:{rho}"),
            RhoRule::PowerLaw { c, alpha } => write!(f, "pow:{c},{alpha}"),
        }
    }
}

fn default_oversample() -> usize {
    DEFAULT_OVERSAMPLE
}

fn default_solver_tol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// `circle:R`, `sphere2:R` or `torus2:a,b`.
    pub manifold: String,
    /// Net scales, strictly decreasing.
    pub eps_levels: Vec<f64>,
    #[serde(default)]
    pub rho_rule: RhoRule,
    pub k_target: usize,
    pub seed: u64,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(
        manifold: &str,
        eps_levels: Vec<f64>,
        rho_rule: RhoRule,
        k_target: usize,
        seed: u64,
    ) -> Self {
        Self {
            manifold: manifold.to_string(),
            eps_levels,
            rho_rule,
            k_target,
            seed,
            oversample: DEFAULT_OVERSAMPLE,
            solver_tol: default_solver_tol(),
            output: None,
        }
    }

    pub fn model(&self) -> Result<ManifoldModel<f64>> {
        self.manifold.parse()
    }

    pub fn rho(&self, level: usize) -> f64 {
        self.rho_rule.rho(self.eps_levels[level])
    }

    /// Checks `0 < eps < rho < i0/2` at every level.
    pub fn validate(&self) -> Result<()> {
        let m = self.model()?;
        if self.eps_levels.is_empty() {
            return Err(Error::Config("eps_levels is empty".into()));
        }
        if self.k_target == 0 {
            return Err(Error::Config("k_target must be at least 1".into()));
        }
        if self.oversample == 0 {
            return Err(Error::Config("oversample must be positive".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::Config("solver_tol must be positive".into()));
        }
        if let RhoRule::PowerLaw { c, alpha } = self.rho_rule {
            if !(c > 0.0 && alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!(
                    "power-law rho rule needs c > 0 and alpha in (0, 1), got c = {c}, alpha = {alpha}"
                )));
            }
        }
        if self.eps_levels.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config(
                "eps_levels must be strictly decreasing".into(),
            ));
        }
        let half = m.injectivity_radius() / 2.0;
        for (level, &eps) in self.eps_levels.iter().enumerate() {
            let rho = self.rho(level);
            if !(eps > 0.0 && eps < rho && rho < half) {
                return Err(Error::Config(format!(
                    "level {level}: need 0 < eps < rho < i0/2, got eps = {eps}, rho = {rho}, i0/2 = {half}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the interpolation map is defined at `level` (`rho > 2 eps`).
    pub fn interpolation_defined(&self, level: usize) -> bool {
        self.rho(level) - 2.0 * self.eps_levels[level] > 0.0
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_rule_parsing() {
        assert_eq!(
            "pow:1.0,0.5".parse::<RhoRule>().unwrap(),
            RhoRule::PowerLaw { c: 1.0, alpha: 0.5 }
        );
        assert_eq!(
            "fixed:0.4".parse::<RhoRule>().unwrap(),
            RhoRule::Fixed { rho: 0.4 }
        );
        assert!("pow:1".parse::<RhoRule>().is_err());
        assert!("linear:1,2".parse::<RhoRule>().is_err());
        let r = RhoRule::PowerLaw { c: 1.0, alpha: 0.5 };
        assert_eq!(r.to_string().parse::<RhoRule>().unwrap(), r);
        assert!((r.rho(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let ok = SweepConfig::new(
            "sphere2:1",
            vec![0.25, 0.18, 0.12, 0.08],
            RhoRule::default(),
            10,
            7,
        );
        ok.validate().unwrap();
        assert!(!ok.interpolation_defined(0));
        assert!(ok.interpolation_defined(3));
        let mut empty = ok.clone();
        empty.eps_levels.clear();
        assert!(matches!(empty.validate(), Err(Error::Config(_))));
        let mut unordered = ok.clone();
        unordered.eps_levels = vec![0.1, 0.2];
        assert!(unordered.validate().is_err());
        let mut big = ok.clone();
        big.rho_rule = RhoRule::Fixed { rho: 2.0 };
        assert!(big.validate().is_err());
        let mut k0 = ok.clone();
        k0.k_target = 0;
        assert!(k0.validate().is_err());
    }

    #[test]
    fn json_defaults() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"manifold":"torus2:1,1","eps_levels":[0.2],"k_target":3,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg.oversample, DEFAULT_OVERSAMPLE);
        assert_eq!(cfg.rho_rule, RhoRule::default());
    }
}
