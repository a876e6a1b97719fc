//! Scenario configuration: JSON file, then command-line overrides.

use std::path::Path;

use anyhow::{bail, Context};
use mechlab::attack::SearchOptions;
use mechlab::axioms::CheckContext;
use mechlab::theorem::TheoremContext;
use mechlab::{
    Mechanism, MechanismParams, PaymentMode, ProfileSampler, QuadratureConfig, Registry,
    SearchGrid, ToleranceConfig,
};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "MECHLAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NRange {
    pub min: usize,
    pub max: usize,
}

/// Quadrature knobs other than the error budget, which lives in
/// `tolerances.tol_quad`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    pub max_subdivisions: usize,
    pub monotone_slack: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        QuadratureSettings {
            max_subdivisions: q.max_subdivisions,
            monotone_slack: q.monotone_slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mechanism: String,
    pub c: f64,
    pub r: f64,
    /// `None` keeps the mechanism's own payment rule.
    pub payment_mode: Option<PaymentMode>,
    pub grid: SearchGrid,
    pub n_range: NRange,
    pub profile_budget: usize,
    pub seed: Option<u64>,
    pub tolerances: ToleranceConfig,
    pub quadrature: QuadratureSettings,
    pub search: SearchOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mechanism: "spa".into(),
            c: 0.5,
            r: 4.0,
            payment_mode: None,
            grid: SearchGrid::default(),
            n_range: NRange { min: 2, max: 5 },
            profile_budget: 500,
            seed: None,
            tolerances: ToleranceConfig::default(),
            quadrature: QuadratureSettings::default(),
            search: SearchOptions::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub mechanism: Option<String>,
    pub c: Option<f64>,
    pub r: Option<f64>,
    pub payment: Option<PaymentMode>,
    pub grid: Option<SearchGrid>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub profile_budget: Option<usize>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        // serde_json messages end with "at line L column C"
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(m) = o.mechanism {
            self.mechanism = m;
        }
        if let Some(c) = o.c {
            self.c = c;
        }
        if let Some(r) = o.r {
            self.r = r;
        }
        if o.payment.is_some() {
            self.payment_mode = o.payment;
        }
        if let Some(g) = o.grid {
            self.grid = g;
        }
        if let Some(n) = o.n_min {
            self.n_range.min = n;
        }
        if let Some(n) = o.n_max {
            self.n_range.max = n;
        }
        if let Some(b) = o.profile_budget {
            self.profile_budget = b;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
    }

    /// Fills a missing seed from the environment, then the default 42.
    pub fn resolve_seed(&mut self) -> anyhow::Result<()> {
        if self.seed.is_none() {
            self.seed = Some(match std::env::var(SEED_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .with_context(|| format!("{SEED_ENV}=`{s}` is not a 64-bit integer"))?,
                Err(_) => 42,
            });
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    pub fn validate(&self, registry: &Registry) -> anyhow::Result<()> {
        if !registry.contains(&self.mechanism) {
            let known: Vec<&str> = registry.names().collect();
            bail!(
                "mechanism: unknown `{}` (registered: {})",
                self.mechanism,
                known.join(", ")
            );
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            bail!("c: must be a nonnegative number, got {}", self.c);
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            bail!("r: must be a nonnegative number, got {}", self.r);
        }
        self.grid.validate().context("grid")?;
        if self.n_range.min < 2 || self.n_range.min > self.n_range.max {
            bail!(
                "n_range: need 2 <= min <= max, got {}..{}",
                self.n_range.min,
                self.n_range.max
            );
        }
        if self.profile_budget == 0 {
            bail!("profile_budget: must be at least 1");
        }
        self.tolerances.validate().context("tolerances")?;
        self.quad().validate().context("quadrature")?;
        Ok(())
    }

    pub fn params(&self) -> MechanismParams {
        MechanismParams {
            c: self.c,
            r: self.r,
            payment: self.payment_mode,
            eps_tie: self.tolerances.eps_tie,
        }
    }

    pub fn build(&self, registry: &Registry) -> anyhow::Result<Mechanism> {
        Ok(registry.build(&self.mechanism, &self.params())?)
    }

    pub fn quad(&self) -> QuadratureConfig {
        QuadratureConfig {
            max_subdivisions: self.quadrature.max_subdivisions,
            tol_quad: self.tolerances.tol_quad,
            monotone_slack: self.quadrature.monotone_slack,
        }
    }

    pub fn sampler(&self) -> anyhow::Result<ProfileSampler> {
        Ok(ProfileSampler::new(
            self.n_range.min,
            self.n_range.max,
            self.grid.clone(),
            self.seed(),
        )?)
    }

    pub fn check_context(&self) -> CheckContext {
        CheckContext {
            tol: self.tolerances,
            quad: self.quad(),
            grid: self.grid.clone(),
            seed: self.seed(),
            ..CheckContext::default()
        }
    }

    pub fn theorem_context(&self) -> TheoremContext {
        TheoremContext {
            tol: self.tolerances,
            quad: self.quad(),
            grid: self.grid.clone(),
            search: self.search,
            ..TheoremContext::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reports_position() {
        let err = ScenarioConfig::parse("{\n  \"mechanism\": \"spa\",\n  \"bogus\": 1\n}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3 column"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ScenarioConfig::parse(r#"{"mechanism": "lottery", "seed": 7}"#).unwrap();
        cfg.apply(Overrides {
            seed: Some(9),
            n_max: Some(3),
            ..Default::default()
        });
        assert_eq!(cfg.mechanism, "lottery");
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.n_range, NRange { min: 2, max: 3 });
    }

    #[test]
    fn validation() {
        let reg = Registry::with_builtins();
        assert!(ScenarioConfig::default().validate(&reg).is_ok());
        let bad = ScenarioConfig {
            mechanism: "nope".into(),
            ..Default::default()
        };
        assert!(bad.validate(&reg).is_err());
        let bad = ScenarioConfig {
            n_range: NRange { min: 4, max: 3 },
            ..Default::default()
        };
        assert!(bad.validate(&reg).is_err());
    }
}
