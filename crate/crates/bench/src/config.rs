//! Experiment configuration, read from TOML.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rlr_crawl::calibration::BootstrapConfig;
use rlr_crawl::features::FeatureSpec;
use rlr_crawl::rlr::{RegKind, DEFAULT_LAMBDA};
use rlr_crawl::samplers::{Method, DEFAULT_FORWARD_PROBABILITY};
use rlr_crawl::tour_sgd::SgdConfig;
use rlr_crawl::{Error, Result};

use crate::synth::SyntheticConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSource {
    Synthetic(SyntheticConfig),
    Files {
        edges: PathBuf,
        attributes: PathBuf,
        label: String,
    },
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlParams {
    /// Forest fire forward-burning probability.
    pub ff_forward: f64,
    /// Seed-set size for tours as a fraction of the crawlable nodes (at least
    /// one seed).
    pub seed_fraction: f64,
    /// Minimum length of the random walk that collects the seed set.
    pub seed_walk: usize,
}

impl Default for CrawlParams {
    fn default() -> Self {
        CrawlParams {
            ff_forward: DEFAULT_FORWARD_PROBABILITY,
            seed_fraction: 0.01,
            seed_walk: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CiParams {
    /// Budget fractions at which intervals are computed; none when empty.
    pub budgets: Vec<f64>,
    #[serde(flatten)]
    pub bootstrap: BootstrapConfig,
}

impl Default for CiParams {
    fn default() -> Self {
        CiParams {
            budgets: vec![0.15],
            bootstrap: BootstrapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    /// Feature definition; the default layout of the graph's schema if absent.
    pub features: Option<FeatureSpec>,
    pub crawlers: Vec<Method>,
    pub crawl: CrawlParams,
    /// Crawl budgets as fractions of the crawlable (labeled) nodes.
    pub budgets: Vec<f64>,
    /// Fraction of labeled nodes whose label is observed.
    pub label_fraction: f64,
    pub regularization: Vec<RegKind>,
    pub lambda: f64,
    /// Defaults to a faster schedule than [`SgdConfig::default`] so sample
    /// fits get close to their optimum within the step budget.
    pub sgd: SgdConfig,
    pub ci: CiParams,
    pub trials: usize,
    /// Master seed; the command line sets it.
    pub seed: u64,
    /// Worker threads (0 lets the thread pool decide).
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphSource::default(),
            features: None,
            crawlers: Method::ALL.to_vec(),
            crawl: CrawlParams::default(),
            budgets: vec![0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.30],
            label_fraction: 0.5,
            regularization: vec![RegKind::L2],
            lambda: DEFAULT_LAMBDA,
            sgd: SgdConfig { eta0: 1.0, tau: 1000.0, ..SgdConfig::default() },
            ci: CiParams::default(),
            trials: 10,
            seed: 0,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trial count must be at least 1".into());
        }
        if self.budgets.is_empty() || self.budgets.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return bad("budget fractions must be nonempty and in (0, 1]".into());
        }
        if self.budgets.windows(2).any(|p| p[0] >= p[1]) {
            return bad("budget fractions must be increasing".into());
        }
        for f in &self.ci.budgets {
            if !self.budgets.contains(f) {
                return bad(format!("interval budget {f} is not a crawl budget"));
            }
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return bad(format!("label fraction {} outside (0, 1]", self.label_fraction));
        }
        if self.crawlers.is_empty() || self.regularization.is_empty() {
            return bad("need at least one crawler and one regularization".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("invalid lambda {}", self.lambda));
        }
        if !(self.crawl.ff_forward > 0.0 && self.crawl.ff_forward < 1.0) {
            return bad("ff_forward must be in (0, 1)".into());
        }
        if !(self.crawl.seed_fraction > 0.0 && self.crawl.seed_fraction < 1.0) {
            return bad("seed_fraction must be in (0, 1)".into());
        }
        self.sgd.validate()?;
        if !self.ci.budgets.is_empty() {
            self.ci.bootstrap.validate()?;
        }
        if let GraphSource::Synthetic(s) = &self.graph {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}
