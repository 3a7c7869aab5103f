//! Attributed degree-corrected stochastic block model.
//!
//! Each node draws a class from the prior and a degree propensity
//! `θ = class_degree[y] · LogNormal(0, degree_spread)`. Nodes `u ≠ v` are
//! joined independently with probability
//!
//! ```text
//! min(1, c · θ_u θ_v · ((1 − h) + h · H · 1{y_u = y_v}))
//! ```
//!
//! where `h` is the homophily and `c` is set so the expected mean degree
//! (before capping) is `mean_degree`. With `h = 0` the class plays no part in
//! edge formation. Each attribute takes the class-linked level `y mod levels`
//! with probability `strength` and a uniform level otherwise. Only the giant
//! component is returned.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use rlr_crawl::graph::{giant_component, AttributedGraph, GraphBuilder};
use rlr_crawl::rng;
use rlr_crawl::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttrSpec {
    pub name: String,
    pub levels: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub nodes: usize,
    pub classes: usize,
    pub homophily: f64,
    pub mean_degree: f64,
    /// Class probabilities; uniform when empty.
    pub class_prior: Vec<f64>,
    /// Per-class multiplier of the degree propensity; all 1 when empty.
    pub class_degree: Vec<f64>,
    /// Log-scale standard deviation of the degree propensity.
    pub degree_spread: f64,
    pub attrs: Vec<AttrSpec>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            nodes: 2000,
            classes: 2,
            homophily: 0.8,
            mean_degree: 10.0,
            class_prior: Vec::new(),
            class_degree: vec![1.0, 3.0],
            degree_spread: 0.5,
            attrs: vec![
                AttrSpec { name: "a0".into(), levels: 2, strength: 0.6 },
                AttrSpec { name: "a1".into(), levels: 3, strength: 0.3 },
            ],
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::Argument(m));
        if self.nodes < 10 {
            return arg(format!("need at least 10 nodes, got {}", self.nodes));
        }
        if self.classes < 2 {
            return arg("need at least 2 classes".into());
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return arg(format!("homophily {} outside [0, 1]", self.homophily));
        }
        if !(self.mean_degree > 0.0) || self.mean_degree >= self.nodes as f64 {
            return arg(format!("mean degree {} infeasible for {} nodes", self.mean_degree, self.nodes));
        }
        for (name, v) in [("class_prior", &self.class_prior), ("class_degree", &self.class_degree)] {
            if !v.is_empty() && (v.len() != self.classes || v.iter().any(|&x| !(x > 0.0) || !x.is_finite())) {
                return arg(format!("{name} needs {} positive entries", self.classes));
            }
        }
        if !(self.degree_spread >= 0.0) {
            return arg("degree spread must be non-negative".into());
        }
        for a in &self.attrs {
            if a.levels < 1 || !(0.0..=1.0).contains(&a.strength) {
                return arg(format!("attribute {:?} needs levels ≥ 1 and strength in [0, 1]", a.name));
            }
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes).map(|c| c.to_string()).collect()
    }
}

/// Generates the graph; same config and seed give the same graph.
pub fn generate_synthetic(cfg: &SyntheticConfig, rng_seed: u64) -> Result<AttributedGraph> {
    cfg.validate()?;
    let (n, h) = (cfg.nodes, cfg.classes);
    let mut r = rng::seeded(rng_seed);
    let prior = if cfg.class_prior.is_empty() { vec![1.0; h] } else { cfg.class_prior.clone() };
    let class_dist = WeightedIndex::new(&prior).map_err(|e| Error::Argument(e.to_string()))?;
    let spread = LogNormal::new(0.0, cfg.degree_spread).map_err(|e| Error::Argument(e.to_string()))?;
    let labels: Vec<usize> = (0..n).map(|_| class_dist.sample(&mut r)).collect();
    let theta: Vec<f64> = labels
        .iter()
        .map(|&y| cfg.class_degree.get(y).copied().unwrap_or(1.0) * spread.sample(&mut r))
        .collect();
    let attrs: Vec<Vec<String>> = labels
        .iter()
        .map(|&y| {
            cfg.attrs
                .iter()
                .map(|a| {
                    let level = if r.random::<f64>() < a.strength { y % a.levels } else { r.random_range(0..a.levels) };
                    format!("v{level}")
                })
                .collect()
        })
        .collect();

    // normalize: Σ_{u≠v} θ_u θ_v mult(y_u, y_v) = n · mean_degree
    let hom = cfg.homophily;
    let sum: f64 = theta.iter().sum();
    let sq: f64 = theta.iter().map(|t| t * t).sum();
    let mut class_sum = vec![0.0; h];
    let mut class_sq = vec![0.0; h];
    for (&y, &t) in labels.iter().zip(&theta) {
        class_sum[y] += t;
        class_sq[y] += t * t;
    }
    let within: f64 = (0..h).map(|c| class_sum[c] * class_sum[c] - class_sq[c]).sum();
    let total = (1.0 - hom) * (sum * sum - sq) + hom * h as f64 * within;
    let c = cfg.mean_degree * n as f64 / total;

    let mut b = GraphBuilder::new(cfg.attrs.iter().map(|a| a.name.clone()), cfg.class_names());
    let class_names = cfg.class_names();
    for v in 0..n {
        let vals: Vec<&str> = attrs[v].iter().map(String::as_str).collect();
        b.add_node(v as u64, &vals, Some(&class_names[labels[v]]))?;
    }
    for u in 0..n {
        for v in (u + 1)..n {
            let mult = (1.0 - hom) + if labels[u] == labels[v] { hom * h as f64 } else { 0.0 };
            let p = (c * theta[u] * theta[v] * mult).min(1.0);
            if r.random::<f64>() < p {
                b.add_edge(u, v);
            }
        }
    }
    let (g, _) = b.build()?;
    Ok(giant_component(&g))
}
