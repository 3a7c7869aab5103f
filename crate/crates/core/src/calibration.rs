//! Bootstrap confidence intervals for fitted weights and their coverage.
//!
//! Each replicate resamples the training units (tours, or visited nodes for
//! the baseline crawlers) with replacement, refits by SGD and records every
//! weight. Intervals are nearest-rank percentiles of the replicates. The seed
//! set and `d_S` of a tour collection stay fixed across replicates.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::ClassId;
use crate::rlr::{Regularization, WeightMatrix};
use crate::rng;
use crate::samplers::{CrawlSample, TourCollection};
use crate::tour_sgd::{sgd_fit, SgdConfig, UnitObjective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 200,
            alpha: 0.05,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config("bootstrap needs at least 2 replicates".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// Percentile interval of one weight `w[class][feature]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub class: ClassId,
    pub feature: usize,
    /// Values from the successful replicates, in replicate order.
    pub replicates: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl BootstrapResult {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Nearest-rank percentile: the `ceil(p/100 · N)`-th smallest value
/// (1-based, at least the first).
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty set");
    let n = sorted.len();
    // the small slack absorbs representation error in p/100 · N
    let rank = ((p / 100.0 * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

fn intervals(replicates: &[WeightMatrix], alpha: f64) -> Vec<BootstrapResult> {
    let (classes, dim) = (replicates[0].classes(), replicates[0].dim());
    let mut out = Vec::with_capacity(classes * dim);
    for class in 0..classes {
        for feature in 0..dim {
            let values: Vec<f64> = replicates.iter().map(|w| w.get(class, feature)).collect();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            out.push(BootstrapResult {
                class,
                feature,
                lower: percentile_nearest_rank(&sorted, 100.0 * alpha / 2.0),
                upper: percentile_nearest_rank(&sorted, 100.0 * (1.0 - alpha / 2.0)),
                replicates: values,
                alpha,
            });
        }
    }
    out
}

/// Bootstraps any unit-based objective. Replicate `i` draws its resample and
/// SGD stream from seeds derived from `(rng_seed, i)`, so results do not
/// depend on scheduling.
pub fn bootstrap_units(
    obj: &UnitObjective,
    table: &FeatureTable,
    reg: Regularization,
    sgd: &SgdConfig,
    cfg: &BootstrapConfig,
    rng_seed: u64,
) -> Result<Vec<BootstrapResult>> {
    cfg.validate()?;
    let m = obj.unit_count();
    if m == 0 {
        return Err(Error::argument("nothing to resample"));
    }
    let fits: Vec<Result<WeightMatrix>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::seeded(rng::derive(rng_seed, &[i, 0]));
            let idx: Vec<usize> = (0..m).map(|_| r.random_range(0..m)).collect();
            let resampled = obj.resample(&idx);
            sgd_fit(&resampled, table, reg, sgd, rng::derive(rng_seed, &[i, 1])).map(|f| f.0)
        })
        .collect();
    let total = fits.len();
    let ok: Vec<WeightMatrix> = fits.into_iter().filter_map(Result::ok).collect();
    let failed = total - ok.len();
    if failed * 10 > total || ok.is_empty() {
        return Err(Error::BootstrapFailed { failed, total });
    }
    Ok(intervals(&ok, cfg.alpha))
}

/// Intervals from tour resamples refit by tour SGD.
pub fn bootstrap_ci_tours(
    tours: &TourCollection,
    table: &FeatureTable,
    reg: Regularization,
    sgd: &SgdConfig,
    cfg: &BootstrapConfig,
    rng_seed: u64,
) -> Result<Vec<BootstrapResult>> {
    let obj = UnitObjective::from_tours(tours, table)?;
    bootstrap_units(&obj, table, reg, sgd, cfg, rng_seed)
}

/// Intervals from visited-node resamples refit by naive SGD.
pub fn bootstrap_ci_nodes(
    sample: &CrawlSample,
    table: &FeatureTable,
    reg: Regularization,
    sgd: &SgdConfig,
    cfg: &BootstrapConfig,
    rng_seed: u64,
) -> Result<Vec<BootstrapResult>> {
    let obj = UnitObjective::from_sample(sample, table)?;
    bootstrap_units(&obj, table, reg, sgd, cfg, rng_seed)
}

/// CSV with columns `class,feature,estimate,lower,upper,width`.
pub fn ci_to_csv(
    results: &[BootstrapResult],
    estimate: &WeightMatrix,
    class_names: &[String],
    feature_names: &[String],
) -> String {
    let mut out = String::from("class,feature,estimate,lower,upper,width\n");
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            class_names[r.class],
            feature_names[r.feature],
            estimate.get(r.class, r.feature),
            r.lower,
            r.upper,
            r.width()
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCoverage {
    pub class: ClassId,
    pub feature: usize,
    pub coverage: f64,
    pub avg_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub per_param: Vec<ParamCoverage>,
    /// Averages of the per-parameter values.
    pub coverage: f64,
    pub avg_width: f64,
}

/// Fraction of trials whose interval contains the reference weight, and the
/// mean interval width, per parameter and pooled over parameters.
pub fn coverage_eval(trials: &[(Vec<BootstrapResult>, WeightMatrix)]) -> Result<CoverageReport> {
    let Some((first, _)) = trials.first() else {
        return Err(Error::argument("coverage needs at least one trial"));
    };
    let params: Vec<(ClassId, usize)> = first.iter().map(|r| (r.class, r.feature)).collect();
    let mut hits = vec![0usize; params.len()];
    let mut widths = vec![0.0; params.len()];
    for (results, reference) in trials {
        if results.len() != params.len() {
            return Err(Error::argument("trials cover different parameter sets"));
        }
        for (i, r) in results.iter().enumerate() {
            if (r.class, r.feature) != params[i] {
                return Err(Error::argument("trials list parameters in different orders"));
            }
            if r.contains(reference.get(r.class, r.feature)) {
                hits[i] += 1;
            }
            widths[i] += r.width();
        }
    }
    let t = trials.len() as f64;
    let per_param: Vec<ParamCoverage> = params
        .iter()
        .enumerate()
        .map(|(i, &(class, feature))| ParamCoverage {
            class,
            feature,
            coverage: hits[i] as f64 / t,
            avg_width: widths[i] / t,
        })
        .collect();
    let k = per_param.len().max(1) as f64;
    Ok(CoverageReport {
        coverage: per_param.iter().map(|p| p.coverage).sum::<f64>() / k,
        avg_width: per_param.iter().map(|p| p.avg_width).sum::<f64>() / k,
        per_param,
    })
}
