//! Tour-based estimators of the full-graph log-likelihood and its gradient,
//! and the SGD trainers built on them.
//!
//! With seed set `S`, super-node degree `d_S` and `m` tours, the estimate of
//! `Σ_v f(v)` is
//!
//! ```text
//! (d_S / m) Σ_k Σ_{interior v of tour k} f(v) / d_v  +  Σ_{v ∈ S} f(v)
//! ```
//!
//! which is unbiased for every `f`. Both the log-likelihood (`f = g`) and its
//! gradient (`f = g'_j`) are estimated this way.
//!
//! The trainers minimize a weighted objective `−Σ c_v g(v) + penalty(w)` whose
//! data term is built from *units* (tours, or nodes for the naive trainer).
//! Every step draws `b` units uniformly with replacement and uses the unbiased
//! mini-batch estimate of the data term. Steps are taken on the objective
//! divided by the estimated node count `Σ c_v`, which keeps the default rates
//! meaningful across graph sizes without moving the minimizer.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::{ClassId, NodeId};
use crate::rlr::{accumulate, Regularization, WeightMatrix, WeightedRows};
use crate::rng;
use crate::samplers::{CrawlSample, TourCollection};

/// Weight norm above which SGD is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e8;

/// An estimate split into per-tour contributions and the exact seed term.
#[derive(Debug, Clone, PartialEq)]
pub struct TourEstimate<T> {
    /// `Σ_{interior v} f(v) / d_v` for each tour.
    pub per_tour_values: Vec<T>,
    pub seed_term: T,
    pub d_s: usize,
    /// `(d_S / m) Σ per_tour_values + seed_term`.
    pub combined: T,
}

fn check_tours(tours: &TourCollection, table: &FeatureTable) -> Result<()> {
    let in_table = |v: NodeId| -> Result<()> {
        if v >= table.len() {
            return Err(Error::data(format!("node {v} outside the feature table")));
        }
        table.require_label(v).map(|_| ())
    };
    if tours.seeds.is_empty() || tours.seeds.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::data("seed set must be nonempty, sorted and distinct"));
    }
    for &s in &tours.seeds {
        in_table(s)?;
    }
    if tours.tours.is_empty() && tours.d_s > 0 {
        return Err(Error::argument("no tours to estimate from"));
    }
    for (k, tour) in tours.tours.iter().enumerate() {
        let is_seed = |v: &NodeId| tours.seeds.binary_search(v).is_ok();
        if tour.len() < 3 || !is_seed(&tour[0]) || !is_seed(&tour[tour.len() - 1]) {
            return Err(Error::data(format!("tour {k} does not start and end in the seed set")));
        }
        for v in &tour[1..tour.len() - 1] {
            if is_seed(v) {
                return Err(Error::data(format!("tour {k} revisits the seed set early")));
            }
            in_table(*v)?;
            if tours.degrees.get(v).copied().unwrap_or(0) == 0 {
                return Err(Error::data(format!("node {v}: degree not recorded")));
            }
        }
    }
    Ok(())
}

fn check_weights(table: &FeatureTable, w: &WeightMatrix) -> Result<()> {
    if table.dim() != w.dim() || table.classes() != w.classes() {
        return Err(Error::argument("weights do not match the feature table"));
    }
    if !w.is_finite() {
        return Err(Error::argument("non-finite weight"));
    }
    Ok(())
}

fn combine(d_s: usize, m: usize, tour_sum: f64, seed_term: f64) -> f64 {
    if m == 0 {
        seed_term
    } else {
        d_s as f64 / m as f64 * tour_sum + seed_term
    }
}

/// Tour estimate of the log-likelihood summed over every node of the graph
/// the tours were sampled on. Table row `v` must describe node `v`.
pub fn estimate_loglik(tours: &TourCollection, table: &FeatureTable, w: &WeightMatrix) -> Result<TourEstimate<f64>> {
    check_tours(tours, table)?;
    check_weights(table, w)?;
    let mut logp = vec![0.0; w.classes()];
    let mut term = |v: NodeId| {
        let y = table.label(v).expect("checked");
        accumulate(w.as_slice(), w.dim(), table.row(v), y, 0.0, &mut logp, None)
    };
    let per_tour_values: Vec<f64> = tours
        .tours
        .iter()
        .map(|tour| {
            tour[1..tour.len() - 1]
                .iter()
                .map(|&v| term(v) / tours.degrees[&v] as f64)
                .sum()
        })
        .collect();
    let mut seed_term = 0.0;
    for &s in &tours.seeds {
        seed_term += term(s);
    }
    let tour_sum: f64 = per_tour_values.iter().sum();
    Ok(TourEstimate {
        combined: combine(tours.d_s, per_tour_values.len(), tour_sum, seed_term),
        per_tour_values,
        seed_term,
        d_s: tours.d_s,
    })
}

/// Tour estimate of the gradient for every class, each value laid out like
/// the weight matrix (row-major, `classes × dim`).
pub fn estimate_gradient_all(
    tours: &TourCollection,
    table: &FeatureTable,
    w: &WeightMatrix,
) -> Result<TourEstimate<Vec<f64>>> {
    check_tours(tours, table)?;
    check_weights(table, w)?;
    let len = w.as_slice().len();
    let mut logp = vec![0.0; w.classes()];
    let mut add = |v: NodeId, coef: f64, out: &mut [f64]| {
        let y = table.label(v).expect("checked");
        accumulate(w.as_slice(), w.dim(), table.row(v), y, coef, &mut logp, Some(out));
    };
    let per_tour_values: Vec<Vec<f64>> = tours
        .tours
        .iter()
        .map(|tour| {
            let mut acc = vec![0.0; len];
            for &v in &tour[1..tour.len() - 1] {
                add(v, 1.0 / tours.degrees[&v] as f64, &mut acc);
            }
            acc
        })
        .collect();
    let mut seed_term = vec![0.0; len];
    for &s in &tours.seeds {
        add(s, 1.0, &mut seed_term);
    }
    let combined = (0..len)
        .map(|i| {
            let tour_sum: f64 = per_tour_values.iter().map(|t| t[i]).sum();
            combine(tours.d_s, per_tour_values.len(), tour_sum, seed_term[i])
        })
        .collect();
    Ok(TourEstimate {
        per_tour_values,
        seed_term,
        d_s: tours.d_s,
        combined,
    })
}

/// Tour estimate of the gradient with respect to `w_j`.
pub fn estimate_gradient(
    tours: &TourCollection,
    table: &FeatureTable,
    w: &WeightMatrix,
    j: ClassId,
) -> Result<TourEstimate<Vec<f64>>> {
    if j >= w.classes() {
        return Err(Error::argument(format!("class {j} out of range")));
    }
    let all = estimate_gradient_all(tours, table, w)?;
    let d = w.dim();
    let pick = |v: &Vec<f64>| v[j * d..(j + 1) * d].to_vec();
    Ok(TourEstimate {
        per_tour_values: all.per_tour_values.iter().map(pick).collect(),
        seed_term: pick(&all.seed_term),
        d_s: all.d_s,
        combined: pick(&all.combined),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub eta0: f64,
    pub tau: f64,
    /// Mini-batch size in units; `None` means `min(32, units)`. A batch at
    /// least as large as the unit count uses every unit once per step.
    pub batch_size: Option<usize>,
    pub steps: usize,
    /// Record a trace point every this many steps (0 disables the trace).
    pub trace_every: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            eta0: 0.1,
            tau: 100.0,
            batch_size: None,
            steps: 2000,
            trace_every: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) || !(self.tau > 0.0) {
            return Err(Error::Config("SGD rates must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("SGD batch size must be positive".into()));
        }
        Ok(())
    }

    pub fn rate(&self, step: usize) -> f64 {
        self.eta0 / (1.0 + step as f64 / self.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    /// Mini-batch estimate of the penalized negative log-likelihood.
    pub objective: f64,
    /// Norm of the mini-batch gradient of that objective.
    pub grad_norm: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace(pub Vec<TracePoint>);

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,objective,grad_norm,wall_secs\n");
        for p in &self.0 {
            out.push_str(&format!("{},{},{},{}\n", p.step, p.objective, p.grad_norm, p.wall_secs));
        }
        out
    }
}

/// Data term built from exchangeable units. The full objective's coefficient
/// of row `r` is `fixed[r] + (scale / units) Σ_{units} unit[r]`.
#[derive(Debug, Clone)]
pub struct UnitObjective {
    fixed: Vec<(usize, f64)>,
    units: Vec<Vec<(usize, f64)>>,
    scale: f64,
}

impl UnitObjective {
    /// Tours as units: each contributes `1/d_v` per interior visit, scaled by
    /// `d_S`; seeds are fixed with weight 1.
    pub fn from_tours(tours: &TourCollection, table: &FeatureTable) -> Result<Self> {
        check_tours(tours, table)?;
        let units = tours
            .tours
            .iter()
            .map(|tour| {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                for &v in &tour[1..tour.len() - 1] {
                    entries.push((v, 1.0 / tours.degrees[&v] as f64));
                }
                merge(entries)
            })
            .collect();
        Ok(UnitObjective {
            fixed: tours.seeds.iter().map(|&s| (s, 1.0)).collect(),
            units,
            scale: tours.d_s as f64,
        })
    }

    /// Visited nodes as i.i.d. units with unit weight.
    pub fn from_sample(sample: &CrawlSample, table: &FeatureTable) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::argument("empty crawl sample"));
        }
        for &v in &sample.visited {
            if v >= table.len() {
                return Err(Error::data(format!("node {v} outside the feature table")));
            }
            table.require_label(v)?;
        }
        Ok(UnitObjective {
            fixed: Vec::new(),
            units: sample.visited.iter().map(|&v| vec![(v, 1.0)]).collect(),
            scale: sample.len() as f64,
        })
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Objective over the units at `indices` (repeats allowed), keeping the
    /// fixed part and scale.
    pub fn resample(&self, indices: &[usize]) -> UnitObjective {
        UnitObjective {
            fixed: self.fixed.clone(),
            units: indices.iter().map(|&i| self.units[i].clone()).collect(),
            scale: self.scale,
        }
    }

    /// Per-row coefficients of the full objective, sorted by row.
    fn entries(&self) -> Vec<(usize, f64)> {
        let mut entries = self.fixed.clone();
        if !self.units.is_empty() {
            let c = self.scale / self.units.len() as f64;
            for unit in &self.units {
                entries.extend(unit.iter().map(|&(r, a)| (r, c * a)));
            }
        }
        merge(entries)
    }

    /// The full (deterministic) objective as weighted rows.
    pub fn weighted_rows(&self, table: &FeatureTable) -> Result<WeightedRows> {
        let entries = self.entries();
        WeightedRows::new(
            table,
            entries.iter().map(|e| e.0).collect(),
            entries.iter().map(|e| e.1).collect(),
        )
    }

    /// Estimated node count `Σ_r c_r` of the full objective.
    pub fn total_weight(&self) -> f64 {
        self.entries().iter().map(|e| e.1).sum()
    }
}

/// Sums entries per row, sorted by row. Values are added in sorted order so
/// the result does not depend on the input order.
fn merge(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (r, a) in entries {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += a,
            _ => out.push((r, a)),
        }
    }
    out
}

/// SGD on a [`UnitObjective`], starting from zero weights.
pub fn sgd_fit(
    obj: &UnitObjective,
    table: &FeatureTable,
    reg: Regularization,
    cfg: &SgdConfig,
    rng_seed: u64,
) -> Result<(WeightMatrix, Trace)> {
    cfg.validate()?;
    reg.validate()?;
    let m = obj.units.len();
    if m == 0 && obj.fixed.is_empty() {
        return Err(Error::argument("nothing to fit"));
    }
    let (classes, dim) = (table.classes(), table.dim());
    let pen = table.penalized();
    let norm = obj.total_weight();
    if !(norm > 0.0) {
        return Err(Error::argument("objective has no weight"));
    }
    let b = cfg.batch_size.unwrap_or(32.min(m)).max(1);
    let full_batch = b >= m;
    let labels: Vec<ClassId> = (0..table.len()).map(|r| table.label(r).unwrap_or(0)).collect();

    let mut rng = rng::seeded(rng_seed);
    let mut w = vec![0.0; classes * dim];
    let mut grad = vec![0.0; classes * dim];
    let mut logp = vec![0.0; classes];
    let mut coef = vec![0.0; table.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut batch: Vec<usize> = Vec::with_capacity(b);
    let mut trace = Trace::default();
    let start = Instant::now();

    // with a full batch every step sees the same data term
    let full = if full_batch { obj.entries() } else { Vec::new() };

    for step in 0..cfg.steps {
        grad.fill(0.0);
        let mut ll = 0.0;
        if full_batch {
            for &(r, a) in &full {
                ll += a * accumulate(&w, dim, table.row(r), labels[r], a, &mut logp, Some(&mut grad));
            }
        } else {
            batch.clear();
            batch.extend((0..b).map(|_| rng.random_range(0..m)));
            let c = obj.scale / b as f64;
            for &u in &batch {
                for &(r, a) in &obj.units[u] {
                    if coef[r] == 0.0 {
                        touched.push(r);
                    }
                    coef[r] += c * a;
                }
            }
            for &(r, a) in &obj.fixed {
                ll += a * accumulate(&w, dim, table.row(r), labels[r], a, &mut logp, Some(&mut grad));
            }
            for &r in &touched {
                let a = coef[r];
                ll += a * accumulate(&w, dim, table.row(r), labels[r], a, &mut logp, Some(&mut grad));
                coef[r] = 0.0;
            }
            touched.clear();
        }

        // grad now holds ∇(estimated log-likelihood); descend on −ll + penalty
        grad.iter_mut().for_each(|x| *x = -*x);
        reg.add_smooth_gradient(&w, pen, 1.0, &mut grad);
        let eta = cfg.rate(step);
        if cfg.trace_every > 0 && step % cfg.trace_every == 0 {
            trace.0.push(TracePoint {
                step,
                objective: -ll + reg.penalty(&w, pen),
                grad_norm: grad.iter().map(|x| x * x).sum::<f64>().sqrt(),
                wall_secs: start.elapsed().as_secs_f64(),
            });
        }
        let k = eta / norm;
        for (x, gi) in w.iter_mut().zip(&grad) {
            *x -= k * gi;
        }
        reg.prox(&mut w, pen, k);

        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !wn.is_finite() || wn > DIVERGENCE_NORM {
            return Err(Error::Diverged { step, rate: eta, norm: wn });
        }
    }
    let w = WeightMatrix::from_vec(classes, dim, w)?.with_reg(reg);
    Ok((w, trace))
}

/// Tour SGD: mini-batches of tours plugged into the tour estimator.
pub fn sgd_fit_tours(
    tours: &TourCollection,
    table: &FeatureTable,
    reg: Regularization,
    cfg: &SgdConfig,
    rng_seed: u64,
) -> Result<(WeightMatrix, Trace)> {
    if tours.is_empty() && tours.d_s > 0 {
        return Err(Error::argument("no tours to fit on"));
    }
    let obj = UnitObjective::from_tours(tours, table)?;
    sgd_fit(&obj, table, reg, cfg, rng_seed)
}

/// Naive SGD treating the visited nodes as i.i.d. training examples.
pub fn sgd_fit_naive(
    sample: &CrawlSample,
    table: &FeatureTable,
    reg: Regularization,
    cfg: &SgdConfig,
    rng_seed: u64,
) -> Result<WeightMatrix> {
    let obj = UnitObjective::from_sample(sample, table)?;
    Ok(sgd_fit(&obj, table, reg, cfg, rng_seed)?.0)
}
