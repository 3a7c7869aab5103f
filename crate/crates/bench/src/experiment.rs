//! The experimental protocol: repeated trials of label splitting, global
//! fitting, budgeted crawling with every crawler, sample fitting, scoring and
//! bootstrap intervals.
//!
//! Every random stream derives from the master seed and the trial, crawler,
//! regularization and checkpoint indices, so results do not depend on thread
//! scheduling and CSV outputs are byte-identical across reruns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use rlr_crawl::calibration::{bootstrap_ci_nodes, bootstrap_ci_tours, coverage_eval, BootstrapResult};
use rlr_crawl::graph::{load_graph, split_labels, AttributedGraph, NodeId};
use rlr_crawl::rlr::{fit_global, OptConfig, RegKind, Regularization, WeightMatrix};
use rlr_crawl::rng;
use rlr_crawl::samplers::{
    collect_seeds, BfsCrawler, Crawler, ForestFireCrawler, MetropolisHastingsCrawler, Method, RandomWalkCrawler,
    TourCrawler,
};
use rlr_crawl::tour_sgd::{sgd_fit_naive, sgd_fit_tours};
use rlr_crawl::{Error, Result};

use crate::config::{ExperimentConfig, GraphSource};
use crate::data::TrainingData;
use crate::metrics::{mae, Holdout};
use crate::report::{coverage_csv, metrics_csv, summarize, summary_csv, CoverageRow, MetricsRow};
use crate::synth::generate_synthetic;

#[derive(Debug, Clone, PartialEq)]
pub struct CiRow {
    pub trial: usize,
    pub crawler: Method,
    pub reg: RegKind,
    pub budget_fraction: f64,
    pub class: String,
    pub feature: String,
    pub estimate: f64,
    pub global: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRow {
    pub trial: usize,
    pub reg: RegKind,
    pub nodes: usize,
    pub converged: bool,
    pub residual: f64,
    pub rmse: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub trial: usize,
    pub crawler: Option<String>,
    pub reg: Option<String>,
    pub budget_fraction: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct TrialOutput {
    pub metrics: Vec<MetricsRow>,
    pub ci: Vec<CiRow>,
    pub globals: Vec<GlobalRow>,
    /// Per (crawler, reg, budget) interval sets with the matching global fit.
    pub intervals: Vec<((Method, RegKind, usize), Vec<BootstrapResult>, WeightMatrix)>,
    pub failures: Vec<Failure>,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub metrics: Vec<MetricsRow>,
    pub ci: Vec<CiRow>,
    pub globals: Vec<GlobalRow>,
    pub coverage: Vec<CoverageRow>,
    pub failures: Vec<Failure>,
    pub trial_wall_secs: Vec<f64>,
}

pub fn load_source(source: &GraphSource, seed: u64) -> Result<AttributedGraph> {
    match source {
        GraphSource::Synthetic(s) => generate_synthetic(s, rng::derive(seed, &[0])),
        GraphSource::Files { edges, attributes, label } => Ok(load_graph(edges, attributes, label)?.0),
    }
}

/// Crawl state kept across budget checkpoints.
enum Arm<'g> {
    Walk(Box<dyn Crawler + 'g>),
    /// Created at the first checkpoint whose budget exceeds the seed set.
    Tours(Option<TourCrawler<'g>>, Vec<NodeId>, u64),
}

fn make_arm<'g>(
    cfg: &ExperimentConfig,
    method: Method,
    walk: &'g AttributedGraph,
    start: NodeId,
    seed: u64,
) -> Result<Arm<'g>> {
    Ok(match method {
        Method::Bfs => Arm::Walk(Box::new(BfsCrawler::new(walk, start)?)),
        Method::Ff => Arm::Walk(Box::new(ForestFireCrawler::new(walk, start, cfg.crawl.ff_forward, seed)?)),
        Method::Rw => Arm::Walk(Box::new(RandomWalkCrawler::new(walk, start, seed)?)),
        Method::Mh => Arm::Walk(Box::new(MetropolisHastingsCrawler::new(walk, start, seed)?)),
        Method::Ts => {
            let k = ((cfg.crawl.seed_fraction * walk.node_count() as f64).ceil() as usize).max(1);
            let seeds = collect_seeds(walk, start, cfg.crawl.seed_walk, k, rng::derive(seed, &[0]))?;
            Arm::Tours(None, seeds, rng::derive(seed, &[1]))
        }
    })
}

/// Absolute budget for a fraction of `n` crawlable nodes.
pub fn absolute_budget(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n)
}

struct TrialContext<'a> {
    cfg: &'a ExperimentConfig,
    graph: &'a AttributedGraph,
}

fn failed_row(trial: usize, crawler: Method, reg: RegKind, fraction: f64, budget: usize, spent: usize) -> MetricsRow {
    MetricsRow {
        trial,
        crawler,
        reg,
        budget_fraction: fraction,
        budget,
        spent,
        units: 0,
        ok: false,
        mae: f64::NAN,
        rmse: f64::NAN,
        accuracy: f64::NAN,
    }
}

fn run_trial(ctx: &TrialContext<'_>, trial: usize) -> TrialOutput {
    let start = Instant::now();
    let cfg = ctx.cfg;
    let mut out = TrialOutput::default();
    if let Err(e) = trial_body(ctx, trial, &mut out) {
        // setup failed: every cell of the trial is marked failed
        out = TrialOutput::default();
        for &m in &cfg.crawlers {
            for &r in &cfg.regularization {
                for &f in &cfg.budgets {
                    out.metrics.push(failed_row(trial, m, r, f, 0, 0));
                }
            }
        }
        out.failures.push(Failure {
            trial,
            crawler: None,
            reg: None,
            budget_fraction: None,
            error: e.to_string(),
        });
    }
    out.wall_secs = start.elapsed().as_secs_f64();
    out
}

fn trial_body(ctx: &TrialContext<'_>, trial: usize, out: &mut TrialOutput) -> Result<()> {
    let cfg = ctx.cfg;
    let ts = rng::derive(cfg.seed, &[1, trial as u64]);
    let split = split_labels(ctx.graph, cfg.label_fraction, rng::derive(ts, &[0]))?;
    let data = TrainingData::new(ctx.graph.clone(), split, cfg.features.as_ref())?;
    let n = data.walk.node_count();
    if n < 2 {
        return Err(Error::Data("labeled component has fewer than two nodes".into()));
    }
    let holdout = Holdout::new(&data.graph, &data.map, &data.split, &data.hidden_labeled())?;
    let rows = data.rows();

    let mut globals = Vec::new();
    for &kind in &cfg.regularization {
        let reg = Regularization { kind, lambda: cfg.lambda };
        let fit = fit_global(&data.table, &rows, reg, &OptConfig::default())?;
        out.globals.push(GlobalRow {
            trial,
            reg: kind,
            nodes: n,
            converged: fit.converged,
            residual: fit.residual,
            rmse: holdout.rmse(&fit.weights).unwrap_or(f64::NAN),
            accuracy: holdout.accuracy(&fit.weights).unwrap_or(f64::NAN),
        });
        globals.push(fit.weights);
    }

    let start_node = rng::derive(ts, &[1]) as usize % n;
    for (mi, &method) in cfg.crawlers.iter().enumerate() {
        let arm_seed = rng::derive(ts, &[2, mi as u64]);
        let mut arm = match make_arm(cfg, method, &data.walk, start_node, arm_seed) {
            Ok(a) => a,
            Err(e) => {
                for &r in &cfg.regularization {
                    for &f in &cfg.budgets {
                        out.metrics.push(failed_row(trial, method, r, f, absolute_budget(f, n), 0));
                    }
                }
                out.failures.push(Failure {
                    trial,
                    crawler: Some(method.to_string()),
                    reg: None,
                    budget_fraction: None,
                    error: e.to_string(),
                });
                continue;
            }
        };
        for (bi, &fraction) in cfg.budgets.iter().enumerate() {
            let budget = absolute_budget(fraction, n);
            let with_ci = cfg.ci.budgets.contains(&fraction);
            let (spent, units, crawl_err) = match &mut arm {
                Arm::Walk(c) => {
                    c.advance(budget);
                    (c.spent(), c.access().visited().len(), None)
                }
                Arm::Tours(slot, seeds, seed) => {
                    if slot.is_none() && budget > seeds.len() {
                        *slot = Some(TourCrawler::new(&data.walk, seeds, *seed)?);
                    }
                    match slot {
                        Some(c) => {
                            c.advance(budget);
                            let m = c.tour_count();
                            let err = (m == 0).then(|| "no completed tour within budget".to_string());
                            (c.spent(), m, err)
                        }
                        None => (0, 0, Some(format!("budget {budget} does not exceed the seed set"))),
                    }
                }
            };
            if spent > budget {
                return Err(Error::Data(format!("{method} spent {spent} of budget {budget}")));
            }
            for (ri, &kind) in cfg.regularization.iter().enumerate() {
                let reg = Regularization { kind, lambda: cfg.lambda };
                let fit_seed = rng::derive(ts, &[3, mi as u64, ri as u64, bi as u64]);
                let fitted = match (&crawl_err, &arm) {
                    (Some(e), _) => Err(Error::Data(e.clone())),
                    (None, Arm::Walk(c)) => sgd_fit_naive(&c.sample(), &data.table, reg, &cfg.sgd, fit_seed),
                    (None, Arm::Tours(c, _, _)) => {
                        let tours = c.as_ref().expect("tour crawler exists").tours();
                        sgd_fit_tours(&tours, &data.table, reg, &cfg.sgd, fit_seed).map(|f| f.0)
                    }
                };
                let w = match fitted {
                    Ok(w) => w,
                    Err(e) => {
                        out.metrics.push(failed_row(trial, method, kind, fraction, budget, spent));
                        out.failures.push(Failure {
                            trial,
                            crawler: Some(method.to_string()),
                            reg: Some(kind.tag().to_string()),
                            budget_fraction: Some(fraction),
                            error: e.to_string(),
                        });
                        continue;
                    }
                };
                out.metrics.push(MetricsRow {
                    trial,
                    crawler: method,
                    reg: kind,
                    budget_fraction: fraction,
                    budget,
                    spent,
                    units,
                    ok: true,
                    mae: mae(&w, &globals[ri])?,
                    rmse: holdout.rmse(&w)?,
                    accuracy: holdout.accuracy(&w)?,
                });
                if !with_ci {
                    continue;
                }
                let ci_seed = rng::derive(ts, &[4, mi as u64, ri as u64, bi as u64]);
                let boot = match &arm {
                    Arm::Walk(c) => bootstrap_ci_nodes(&c.sample(), &data.table, reg, &cfg.sgd, &cfg.ci.bootstrap, ci_seed),
                    Arm::Tours(c, _, _) => {
                        let tours = c.as_ref().expect("tour crawler exists").tours();
                        bootstrap_ci_tours(&tours, &data.table, reg, &cfg.sgd, &cfg.ci.bootstrap, ci_seed)
                    }
                };
                match boot {
                    Ok(results) => {
                        for r in &results {
                            out.ci.push(CiRow {
                                trial,
                                crawler: method,
                                reg: kind,
                                budget_fraction: fraction,
                                class: data.class_names()[r.class].clone(),
                                feature: data.feature_names()[r.feature].clone(),
                                estimate: w.get(r.class, r.feature),
                                global: globals[ri].get(r.class, r.feature),
                                lower: r.lower,
                                upper: r.upper,
                            });
                        }
                        out.intervals.push(((method, kind, bi), results, globals[ri].clone()));
                    }
                    Err(e) => out.failures.push(Failure {
                        trial,
                        crawler: Some(method.to_string()),
                        reg: Some(kind.tag().to_string()),
                        budget_fraction: Some(fraction),
                        error: format!("bootstrap: {e}"),
                    }),
                }
            }
        }
    }
    Ok(())
}

/// Runs every trial and aggregates the results in memory.
pub fn run_trials(cfg: &ExperimentConfig, graph: &AttributedGraph) -> Result<ExperimentResult> {
    cfg.validate()?;
    let ctx = TrialContext { cfg, graph };
    let run = || (0..cfg.trials).into_par_iter().map(|t| run_trial(&ctx, t)).collect::<Vec<_>>();
    let outputs = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)
    } else {
        run()
    };

    let mut res = ExperimentResult {
        metrics: Vec::new(),
        ci: Vec::new(),
        globals: Vec::new(),
        coverage: Vec::new(),
        failures: Vec::new(),
        trial_wall_secs: Vec::new(),
    };
    let mut groups: Vec<((Method, RegKind, usize), Vec<(Vec<BootstrapResult>, WeightMatrix)>)> = Vec::new();
    for o in outputs {
        res.metrics.extend(o.metrics);
        res.ci.extend(o.ci);
        res.globals.extend(o.globals);
        res.failures.extend(o.failures);
        res.trial_wall_secs.push(o.wall_secs);
        for (key, results, global) in o.intervals {
            match groups.iter_mut().find(|g| g.0 == key) {
                Some(g) => g.1.push((results, global)),
                None => groups.push((key, vec![(results, global)])),
            }
        }
    }
    groups.sort_by(|a, b| {
        let pos = |k: &(Method, RegKind, usize)| {
            (
                cfg.crawlers.iter().position(|&m| m == k.0),
                cfg.regularization.iter().position(|&r| r == k.1),
                k.2,
            )
        };
        pos(&a.0).cmp(&pos(&b.0))
    });
    for ((method, reg, bi), trials) in groups {
        let rep = coverage_eval(&trials)?;
        res.coverage.push(CoverageRow {
            crawler: method,
            reg,
            budget_fraction: cfg.budgets[bi],
            trials: trials.len(),
            coverage: rep.coverage,
            avg_width: rep.avg_width,
        });
    }
    Ok(res)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    Ok(path)
}

pub fn ci_rows_csv(rows: &[CiRow]) -> String {
    let mut out = String::from("trial,crawler,reg,budget_fraction,class,feature,estimate,global,lower,upper,width,covered\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.crawler,
            r.reg.tag(),
            r.budget_fraction,
            r.class,
            r.feature,
            r.estimate,
            r.global,
            r.lower,
            r.upper,
            r.upper - r.lower,
            u8::from(r.lower <= r.global && r.global <= r.upper)
        )
        .unwrap();
    }
    out
}

pub fn global_rows_csv(rows: &[GlobalRow]) -> String {
    let mut out = String::from("trial,reg,nodes,converged,residual,rmse,accuracy\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.reg.tag(),
            r.nodes,
            u8::from(r.converged),
            r.residual,
            r.rmse,
            r.accuracy
        )
        .unwrap();
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    seed: u64,
    trials: usize,
    graph_nodes: usize,
    graph_edges: usize,
    wall_secs: f64,
    trial_wall_secs: &'a [f64],
    failures: &'a [Failure],
    config: String,
}

/// Runs the protocol and writes `metrics.csv`, `summary.csv`, `global.csv`,
/// `ci.csv`, `coverage.csv` and `manifest.json` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentResult> {
    let start = Instant::now();
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io { path: out_dir.to_path_buf(), source: e })?;
    let graph = load_source(&cfg.graph, cfg.seed)?;
    let res = run_trials(cfg, &graph)?;
    write(out_dir, "metrics.csv", &metrics_csv(&res.metrics))?;
    write(out_dir, "summary.csv", &summary_csv(&summarize(&res.metrics)))?;
    write(out_dir, "global.csv", &global_rows_csv(&res.globals))?;
    write(out_dir, "ci.csv", &ci_rows_csv(&res.ci))?;
    write(out_dir, "coverage.csv", &coverage_csv(&res.coverage))?;
    let manifest = Manifest {
        tool: "rlr-crawl",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        trials: cfg.trials,
        graph_nodes: graph.node_count(),
        graph_edges: graph.edge_count(),
        wall_secs: start.elapsed().as_secs_f64(),
        trial_wall_secs: &res.trial_wall_secs,
        failures: &res.failures,
        config: cfg.to_toml(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    write(out_dir, "manifest.json", &json)?;
    Ok(res)
}
