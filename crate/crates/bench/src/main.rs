use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rlr_crawl::calibration::{bootstrap_ci_nodes, bootstrap_ci_tours, ci_to_csv, BootstrapConfig};
use rlr_crawl::features::FeatureSpec;
use rlr_crawl::graph::{split_labels, write_attributes, write_edges, AttributedGraph};
use rlr_crawl::rlr::{fit_global, OptConfig, RegKind, Regularization, WeightMatrix};
use rlr_crawl::rng;
use rlr_crawl::samplers::{
    collect_seeds, crawl_bfs, crawl_ff, crawl_mh, crawl_rw, read_sample, read_tours, write_sample, write_tours,
    Crawler, Method, TourCrawler,
};
use rlr_crawl::tour_sgd::{sgd_fit_naive, sgd_fit_tours};
use rlr_crawl::{Error, Result};

use rlr_crawl_bench::config::{ExperimentConfig, GraphSource};
use rlr_crawl_bench::data::TrainingData;
use rlr_crawl_bench::experiment::{absolute_budget, load_source, run_experiment};
use rlr_crawl_bench::report::write_report;

/// Relational logistic regression from network crawls.
///
/// Every command reads an optional experiment config (`--config`); flags
/// override the matching config keys.
#[derive(Parser)]
#[command(name = "rlr-crawl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic graph of the config and write it to files.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Crawl the labeled subgraph with one crawler and write the sample.
    Crawl {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Method,
        /// Budget as a fraction of the labeled subgraph.
        #[arg(long)]
        budget: f64,
        /// Original id of the start node; random when absent.
        #[arg(long)]
        start: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit weights from a crawl sample, a tour file, or the whole labeled subgraph.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: CrawlInput,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrap confidence intervals from a crawl sample or a tour file.
    Ci {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: CrawlInput,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full experimental protocol.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Summarize `metrics.csv` of an experiment directory into tables and plot data.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config in TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge file; replaces the config's graph source together with `--attributes`.
    #[arg(long, requires = "attributes")]
    edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    attributes: Option<PathBuf>,
    /// Name of the label column of the attribute file.
    #[arg(long, default_value = "label")]
    label: String,
    /// Feature definition in TOML.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    label_fraction: Option<f64>,
    #[arg(long)]
    reg: Option<RegKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed_fraction: Option<f64>,
    #[arg(long)]
    ff_forward: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
#[group(multiple = false)]
struct CrawlInput {
    /// Node crawl sample file.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Tour collection file.
    #[arg(long)]
    tours: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_toml(&read_text(p)?)?,
            None => ExperimentConfig::default(),
        };
        cfg.seed = self.seed;
        if let (Some(edges), Some(attributes)) = (&self.edges, &self.attributes) {
            cfg.graph = GraphSource::Files {
                edges: edges.clone(),
                attributes: attributes.clone(),
                label: self.label.clone(),
            };
        }
        if let Some(p) = &self.features {
            cfg.features = Some(FeatureSpec::from_toml(&read_text(p)?)?);
        }
        if let Some(f) = self.label_fraction {
            cfg.label_fraction = f;
        }
        if let Some(r) = self.reg {
            cfg.regularization = vec![r];
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(f) = self.seed_fraction {
            cfg.crawl.seed_fraction = f;
        }
        if let Some(f) = self.ff_forward {
            cfg.crawl.ff_forward = f;
        }
        if let Some(s) = self.steps {
            cfg.sgd.steps = s;
        }
        if let Some(e) = self.eta0 {
            cfg.sgd.eta0 = e;
        }
        if let Some(t) = self.tau {
            cfg.sgd.tau = t;
        }
        if self.batch_size.is_some() {
            cfg.sgd.batch_size = self.batch_size;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The graph, its label split and the training data, all fixed by the seed.
fn prepare(cfg: &ExperimentConfig) -> Result<TrainingData> {
    let graph: AttributedGraph = load_source(&cfg.graph, cfg.seed)?;
    let split = split_labels(&graph, cfg.label_fraction, rng::derive(cfg.seed, &[1]))?;
    TrainingData::new(graph, split, cfg.features.as_ref())
}

fn regularization(cfg: &ExperimentConfig) -> Regularization {
    Regularization { kind: cfg.regularization[0], lambda: cfg.lambda }
}

fn fit(data: &TrainingData, cfg: &ExperimentConfig, input: &CrawlInput) -> Result<WeightMatrix> {
    let reg = regularization(cfg);
    let seed = rng::derive(cfg.seed, &[3]);
    if let Some(p) = &input.sample {
        sgd_fit_naive(&read_sample(&data.walk, p)?, &data.table, reg, &cfg.sgd, seed)
    } else if let Some(p) = &input.tours {
        Ok(sgd_fit_tours(&read_tours(&data.walk, p)?, &data.table, reg, &cfg.sgd, seed)?.0)
    } else {
        let out = fit_global(&data.table, &data.rows(), reg, &OptConfig::default())?;
        if !out.converged {
            eprintln!("warning: global fit stopped at residual {:.3e}", out.residual);
        }
        Ok(out.weights)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, out_dir } => {
            let cfg = common.config()?;
            if !matches!(cfg.graph, GraphSource::Synthetic(_)) {
                return Err(Error::Config("generate needs a synthetic graph source".into()));
            }
            let g = load_source(&cfg.graph, cfg.seed)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io { path: out_dir.clone(), source: e })?;
            write_edges(&g, out_dir.join("edges.txt"))?;
            write_attributes(&g, out_dir.join("attributes.csv"), &common.label)?;
            println!("{} nodes, {} edges", g.node_count(), g.edge_count());
        }
        Command::Crawl { common, method, budget, start, out } => {
            let cfg = common.config()?;
            let data = prepare(&cfg)?;
            let walk = &data.walk;
            let n = walk.node_count();
            if !(budget > 0.0 && budget <= 1.0) {
                return Err(Error::Argument(format!("budget fraction {budget} outside (0, 1]")));
            }
            let b = absolute_budget(budget, n);
            let start = match start {
                Some(id) => walk
                    .node_by_original(id)
                    .ok_or_else(|| Error::Argument(format!("start node {id} is not in the labeled subgraph")))?,
                None => rng::derive(cfg.seed, &[2]) as usize % n,
            };
            let seed = rng::derive(cfg.seed, &[4]);
            match method {
                Method::Bfs => write_sample(walk, &crawl_bfs(walk, start, b)?, &out)?,
                Method::Ff => write_sample(walk, &crawl_ff(walk, start, b, cfg.crawl.ff_forward, seed)?, &out)?,
                Method::Rw => write_sample(walk, &crawl_rw(walk, start, b, seed)?, &out)?,
                Method::Mh => write_sample(walk, &crawl_mh(walk, start, b, seed)?, &out)?,
                Method::Ts => {
                    let k = ((cfg.crawl.seed_fraction * n as f64).ceil() as usize).max(1);
                    let seeds = collect_seeds(walk, start, cfg.crawl.seed_walk, k, rng::derive(seed, &[0]))?;
                    if b <= seeds.len() {
                        return Err(Error::Argument(format!("budget {b} does not exceed the {k} seeds")));
                    }
                    let mut c = TourCrawler::new(walk, &seeds, rng::derive(seed, &[1]))?;
                    c.advance(b);
                    write_tours(walk, &c.tours(), &out)?;
                }
            }
        }
        Command::Fit { common, input, out } => {
            let cfg = common.config()?;
            let data = prepare(&cfg)?;
            let w = fit(&data, &cfg, &input)?.with_reg(regularization(&cfg));
            w.write_csv(&out, data.class_names(), data.feature_names())?;
        }
        Command::Ci { common, input, replicates, alpha, out } => {
            let cfg = common.config()?;
            let data = prepare(&cfg)?;
            let boot = BootstrapConfig {
                replicates: replicates.unwrap_or(cfg.ci.bootstrap.replicates),
                alpha: alpha.unwrap_or(cfg.ci.bootstrap.alpha),
            };
            let reg = regularization(&cfg);
            let seed = rng::derive(cfg.seed, &[5]);
            let results = if let Some(p) = &input.sample {
                bootstrap_ci_nodes(&read_sample(&data.walk, p)?, &data.table, reg, &cfg.sgd, &boot, seed)?
            } else if let Some(p) = &input.tours {
                bootstrap_ci_tours(&read_tours(&data.walk, p)?, &data.table, reg, &cfg.sgd, &boot, seed)?
            } else {
                return Err(Error::Argument("ci needs --sample or --tours".into()));
            };
            let w = fit(&data, &cfg, &input)?;
            write_text(&out, &ci_to_csv(&results, &w, data.class_names(), data.feature_names()))?;
        }
        Command::Experiment { config, seed, trials, workers, out_dir } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::from_toml(&read_text(p)?)?,
                None => ExperimentConfig::default(),
            };
            cfg.seed = seed;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let res = run_experiment(&cfg, &out_dir)?;
            let failed = res.metrics.iter().filter(|r| !r.ok).count();
            println!("{} cells, {failed} failed; results in {}", res.metrics.len(), out_dir.display());
        }
        Command::Report { dir } => {
            let summary = write_report(&dir)?;
            println!("{} summary rows written to {}", summary.len(), dir.join("summary.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
