//! Result tables: per-cell metrics, aggregated summaries and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rlr_crawl::rlr::RegKind;
use rlr_crawl::samplers::Method;
use rlr_crawl::{Error, Result};

/// One (trial, crawler, regularization, budget) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trial: usize,
    pub crawler: Method,
    pub reg: RegKind,
    pub budget_fraction: f64,
    pub budget: usize,
    pub spent: usize,
    /// Visited nodes for node crawls, completed tours for tour crawls.
    pub units: usize,
    pub ok: bool,
    pub mae: f64,
    pub rmse: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub crawler: Method,
    pub reg: RegKind,
    pub budget_fraction: f64,
    pub trials: usize,
    pub coverage: f64,
    pub avg_width: f64,
}

/// Mean and standard error of one metric over the successful trials of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> MeanSe {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return MeanSe { mean: f64::NAN, se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return MeanSe { mean, se: f64::NAN };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanSe { mean, se: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub crawler: Method,
    pub reg: RegKind,
    pub budget_fraction: f64,
    pub ok: usize,
    pub failed: usize,
    pub mae: MeanSe,
    pub rmse: MeanSe,
    pub accuracy: MeanSe,
}

fn cell(x: f64) -> String {
    if x.is_nan() { String::new() } else { x.to_string() }
}

fn parse_cell(s: &str) -> std::result::Result<f64, String> {
    if s.is_empty() { Ok(f64::NAN) } else { s.parse().map_err(|e| format!("{s:?}: {e}")) }
}

const METRICS_HEADER: &str = "trial,crawler,reg,budget_fraction,budget,spent,units,status,mae,rmse,accuracy";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.crawler,
            r.reg.tag(),
            r.budget_fraction,
            r.budget,
            r.spent,
            r.units,
            if r.ok { "ok" } else { "failed" },
            cell(r.mae),
            cell(r.rmse),
            cell(r.accuracy)
        )
        .unwrap();
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => return Err(Error::Data(format!("metrics file must start with {METRICS_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Data(format!("metrics line {}: {m}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(bad(format!("expected 11 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let num = |s: &str| parse_cell(s).map_err(bad);
        rows.push(MetricsRow {
            trial: int(f[0])?,
            crawler: f[1].parse()?,
            reg: f[2].parse()?,
            budget_fraction: num(f[3])?,
            budget: int(f[4])?,
            spent: int(f[5])?,
            units: int(f[6])?,
            ok: match f[7] {
                "ok" => true,
                "failed" => false,
                s => return Err(bad(format!("unknown status {s:?}"))),
            },
            mae: num(f[8])?,
            rmse: num(f[9])?,
            accuracy: num(f[10])?,
        });
    }
    Ok(rows)
}

/// Groups cells by crawler, regularization and budget, in first-seen order.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(Method, RegKind, u64)> = Vec::new();
    let mut groups: BTreeMap<(Method, RegKind, u64), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.crawler, r.reg, r.budget_fraction.to_bits());
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let ok: Vec<&&MetricsRow> = g.iter().filter(|r| r.ok).collect();
            let col = |f: fn(&MetricsRow) -> f64| MeanSe::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                crawler: key.0,
                reg: key.1,
                budget_fraction: f64::from_bits(key.2),
                ok: ok.len(),
                failed: g.len() - ok.len(),
                mae: col(|r| r.mae),
                rmse: col(|r| r.rmse),
                accuracy: col(|r| r.accuracy),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("crawler,reg,budget_fraction,ok,failed,mae_mean,mae_se,rmse_mean,rmse_se,accuracy_mean,accuracy_se\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.crawler,
            r.reg.tag(),
            r.budget_fraction,
            r.ok,
            r.failed,
            cell(r.mae.mean),
            cell(r.mae.se),
            cell(r.rmse.mean),
            cell(r.rmse.se),
            cell(r.accuracy.mean),
            cell(r.accuracy.se)
        )
        .unwrap();
    }
    out
}

pub fn coverage_csv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("crawler,reg,budget_fraction,trials,coverage,avg_width\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.crawler,
            r.reg.tag(),
            r.budget_fraction,
            r.trials,
            cell(r.coverage),
            cell(r.avg_width)
        )
        .unwrap();
    }
    out
}

/// One gnuplot data block per crawler: `budget_fraction mean se`, blocks
/// separated by two blank lines and headed by a `# crawler` comment.
pub fn plot_data(rows: &[SummaryRow], reg: RegKind, metric: fn(&SummaryRow) -> MeanSe) -> String {
    let mut out = String::new();
    for m in Method::ALL {
        let pts: Vec<&SummaryRow> = rows.iter().filter(|r| r.crawler == m && r.reg == reg).collect();
        if pts.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push_str("\n\n");
        }
        writeln!(out, "# {m}").unwrap();
        for r in pts {
            let v = metric(r);
            writeln!(out, "{} {} {}", r.budget_fraction, cell(v.mean), cell(v.se)).unwrap();
        }
    }
    out
}

/// Reads `metrics.csv` from `dir` and writes `summary.csv` plus one plot file
/// per metric and regularization (`mae_l2.dat` and so on).
pub fn write_report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let path = dir.join("metrics.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let summary = summarize(&parse_metrics_csv(&text)?);
    let put = |name: String, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::Io { path: p.clone(), source: e })
    };
    put("summary.csv".into(), summary_csv(&summary))?;
    let mut regs: Vec<RegKind> = summary.iter().map(|r| r.reg).collect();
    regs.dedup();
    regs.sort_by_key(|r| r.tag());
    regs.dedup();
    let metrics: [(&str, fn(&SummaryRow) -> MeanSe); 3] =
        [("mae", |r| r.mae), ("rmse", |r| r.rmse), ("accuracy", |r| r.accuracy)];
    for reg in regs {
        for (name, f) in metrics {
            put(format!("{name}_{}.dat", reg.tag()), plot_data(&summary, reg, f))?;
        }
    }
    Ok(summary)
}
