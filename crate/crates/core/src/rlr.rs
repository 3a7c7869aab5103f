//! Relational logistic regression: soft-max prediction over aggregated
//! features, per-node log-likelihood terms and their gradients, penalties and
//! the deterministic full-data fit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::graph::ClassId;

pub const DEFAULT_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    None,
    L1,
    #[default]
    L2,
}

impl RegKind {
    pub fn tag(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::L1 => "l1",
            RegKind::L2 => "l2",
        }
    }
}

impl FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(RegKind::None),
            "l1" => Ok(RegKind::L1),
            "l2" => Ok(RegKind::L2),
            _ => Err(Error::argument(format!("unknown regularization {s:?}"))),
        }
    }
}

/// Penalty `λ Σ|w|` (L1) or `λ/2 Σ w²` (L2) over the penalized coordinates of
/// every class row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub kind: RegKind,
    pub lambda: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization {
            kind: RegKind::L2,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl Regularization {
    pub fn none() -> Self {
        Regularization {
            kind: RegKind::None,
            lambda: 0.0,
        }
    }

    pub fn l1(lambda: f64) -> Self {
        Regularization { kind: RegKind::L1, lambda }
    }

    pub fn l2(lambda: f64) -> Self {
        Regularization { kind: RegKind::L2, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_finite() && self.lambda >= 0.0 {
            Ok(())
        } else {
            Err(Error::argument(format!("invalid lambda {}", self.lambda)))
        }
    }

    pub fn penalty(&self, w: &[f64], penalized: &[bool]) -> f64 {
        let d = penalized.len();
        let mut s = 0.0;
        for (i, &x) in w.iter().enumerate() {
            if penalized[i % d] {
                s += match self.kind {
                    RegKind::None => 0.0,
                    RegKind::L1 => x.abs(),
                    RegKind::L2 => 0.5 * x * x,
                };
            }
        }
        self.lambda * s
    }

    /// Adds `scale · ∇penalty` for the smooth (L2) penalty.
    pub(crate) fn add_smooth_gradient(&self, w: &[f64], penalized: &[bool], scale: f64, grad: &mut [f64]) {
        if self.kind != RegKind::L2 {
            return;
        }
        let d = penalized.len();
        for (i, (gi, &x)) in grad.iter_mut().zip(w).enumerate() {
            if penalized[i % d] {
                *gi += scale * self.lambda * x;
            }
        }
    }

    /// Proximal step of the non-smooth (L1) penalty with step size `step`.
    pub(crate) fn prox(&self, w: &mut [f64], penalized: &[bool], step: f64) {
        if self.kind != RegKind::L1 {
            return;
        }
        let d = penalized.len();
        let t = step * self.lambda;
        for (i, x) in w.iter_mut().enumerate() {
            if penalized[i % d] {
                *x = soft_threshold(*x, t);
            }
        }
    }

    pub(crate) fn smooth_value(&self, w: &[f64], penalized: &[bool]) -> f64 {
        if self.kind == RegKind::L2 {
            self.penalty(w, penalized)
        } else {
            0.0
        }
    }

    pub(crate) fn nonsmooth_value(&self, w: &[f64], penalized: &[bool]) -> f64 {
        if self.kind == RegKind::L1 {
            self.penalty(w, penalized)
        } else {
            0.0
        }
    }
}

/// `sign(x) · max(|x| − t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Class weights, one row of length `dim` per class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    classes: usize,
    dim: usize,
    values: Vec<f64>,
    pub reg: Regularization,
}

impl WeightMatrix {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        WeightMatrix {
            classes,
            dim,
            values: vec![0.0; classes * dim],
            reg: Regularization::none(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if classes < 2 || dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::argument("weight rows must be at least 2 of equal nonzero length"));
        }
        Self::from_vec(classes, dim, rows.concat())
    }

    pub fn from_vec(classes: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != classes * dim {
            return Err(Error::argument("weight buffer does not match shape"));
        }
        Ok(WeightMatrix {
            classes,
            dim,
            values,
            reg: Regularization::none(),
        })
    }

    pub fn with_reg(mut self, reg: Regularization) -> Self {
        self.reg = reg;
        self
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, h: ClassId) -> &[f64] {
        &self.values[h * self.dim..(h + 1) * self.dim]
    }

    pub fn get(&self, h: ClassId, j: usize) -> f64 {
        self.values[h * self.dim + j]
    }

    /// Row-major values.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    fn check(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.dim {
            return Err(Error::argument(format!(
                "feature vector has length {}, weights expect {}",
                phi.len(),
                self.dim
            )));
        }
        if !self.is_finite() {
            return Err(Error::argument("non-finite weight"));
        }
        Ok(())
    }

    /// CSV with a `class,<feature>...` header and one row per class. A leading
    /// `#` line records the regularization.
    pub fn to_csv(&self, class_names: &[String], feature_names: &[String]) -> Result<String> {
        if class_names.len() != self.classes || feature_names.len() != self.dim {
            return Err(Error::argument("name lists do not match weight shape"));
        }
        let mut out = format!("# reg {} {}\nclass", self.reg.kind.tag(), self.reg.lambda);
        for f in feature_names {
            write!(out, ",{f}").unwrap();
        }
        out.push('\n');
        for (h, c) in class_names.iter().enumerate() {
            out.push_str(c);
            for x in self.row(h) {
                write!(out, ",{x}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, class_names: &[String], feature_names: &[String]) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv(class_names, feature_names)?).map_err(|e| Error::io(path, e))
    }

    /// Parses [`WeightMatrix::to_csv`] output; returns the matrix with class
    /// and feature names.
    pub fn from_csv(text: &str) -> Result<(Self, Vec<String>, Vec<String>)> {
        let bad = |msg: String| Error::data(format!("weight csv: {msg}"));
        let mut reg = Regularization::none();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
        while let Some(l) = lines.next_if(|l| l.starts_with('#')) {
            let toks: Vec<&str> = l.trim_start_matches('#').split_whitespace().collect();
            if let ["reg", kind, lambda] = toks.as_slice() {
                reg = Regularization {
                    kind: kind.parse()?,
                    lambda: lambda.parse().map_err(|_| bad(format!("invalid lambda {lambda:?}")))?,
                };
            }
        }
        let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
        let mut cols = header.split(',');
        if cols.next() != Some("class") {
            return Err(bad("header must start with `class`".into()));
        }
        let features: Vec<String> = cols.map(str::to_string).collect();
        let mut classes = Vec::new();
        let mut values = Vec::new();
        for l in lines {
            let mut cells = l.split(',');
            classes.push(cells.next().unwrap_or_default().to_string());
            let row = cells
                .map(|c| c.trim().parse::<f64>().map_err(|_| bad(format!("invalid number {c:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != features.len() {
                return Err(bad(format!("row for class {:?} has {} values", classes.last().unwrap(), row.len())));
            }
            values.extend(row);
        }
        if classes.len() < 2 || features.is_empty() {
            return Err(bad("need at least two classes and one feature".into()));
        }
        let w = WeightMatrix::from_vec(classes.len(), features.len(), values)?.with_reg(reg);
        Ok((w, classes, features))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Self, Vec<String>, Vec<String>)> {
        let path = path.as_ref();
        Self::from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Fills `logp` with log-probabilities of every class; returns log-sum-exp of
/// the scores.
#[inline]
pub(crate) fn log_probs(w: &[f64], dim: usize, phi: &[f64], logp: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (h, s) in logp.iter_mut().enumerate() {
        let row = &w[h * dim..(h + 1) * dim];
        *s = row.iter().zip(phi).map(|(a, b)| a * b).sum();
        max = max.max(*s);
    }
    let lse = max + logp.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    logp.iter_mut().for_each(|s| *s -= lse);
    lse
}

/// Adds `coef · g'_h(v)` to every class row of `grad` and returns `g(v)`.
#[inline]
pub(crate) fn accumulate(
    w: &[f64],
    dim: usize,
    phi: &[f64],
    y: ClassId,
    coef: f64,
    logp: &mut [f64],
    grad: Option<&mut [f64]>,
) -> f64 {
    log_probs(w, dim, phi, logp);
    if let Some(grad) = grad {
        for (h, lp) in logp.iter().enumerate() {
            let r = coef * (f64::from(u8::from(h == y)) - lp.exp());
            for (gi, x) in grad[h * dim..(h + 1) * dim].iter_mut().zip(phi) {
                *gi += r * x;
            }
        }
    }
    logp[y]
}

pub fn predict(w: &WeightMatrix, phi: &[f64]) -> Result<Vec<f64>> {
    w.check(phi)?;
    let mut p = vec![0.0; w.classes];
    log_probs(&w.values, w.dim, phi, &mut p);
    p.iter_mut().for_each(|x| *x = x.exp());
    Ok(p)
}

fn check_class(w: &WeightMatrix, c: ClassId) -> Result<()> {
    if c < w.classes {
        Ok(())
    } else {
        Err(Error::argument(format!("class {c} out of range 0..{}", w.classes)))
    }
}

/// Per-node log-likelihood `w_y·φ − log Σ_h exp(w_h·φ)`.
pub fn g(w: &WeightMatrix, phi: &[f64], y: ClassId) -> Result<f64> {
    w.check(phi)?;
    check_class(w, y)?;
    let mut logp = vec![0.0; w.classes];
    Ok(accumulate(&w.values, w.dim, phi, y, 0.0, &mut logp, None))
}

/// Gradient of [`g`] with respect to `w_j`: `(1{y=j} − p_j) φ`.
pub fn g_prime(w: &WeightMatrix, phi: &[f64], y: ClassId, j: ClassId) -> Result<Vec<f64>> {
    w.check(phi)?;
    check_class(w, y)?;
    check_class(w, j)?;
    let p = predict(w, phi)?;
    let r = f64::from(u8::from(y == j)) - p[j];
    Ok(phi.iter().map(|x| r * x).collect())
}

fn check_table(table: &FeatureTable, w: &WeightMatrix) -> Result<()> {
    if table.dim() != w.dim || table.classes() != w.classes {
        return Err(Error::argument(format!(
            "weights are {}x{}, features have {} classes and dimension {}",
            w.classes,
            w.dim,
            table.classes(),
            table.dim()
        )));
    }
    if !w.is_finite() {
        return Err(Error::argument("non-finite weight"));
    }
    Ok(())
}

/// Log-likelihood summed over table rows `rows`, each of which must be labeled.
pub fn full_loglik(table: &FeatureTable, w: &WeightMatrix, rows: &[usize]) -> Result<f64> {
    let data = WeightedRows::uniform(table, rows)?;
    check_table(table, w)?;
    Ok(data.loglik(table, w.as_slice(), None))
}

/// Gradient of [`full_loglik`] with respect to `w_j`.
pub fn full_gradient(table: &FeatureTable, w: &WeightMatrix, rows: &[usize], j: ClassId) -> Result<Vec<f64>> {
    check_class(w, j)?;
    let all = full_gradient_all(table, w, rows)?;
    Ok(all.row(j).to_vec())
}

/// Gradient of [`full_loglik`] for all classes, shaped like the weights.
pub fn full_gradient_all(table: &FeatureTable, w: &WeightMatrix, rows: &[usize]) -> Result<WeightMatrix> {
    let data = WeightedRows::uniform(table, rows)?;
    check_table(table, w)?;
    let mut grad = WeightMatrix::zeros(w.classes, w.dim);
    data.loglik(table, w.as_slice(), Some(&mut grad.values));
    Ok(grad)
}

/// A weighted log-likelihood `Σ_i c_i g(row_i)` over labeled table rows.
/// Every objective in this crate (full data, naive sample, tour estimate) has
/// this form.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRows {
    pub(crate) rows: Vec<usize>,
    pub(crate) labels: Vec<ClassId>,
    pub(crate) coefs: Vec<f64>,
}

impl WeightedRows {
    pub fn new(table: &FeatureTable, rows: Vec<usize>, coefs: Vec<f64>) -> Result<Self> {
        if rows.len() != coefs.len() {
            return Err(Error::argument("rows and coefficients differ in length"));
        }
        let labels = rows
            .iter()
            .map(|&r| {
                if r >= table.len() {
                    Err(Error::argument(format!("row {r} out of range")))
                } else {
                    table.require_label(r)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightedRows { rows, labels, coefs })
    }

    pub fn uniform(table: &FeatureTable, rows: &[usize]) -> Result<Self> {
        Self::new(table, rows.to_vec(), vec![1.0; rows.len()])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `Σ c_i`, the (estimated) number of nodes the objective sums over.
    pub fn total_weight(&self) -> f64 {
        self.coefs.iter().sum()
    }

    /// Weighted log-likelihood; adds its gradient (all classes) to `grad`.
    pub(crate) fn loglik(&self, table: &FeatureTable, w: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let mut logp = vec![0.0; table.classes()];
        let mut total = 0.0;
        for ((&r, &y), &c) in self.rows.iter().zip(&self.labels).zip(&self.coefs) {
            let gv = accumulate(w, table.dim(), table.row(r), y, c, &mut logp, grad.as_deref_mut());
            total += c * gv;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    /// Stop once the ∞-norm of the optimality residual falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            tol: 1e-6,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub weights: WeightMatrix,
    /// Penalized negative log-likelihood at `weights`.
    pub objective: f64,
    /// ∞-norm of the gradient (minimum-norm subgradient under L1).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizer of `−Σ_{rows} g + penalty` over the labeled `rows`.
pub fn fit_global(table: &FeatureTable, rows: &[usize], reg: Regularization, cfg: &OptConfig) -> Result<FitOutcome> {
    if rows.is_empty() {
        return Err(Error::argument("empty training set"));
    }
    let data = WeightedRows::uniform(table, rows)?;
    let init = WeightMatrix::zeros(table.classes(), table.dim());
    minimize(table, &data, reg, cfg, init)
}

/// Accelerated proximal gradient on `−Σ c_i g(row_i) + penalty`, with
/// backtracking on the step size and gradient-based momentum restarts.
pub fn minimize(
    table: &FeatureTable,
    data: &WeightedRows,
    reg: Regularization,
    cfg: &OptConfig,
    init: WeightMatrix,
) -> Result<FitOutcome> {
    reg.validate()?;
    check_table(table, &init)?;
    let pen = table.penalized();
    let n = init.values.len();
    let smooth = |w: &[f64], grad: &mut [f64]| -> f64 {
        grad.fill(0.0);
        let ll = data.loglik(table, w, Some(grad));
        grad.iter_mut().for_each(|x| *x = -*x);
        reg.add_smooth_gradient(w, pen, 1.0, grad);
        -ll + reg.smooth_value(w, pen)
    };
    let residual = |w: &[f64], grad: &[f64]| -> f64 {
        let d = pen.len();
        let mut r: f64 = 0.0;
        for (i, (&x, &gi)) in w.iter().zip(grad).enumerate() {
            let ri = if reg.kind == RegKind::L1 && pen[i % d] {
                if x != 0.0 {
                    (gi + reg.lambda * x.signum()).abs()
                } else {
                    (gi.abs() - reg.lambda).max(0.0)
                }
            } else {
                gi.abs()
            };
            r = r.max(ri);
        }
        r
    };

    // Lipschitz bound of the smooth part: ½ Σ c_i ‖φ_i‖² + λ.
    let lip_bound = 0.5
        * data
            .rows
            .iter()
            .zip(&data.coefs)
            .map(|(&r, &c)| c.abs() * table.row(r).iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
        + if reg.kind == RegKind::L2 { reg.lambda } else { 0.0 };
    let mut lip = (lip_bound * 0.1).max(1e-12);

    let mut x = init.values.clone();
    let mut gx = vec![0.0; n];
    let mut fx = smooth(&x, &mut gx) + reg.nonsmooth_value(&x, pen);
    let mut res = residual(&x, &gx);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut gy = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while res >= cfg.tol && iterations < cfg.max_iters {
        iterations += 1;
        let fy = smooth(&y, &mut gy);
        lip *= 0.9;
        let f_new = loop {
            for i in 0..n {
                x_new[i] = y[i] - gy[i] / lip;
            }
            reg.prox(&mut x_new, pen, 1.0 / lip);
            let f = smooth(&x_new, &mut g_new);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for i in 0..n {
                let dlt = x_new[i] - y[i];
                lin += gy[i] * dlt;
                quad += dlt * dlt;
            }
            if f <= fy + lin + 0.5 * lip * quad + 1e-12 * fy.abs().max(1.0) || lip > 1e3 * lip_bound.max(1.0) {
                break f;
            }
            lip *= 2.0;
        };
        // gradient-mapping restart: drop momentum once it points uphill
        let uphill: f64 = (0..n).map(|i| (y[i] - x_new[i]) * (x_new[i] - x[i])).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = x_new[i] + beta * (x_new[i] - x[i]);
        }
        t = t_next;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut gx, &mut g_new);
        fx = f_new + reg.nonsmooth_value(&x, pen);
        res = residual(&x, &gx);
    }

    let weights = WeightMatrix {
        classes: init.classes,
        dim: init.dim,
        values: x,
        reg,
    };
    Ok(FitOutcome {
        weights,
        objective: fx,
        residual: res,
        iterations,
        converged: res < cfg.tol,
    })
}
