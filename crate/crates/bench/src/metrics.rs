//! Estimation and prediction quality measures.

use rlr_crawl::features::{FeatureMap, FeatureTable};
use rlr_crawl::graph::{AttributedGraph, ClassId, LabelSplit, NodeId};
use rlr_crawl::rlr::{predict, WeightMatrix};
use rlr_crawl::{Error, Result};

/// Mean absolute difference over all entries.
pub fn mae(sample: &WeightMatrix, global: &WeightMatrix) -> Result<f64> {
    if sample.classes() != global.classes() || sample.dim() != global.dim() {
        return Err(Error::Argument("weight matrices differ in shape".into()));
    }
    let a = sample.as_slice();
    let b = global.as_slice();
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Hidden nodes with their features (computed from observed labels only) and
/// true labels.
#[derive(Debug, Clone)]
pub struct Holdout {
    features: FeatureTable,
    truth: Vec<ClassId>,
}

impl Holdout {
    pub fn new(g: &AttributedGraph, map: &FeatureMap, split: &LabelSplit, hidden: &[NodeId]) -> Result<Self> {
        let truth = hidden
            .iter()
            .map(|&v| {
                g.label(v)
                    .ok_or_else(|| Error::Argument(format!("hidden node {} has no ground truth", g.original_id(v))))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Holdout {
            features: FeatureTable::build(g, map, split, hidden)?,
            truth,
        })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    /// Root mean squared difference between predicted probabilities and the
    /// one-hot truth, averaged over nodes and classes.
    pub fn rmse(&self, w: &WeightMatrix) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Argument("no hidden nodes to score".into()));
        }
        let mut sum = 0.0;
        for (i, &y) in self.truth.iter().enumerate() {
            let p = predict(w, self.features.row(i))?;
            for (h, ph) in p.iter().enumerate() {
                let t = if h == y { 1.0 } else { 0.0 };
                sum += (ph - t) * (ph - t);
            }
        }
        Ok((sum / (self.len() * w.classes()) as f64).sqrt())
    }

    /// Fraction of hidden nodes whose most probable class is the true one;
    /// ties go to the smallest class index.
    pub fn accuracy(&self, w: &WeightMatrix) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Argument("no hidden nodes to score".into()));
        }
        let mut hits = 0usize;
        for (i, &y) in self.truth.iter().enumerate() {
            let p = predict(w, self.features.row(i))?;
            hits += usize::from(argmax(&p) == y);
        }
        Ok(hits as f64 / self.len() as f64)
    }
}

/// Index of the largest entry, first one on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

pub fn rmse_probs(
    g: &AttributedGraph,
    w: &WeightMatrix,
    map: &FeatureMap,
    hidden: &[NodeId],
    split: &LabelSplit,
) -> Result<f64> {
    Holdout::new(g, map, split, hidden)?.rmse(w)
}

pub fn accuracy(
    g: &AttributedGraph,
    w: &WeightMatrix,
    map: &FeatureMap,
    hidden: &[NodeId],
    split: &LabelSplit,
) -> Result<f64> {
    Holdout::new(g, map, split, hidden)?.accuracy(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rlr_crawl::features::{FeatureSpec, NeighborAttr};
    use rlr_crawl::graph::GraphBuilder;

    #[test]
    fn mae_cases() {
        let a = WeightMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let b = WeightMatrix::from_vec(2, 2, a.as_slice().iter().map(|x| x + 0.3).collect()).unwrap();
        assert!((mae(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        let c = WeightMatrix::from_rows(&[vec![0.0, 4.0], vec![0.0, 0.0]]).unwrap();
        // row one differs by (1, 2), row two by nothing
        assert_eq!(mae(&a, &c).unwrap(), 3.0 / 4.0);
        assert!(mae(&a, &WeightMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn mae_one_by_two() {
        let a = WeightMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let b = WeightMatrix::from_vec(1, 2, vec![0.0, 4.0]).unwrap();
        assert_eq!(mae(&a, &b).unwrap(), 1.5);
    }

    fn ten_nodes() -> (AttributedGraph, LabelSplit) {
        let mut b = GraphBuilder::new(["c"], ["0", "1"]);
        for i in 0..10u64 {
            let c = if i % 3 == 0 { "x" } else { "y" };
            b.add_node(i, &[c], Some(if i < 5 { "0" } else { "1" })).unwrap();
        }
        for i in 0..10 {
            b.add_edge(i, (i + 1) % 10);
            b.add_edge(i, (i + 4) % 10);
        }
        let (g, _) = b.build().unwrap();
        let split = LabelSplit::from_observed(&g, &[0, 1, 2, 5, 6, 7]);
        (g, split)
    }

    fn spec() -> FeatureSpec {
        FeatureSpec {
            self_attrs: vec!["c".into()],
            neighbor_attrs: vec![NeighborAttr { attr: "c".into(), value: "x".into() }],
            neighbor_labels: vec!["1".into()],
            ..FeatureSpec::intercept_only()
        }
    }

    #[test]
    fn uniform_predictions_rmse_half() {
        let (g, split) = ten_nodes();
        let map = spec().compile(g.schema()).unwrap();
        let w = WeightMatrix::zeros(2, map.dim());
        let hidden = split.hidden();
        assert_eq!(rmse_probs(&g, &w, &map, &hidden, &split).unwrap(), 0.5);
        // uniform ties go to class 0
        let zeros = hidden.iter().filter(|&&v| g.label(v) == Some(0)).count() as f64;
        assert_eq!(accuracy(&g, &w, &map, &hidden, &split).unwrap(), zeros / hidden.len() as f64);
    }

    #[test]
    fn confident_predictions() {
        let (g, split) = ten_nodes();
        let map = FeatureSpec::intercept_only().compile(g.schema()).unwrap();
        let class0 = [0usize, 1, 2, 3, 4];
        let w = WeightMatrix::from_rows(&[vec![800.0], vec![0.0]]).unwrap();
        assert_eq!(rmse_probs(&g, &w, &map, &class0, &split).unwrap(), 0.0);
        assert_eq!(accuracy(&g, &w, &map, &class0, &split).unwrap(), 1.0);
        let w = WeightMatrix::from_rows(&[vec![0.0], vec![800.0]]).unwrap();
        assert_eq!(accuracy(&g, &w, &map, &class0, &split).unwrap(), 0.0);
    }

    #[test]
    fn ties_pick_smallest_class() {
        assert_eq!(argmax(&[0.25, 0.25, 0.5]), 2);
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn rmse_matches_brute_force() {
        let (g, split) = ten_nodes();
        let map = spec().compile(g.schema()).unwrap();
        let w = WeightMatrix::from_vec(2, map.dim(), (0..2 * map.dim()).map(|i| 0.3 * i as f64 - 0.7).collect()).unwrap();
        let hidden = split.hidden();
        // independent recomputation from raw neighborhoods
        let mut sum = 0.0;
        for &v in &hidden {
            let me = g.attr(v, 0);
            let x_code = g.schema().level_code(0, "x").unwrap();
            let y_code = g.schema().level_code(0, "y").unwrap();
            let nbrs = g.neighbors(v);
            let prop_x = nbrs.iter().filter(|&&u| g.attr(u, 0) == x_code).count() as f64 / nbrs.len() as f64;
            let obs: Vec<_> = nbrs.iter().filter(|&&u| split.is_observed(u)).collect();
            let prop_1 = if obs.is_empty() {
                0.0
            } else {
                obs.iter().filter(|&&&u| g.label(u) == Some(1)).count() as f64 / obs.len() as f64
            };
            let phi = [1.0, f64::from(u8::from(me == x_code)), f64::from(u8::from(me == y_code)), prop_x, prop_1];
            let s: Vec<f64> = (0..2).map(|h| w.row(h).iter().zip(&phi).map(|(a, b)| a * b).sum()).collect();
            let z: f64 = s.iter().map(|x| x.exp()).sum();
            for h in 0..2 {
                let t = f64::from(u8::from(g.label(v) == Some(h)));
                sum += (s[h].exp() / z - t).powi(2);
            }
        }
        let brute = (sum / (hidden.len() * 2) as f64).sqrt();
        let got = rmse_probs(&g, &w, &map, &hidden, &split).unwrap();
        assert!((got - brute).abs() < 1e-12, "{got} vs {brute}");
    }
}
