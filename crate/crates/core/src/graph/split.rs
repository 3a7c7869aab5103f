use rand::seq::index;

use super::{giant_component, AttributedGraph, NodeId};
use crate::error::{Error, Result};
use crate::rng;

/// Partition of the nodes into those whose labels are visible to the learner
/// and those whose labels are held out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSplit {
    observed: Vec<bool>,
}

impl LabelSplit {
    /// Every labeled node observed.
    pub fn all_labeled(g: &AttributedGraph) -> Self {
        LabelSplit {
            observed: g.nodes().map(|v| g.label(v).is_some()).collect(),
        }
    }

    pub fn from_observed(g: &AttributedGraph, observed: &[NodeId]) -> Self {
        let mut mask = vec![false; g.node_count()];
        for &v in observed {
            mask[v] = true;
        }
        LabelSplit { observed: mask }
    }

    #[inline]
    pub fn is_observed(&self, v: NodeId) -> bool {
        self.observed[v]
    }

    pub fn observed(&self) -> Vec<NodeId> {
        (0..self.observed.len()).filter(|&v| self.observed[v]).collect()
    }

    pub fn hidden(&self) -> Vec<NodeId> {
        (0..self.observed.len()).filter(|&v| !self.observed[v]).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }
}

/// Marks `ceil(fraction * L)` uniformly chosen labeled nodes as observed, where
/// `L` is the number of labeled nodes. Unlabeled nodes are always hidden.
pub fn split_labels(g: &AttributedGraph, fraction: f64, seed: u64) -> Result<LabelSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::argument(format!("label fraction {fraction} outside (0, 1]")));
    }
    let labeled: Vec<NodeId> = g.nodes().filter(|&v| g.label(v).is_some()).collect();
    let count = ((fraction * labeled.len() as f64).ceil() as usize).min(labeled.len());
    let mut rng = rng::seeded(seed);
    let chosen: Vec<NodeId> = index::sample(&mut rng, labeled.len(), count)
        .into_iter()
        .map(|i| labeled[i])
        .collect();
    Ok(LabelSplit::from_observed(g, &chosen))
}

/// Giant component of the subgraph induced by the observed nodes. This is the
/// graph the crawlers walk on.
pub fn labeled_subgraph(g: &AttributedGraph, split: &LabelSplit) -> Result<AttributedGraph> {
    let observed = split.observed();
    if observed.is_empty() {
        return Err(Error::NoLabeledComponent);
    }
    Ok(giant_component(&g.induced_subgraph(&observed)))
}
