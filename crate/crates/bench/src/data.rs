//! Training data shared by the CLI and the experiment runner.

use rlr_crawl::features::{FeatureMap, FeatureSpec, FeatureTable};
use rlr_crawl::graph::{labeled_subgraph, AttributedGraph, LabelSplit, NodeId};
use rlr_crawl::{Error, Result};

/// A graph with a label split, the crawlable labeled subgraph and the
/// features of its nodes.
///
/// Crawls run on `walk`, the giant component of the observed nodes. Row `v`
/// of `table` describes walk node `v`, with features computed on the full
/// graph so that they match the features used for prediction.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub graph: AttributedGraph,
    pub split: LabelSplit,
    pub walk: AttributedGraph,
    pub spec: FeatureSpec,
    pub map: FeatureMap,
    pub table: FeatureTable,
}

impl TrainingData {
    /// `spec = None` selects [`FeatureSpec::default_for`].
    pub fn new(graph: AttributedGraph, split: LabelSplit, spec: Option<&FeatureSpec>) -> Result<Self> {
        let walk = labeled_subgraph(&graph, &split)?;
        let spec = spec.cloned().unwrap_or_else(|| FeatureSpec::default_for(graph.schema()));
        let map = spec.compile(graph.schema())?;
        let in_graph = walk
            .nodes()
            .map(|v| {
                graph
                    .node_by_original(walk.original_id(v))
                    .ok_or_else(|| Error::Data(format!("walk node {} missing from graph", walk.original_id(v))))
            })
            .collect::<Result<Vec<NodeId>>>()?;
        let table = FeatureTable::build(&graph, &map, &split, &in_graph)?;
        Ok(TrainingData { graph, split, walk, spec, map, table })
    }

    /// Every walk node, i.e. every table row.
    pub fn rows(&self) -> Vec<usize> {
        (0..self.table.len()).collect()
    }

    /// Hidden nodes of the full graph that carry a ground-truth label.
    pub fn hidden_labeled(&self) -> Vec<NodeId> {
        self.split
            .hidden()
            .into_iter()
            .filter(|&v| self.graph.label(v).is_some())
            .collect()
    }

    pub fn class_names(&self) -> &[String] {
        self.graph.schema().class_names()
    }

    pub fn feature_names(&self) -> &[String] {
        self.map.names()
    }
}
