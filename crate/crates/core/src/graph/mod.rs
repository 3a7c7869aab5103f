//! Immutable attributed graph.
//!
//! Nodes are stored under dense ids `0..n` in compressed sparse row form, with
//! the ids found in the input files kept as "original ids" for reporting and
//! for mapping nodes between a graph and the subgraphs derived from it.
//! Attribute values and class labels are interned to small integer codes.
//!
//! Every edge is stored in both directions, neighbor lists are sorted, and
//! there are no self-loops or parallel edges.

mod io;
mod split;

pub use io::{load_graph, write_attributes, write_edges, LoadReport};
pub use split::{labeled_subgraph, split_labels, LabelSplit};

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type ClassId = usize;

/// Attribute and class vocabularies, shared between a graph and its subgraphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    attr_names: Vec<String>,
    attr_levels: Vec<Vec<String>>,
    class_names: Vec<String>,
}

impl Schema {
    pub fn attr_names(&self) -> &[String] {
        &self.attr_names
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attr_names.iter().position(|n| n == name)
    }

    /// Interned values of attribute `attr`, indexed by code. A missing value is
    /// interned as the empty string and behaves like any other level.
    pub fn levels(&self, attr: usize) -> &[String] {
        &self.attr_levels[attr]
    }

    pub fn level_code(&self, attr: usize, value: &str) -> Option<u32> {
        self.attr_levels[attr]
            .iter()
            .position(|l| l == value)
            .map(|c| c as u32)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_index(&self, name: &str) -> Option<ClassId> {
        self.class_names.iter().position(|n| n == name)
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

#[derive(Debug, Clone)]
pub struct AttributedGraph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    original_ids: Vec<u64>,
    id_index: HashMap<u64, NodeId>,
    attr_codes: Vec<u32>,
    labels: Vec<Option<ClassId>>,
    schema: Arc<Schema>,
}

impl PartialEq for AttributedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets
            && self.targets == other.targets
            && self.original_ids == other.original_ids
            && self.attr_codes == other.attr_codes
            && self.labels == other.labels
            && self.schema == other.schema
    }
}

impl AttributedGraph {
    pub fn node_count(&self) -> usize {
        self.original_ids.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v < self.node_count()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.node_count()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn class_count(&self) -> usize {
        self.schema.class_count()
    }

    pub fn attr_count(&self) -> usize {
        self.schema.attr_names.len()
    }

    #[inline]
    pub fn attr(&self, v: NodeId, attr: usize) -> u32 {
        self.attr_codes[v * self.attr_count() + attr]
    }

    #[inline]
    pub fn label(&self, v: NodeId) -> Option<ClassId> {
        self.labels[v]
    }

    pub fn original_id(&self, v: NodeId) -> u64 {
        self.original_ids[v]
    }

    pub fn node_by_original(&self, id: u64) -> Option<NodeId> {
        self.id_index.get(&id).copied()
    }

    /// Connected components, each sorted by node id, in order of their
    /// smallest node id.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &w in self.neighbors(u) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && self.components().len() == 1
    }

    /// Induced subgraph on `nodes`. Original ids and vocabularies are carried
    /// over; dense ids follow the order of the parent's ids.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> AttributedGraph {
        let mut keep: Vec<NodeId> = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut remap = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let na = self.attr_count();
        let mut offsets = Vec::with_capacity(keep.len() + 1);
        let mut targets = Vec::new();
        let mut attr_codes = Vec::with_capacity(keep.len() * na);
        let mut labels = Vec::with_capacity(keep.len());
        let mut original_ids = Vec::with_capacity(keep.len());
        offsets.push(0);
        for &old in &keep {
            // Parent lists are sorted and `remap` is monotone, so the result stays sorted.
            targets.extend(
                self.neighbors(old)
                    .iter()
                    .map(|&w| remap[w])
                    .filter(|&w| w != usize::MAX),
            );
            offsets.push(targets.len());
            attr_codes.extend_from_slice(&self.attr_codes[old * na..(old + 1) * na]);
            labels.push(self.labels[old]);
            original_ids.push(self.original_ids[old]);
        }
        let id_index = original_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        AttributedGraph {
            offsets,
            targets,
            original_ids,
            id_index,
            attr_codes,
            labels,
            schema: Arc::clone(&self.schema),
        }
    }
}

/// Induced subgraph on the largest connected component. Among components of
/// equal size the one holding the smallest original id wins.
pub fn giant_component(g: &AttributedGraph) -> AttributedGraph {
    let comps = g.components();
    let best = comps.iter().max_by(|a, b| {
        let min_a = a.iter().map(|&v| g.original_id(v)).min();
        let min_b = b.iter().map(|&v| g.original_id(v)).min();
        a.len().cmp(&b.len()).then_with(|| min_b.cmp(&min_a))
    });
    match best {
        Some(comp) if comp.len() == g.node_count() => g.clone(),
        Some(comp) => g.induced_subgraph(comp),
        None => g.clone(),
    }
}

/// Counts of input edges dropped while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Incremental constructor for [`AttributedGraph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    schema: Schema,
    original_ids: Vec<u64>,
    id_index: HashMap<u64, NodeId>,
    attr_codes: Vec<u32>,
    labels: Vec<Option<ClassId>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn new<S: Into<String>>(
        attr_names: impl IntoIterator<Item = S>,
        class_names: impl IntoIterator<Item = S>,
    ) -> Self {
        let attr_names: Vec<String> = attr_names.into_iter().map(Into::into).collect();
        let attr_levels = vec![Vec::new(); attr_names.len()];
        GraphBuilder {
            schema: Schema {
                attr_names,
                attr_levels,
                class_names: class_names.into_iter().map(Into::into).collect(),
            },
            original_ids: Vec::new(),
            id_index: HashMap::new(),
            attr_codes: Vec::new(),
            labels: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Adds a node with one value per attribute (empty string = missing) and an
    /// optional class label. Returns the node's dense id.
    pub fn add_node(&mut self, original_id: u64, attrs: &[&str], label: Option<&str>) -> Result<NodeId> {
        if attrs.len() != self.schema.attr_names.len() {
            return Err(Error::argument(format!(
                "node {original_id}: expected {} attribute values, got {}",
                self.schema.attr_names.len(),
                attrs.len()
            )));
        }
        if self.id_index.contains_key(&original_id) {
            return Err(Error::argument(format!("duplicate node id {original_id}")));
        }
        let label = match label {
            None => None,
            Some(name) => Some(self.schema.class_index(name).ok_or_else(|| {
                Error::argument(format!("node {original_id}: unknown class label {name:?}"))
            })?),
        };
        for (a, value) in attrs.iter().enumerate() {
            let levels = &mut self.schema.attr_levels[a];
            let code = match levels.iter().position(|l| l == value) {
                Some(c) => c,
                None => {
                    levels.push((*value).to_string());
                    levels.len() - 1
                }
            };
            self.attr_codes.push(code as u32);
        }
        let id = self.original_ids.len();
        self.original_ids.push(original_id);
        self.id_index.insert(original_id, id);
        self.labels.push(label);
        Ok(id)
    }

    pub fn node_by_original(&self, id: u64) -> Option<NodeId> {
        self.id_index.get(&id).copied()
    }

    /// Adds an undirected edge between dense ids. Self-loops and duplicates are
    /// accepted here and dropped (and counted) by [`GraphBuilder::build`].
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) {
        self.edges.push((u, v));
    }

    pub fn node_count(&self) -> usize {
        self.original_ids.len()
    }

    pub fn build(self) -> Result<(AttributedGraph, BuildReport)> {
        if self.schema.class_count() < 2 {
            return Err(Error::argument("a graph needs at least two classes"));
        }
        let n = self.original_ids.len();
        let mut report = BuildReport::default();
        let mut pairs = Vec::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            if u >= n || v >= n {
                return Err(Error::argument(format!("edge ({u}, {v}) references an unknown node")));
            }
            if u == v {
                report.self_loops_dropped += 1;
            } else {
                pairs.push((u.min(v), u.max(v)));
            }
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        report.duplicates_dropped = before - pairs.len();

        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0; offsets[n]];
        for &(u, v) in &pairs {
            targets[fill[u]] = v;
            fill[u] += 1;
            targets[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let graph = AttributedGraph {
            offsets,
            targets,
            original_ids: self.original_ids,
            id_index: self.id_index,
            attr_codes: self.attr_codes,
            labels: self.labels,
            schema: Arc::new(self.schema),
        };
        Ok((graph, report))
    }
}
