//! Aggregated node features.
//!
//! A node's feature vector concatenates, in this order:
//!
//! 1. an intercept (constant 1), if enabled;
//! 2. one-hot indicators of the node's own attribute values;
//! 3. for each requested `(attribute, value)`, the proportion of the node's
//!    neighbors holding that value;
//! 4. for each requested class, the proportion of the node's *observed*
//!    neighbors carrying that label. Neighbors with hidden labels are treated
//!    as missing; with no observed neighbor these entries are 0.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, ClassId, LabelSplit, NodeId, Schema};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneHotCoding {
    /// One indicator per level.
    #[default]
    Full,
    /// No indicator for the first level of each attribute.
    DropFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborAttr {
    pub attr: String,
    pub value: String,
}

/// Declarative feature definition, resolved against a graph's vocabularies by
/// [`FeatureSpec::compile`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub one_hot: OneHotCoding,
    #[serde(default)]
    pub self_attrs: Vec<String>,
    #[serde(default)]
    pub neighbor_attrs: Vec<NeighborAttr>,
    /// Class names.
    #[serde(default)]
    pub neighbor_labels: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl FeatureSpec {
    pub fn intercept_only() -> Self {
        FeatureSpec {
            intercept: true,
            one_hot: OneHotCoding::Full,
            self_attrs: Vec::new(),
            neighbor_attrs: Vec::new(),
            neighbor_labels: Vec::new(),
        }
    }

    /// Intercept, reference-coded one-hots of every attribute, neighbor
    /// proportions of every non-reference attribute value and neighbor label
    /// proportions of every class but the first.
    pub fn default_for(schema: &Schema) -> Self {
        let self_attrs = schema.attr_names().to_vec();
        let mut neighbor_attrs = Vec::new();
        for (a, name) in schema.attr_names().iter().enumerate() {
            for value in schema.levels(a).iter().skip(1) {
                neighbor_attrs.push(NeighborAttr {
                    attr: name.clone(),
                    value: value.clone(),
                });
            }
        }
        FeatureSpec {
            intercept: true,
            one_hot: OneHotCoding::DropFirst,
            self_attrs,
            neighbor_attrs,
            neighbor_labels: schema.class_names().iter().skip(1).cloned().collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("feature spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("feature spec serializes")
    }

    pub fn compile(&self, schema: &Schema) -> Result<FeatureMap> {
        let attr = |name: &str| {
            schema
                .attr_index(name)
                .ok_or_else(|| Error::Config(format!("unknown attribute {name:?}")))
        };
        let mut names = Vec::new();
        let mut penalized = Vec::new();
        if self.intercept {
            names.push("intercept".to_string());
            penalized.push(false);
        }
        let mut one_hots = Vec::new();
        for name in &self.self_attrs {
            let a = attr(name)?;
            let skip = match self.one_hot {
                OneHotCoding::Full => 0,
                OneHotCoding::DropFirst => 1,
            };
            let levels: Vec<u32> = (skip..schema.levels(a).len() as u32).collect();
            for &l in &levels {
                names.push(format!("self:{name}={}", schema.levels(a)[l as usize]));
                penalized.push(true);
            }
            one_hots.push((a, levels));
        }
        let mut neighbor_attrs = Vec::new();
        for na in &self.neighbor_attrs {
            let a = attr(&na.attr)?;
            let code = schema.level_code(a, &na.value).ok_or_else(|| {
                Error::Config(format!("attribute {:?} has no value {:?}", na.attr, na.value))
            })?;
            names.push(format!("nbr:{}={}", na.attr, na.value));
            penalized.push(true);
            neighbor_attrs.push((a, code));
        }
        let mut neighbor_labels = Vec::new();
        for c in &self.neighbor_labels {
            let class = schema
                .class_index(c)
                .ok_or_else(|| Error::Config(format!("unknown class {c:?}")))?;
            names.push(format!("nbr_label={c}"));
            penalized.push(true);
            neighbor_labels.push(class);
        }
        Ok(FeatureMap {
            intercept: self.intercept,
            one_hots,
            neighbor_attrs,
            neighbor_labels,
            names,
            penalized,
        })
    }
}

/// A [`FeatureSpec`] resolved to attribute and class codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    intercept: bool,
    one_hots: Vec<(usize, Vec<u32>)>,
    neighbor_attrs: Vec<(usize, u32)>,
    neighbor_labels: Vec<ClassId>,
    names: Vec<String>,
    penalized: Vec<bool>,
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Whether each coordinate is subject to regularization (all but the
    /// intercept).
    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }

    fn fill_self(&self, g: &AttributedGraph, v: NodeId, out: &mut [f64]) -> usize {
        let mut i = 0;
        if self.intercept {
            out[0] = 1.0;
            i = 1;
        }
        for (a, levels) in &self.one_hots {
            let code = g.attr(v, *a);
            for &l in levels {
                out[i] = if l == code { 1.0 } else { 0.0 };
                i += 1;
            }
        }
        i
    }

    fn fill_neighbors(
        &self,
        g: &AttributedGraph,
        split: &LabelSplit,
        nbrs: impl Iterator<Item = NodeId> + Clone,
        out: &mut [f64],
    ) {
        let n_attr = self.neighbor_attrs.len();
        let (attr_out, label_out) = out.split_at_mut(n_attr);
        attr_out.fill(0.0);
        label_out.fill(0.0);
        let mut total = 0usize;
        let mut labeled = 0usize;
        for w in nbrs {
            total += 1;
            for (slot, &(a, code)) in attr_out.iter_mut().zip(&self.neighbor_attrs) {
                if g.attr(w, a) == code {
                    *slot += 1.0;
                }
            }
            if let Some(y) = g.label(w).filter(|_| split.is_observed(w)) {
                labeled += 1;
                for (slot, &c) in label_out.iter_mut().zip(&self.neighbor_labels) {
                    if y == c {
                        *slot += 1.0;
                    }
                }
            }
        }
        if total > 0 {
            attr_out.iter_mut().for_each(|x| *x /= total as f64);
        }
        if labeled > 0 {
            label_out.iter_mut().for_each(|x| *x /= labeled as f64);
        }
    }

    /// Writes the features of `v` into `out` (length [`FeatureMap::dim`]).
    pub fn fill(&self, g: &AttributedGraph, split: &LabelSplit, v: NodeId, out: &mut [f64]) {
        let i = self.fill_self(g, v, out);
        self.fill_neighbors(g, split, g.neighbors(v).iter().copied(), &mut out[i..]);
    }

    pub fn build(&self, g: &AttributedGraph, split: &LabelSplit, v: NodeId) -> Result<Vec<f64>> {
        if !g.contains(v) {
            return Err(Error::argument(format!("node {v} not in graph")));
        }
        let mut out = vec![0.0; self.dim()];
        self.fill(g, split, v, &mut out);
        Ok(out)
    }

    /// Like [`FeatureMap::build`] but neighbor proportions are computed over
    /// `min(k, d_v)` neighbors drawn uniformly without replacement.
    pub fn build_stochastic(
        &self,
        g: &AttributedGraph,
        split: &LabelSplit,
        v: NodeId,
        k: usize,
        rng_seed: u64,
    ) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::argument("neighbor sample size must be positive"));
        }
        if !g.contains(v) {
            return Err(Error::argument(format!("node {v} not in graph")));
        }
        let nbrs = g.neighbors(v);
        let mut out = vec![0.0; self.dim()];
        let i = self.fill_self(g, v, &mut out);
        if k >= nbrs.len() {
            self.fill_neighbors(g, split, nbrs.iter().copied(), &mut out[i..]);
        } else {
            let mut rng = rng::seeded(rng_seed);
            let picks = index::sample(&mut rng, nbrs.len(), k).into_vec();
            self.fill_neighbors(g, split, picks.iter().map(|&j| nbrs[j]), &mut out[i..]);
        }
        Ok(out)
    }
}

/// Features and labels of a fixed list of nodes, row `i` describing node
/// `nodes[i]` of the graph the features were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    classes: usize,
    rows: Vec<f64>,
    labels: Vec<Option<ClassId>>,
    names: Vec<String>,
    penalized: Vec<bool>,
}

impl FeatureTable {
    /// Row `i` holds the features of `nodes[i]` and its label if observed.
    pub fn build(g: &AttributedGraph, map: &FeatureMap, split: &LabelSplit, nodes: &[NodeId]) -> Result<Self> {
        let dim = map.dim();
        let mut rows = vec![0.0; nodes.len() * dim];
        let mut labels = Vec::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            if !g.contains(v) {
                return Err(Error::argument(format!("node {v} not in graph")));
            }
            map.fill(g, split, v, &mut rows[i * dim..(i + 1) * dim]);
            labels.push(g.label(v).filter(|_| split.is_observed(v)));
        }
        Ok(FeatureTable {
            dim,
            classes: g.class_count(),
            rows,
            labels,
            names: map.names().to_vec(),
            penalized: map.penalized().to_vec(),
        })
    }

    /// Table from raw rows; every coordinate except `unpenalized` is penalized.
    pub fn from_rows(
        dim: usize,
        classes: usize,
        rows: Vec<f64>,
        labels: Vec<Option<ClassId>>,
        unpenalized: &[usize],
    ) -> Result<Self> {
        if dim == 0 || rows.len() != dim * labels.len() {
            return Err(Error::argument("row buffer does not match dimension and label count"));
        }
        if classes < 2 || labels.iter().flatten().any(|&y| y >= classes) {
            return Err(Error::argument("labels must lie in 0..classes with at least two classes"));
        }
        let penalized = (0..dim).map(|j| !unpenalized.contains(&j)).collect();
        Ok(FeatureTable {
            dim,
            classes,
            rows,
            labels,
            names: (0..dim).map(|j| format!("x{j}")).collect(),
            penalized,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Option<ClassId> {
        self.labels[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }

    /// Label of row `i`, or an error naming the row if it is unlabeled.
    pub fn require_label(&self, i: usize) -> Result<ClassId> {
        self.labels
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| Error::argument(format!("row {i} has no observed label")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    /// Node 0 with neighbors 1..=3 labeled [a, a, b] plus unlabeled-by-split node 4.
    fn neighborhood() -> (AttributedGraph, LabelSplit) {
        let mut b = GraphBuilder::new(["color", "size"], ["a", "b"]);
        let rows = [
            ("red", "s", "a"),
            ("red", "m", "a"),
            ("blue", "s", "a"),
            ("blue", "l", "b"),
            ("", "s", "b"),
        ];
        for (i, (c, s, y)) in rows.iter().enumerate() {
            b.add_node(i as u64, &[c, s], Some(y)).unwrap();
        }
        for v in 1..=4 {
            b.add_edge(0, v);
        }
        let (g, _) = b.build().unwrap();
        let split = LabelSplit::from_observed(&g, &[0, 1, 2, 3]);
        (g, split)
    }

    fn spec() -> FeatureSpec {
        FeatureSpec {
            intercept: true,
            one_hot: OneHotCoding::Full,
            self_attrs: vec!["color".into()],
            neighbor_attrs: vec![NeighborAttr { attr: "size".into(), value: "s".into() }],
            neighbor_labels: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn label_proportions_use_observed_neighbors() {
        let (g, split) = neighborhood();
        let map = spec().compile(g.schema()).unwrap();
        let phi = map.build(&g, &split, 0).unwrap();
        // intercept, color one-hot (red, blue, missing), nbr size=s, labels a, b
        assert_eq!(map.dim(), 7);
        assert_eq!(&phi[..4], &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(phi[4], 2.0 / 4.0);
        assert_eq!(phi[5], 2.0 / 3.0);
        assert_eq!(phi[6], 1.0 / 3.0);
    }

    #[test]
    fn no_observed_neighbors_gives_zero_label_features() {
        let (g, _) = neighborhood();
        let split = LabelSplit::from_observed(&g, &[0]);
        let map = spec().compile(g.schema()).unwrap();
        let phi = map.build(&g, &split, 0).unwrap();
        assert_eq!(&phi[5..], &[0.0, 0.0]);
        assert_eq!(phi[4], 0.5);
    }

    #[test]
    fn intercept_only() {
        let (g, split) = neighborhood();
        let map = FeatureSpec::intercept_only().compile(g.schema()).unwrap();
        assert_eq!(map.build(&g, &split, 3).unwrap(), vec![1.0]);
    }

    #[test]
    fn unknown_names_are_configuration_errors() {
        let (g, _) = neighborhood();
        let mut s = spec();
        s.self_attrs = vec!["weight".into()];
        assert!(matches!(s.compile(g.schema()), Err(Error::Config(_))));
        let mut s = spec();
        s.neighbor_attrs[0].value = "xl".into();
        assert!(matches!(s.compile(g.schema()), Err(Error::Config(_))));
        let mut s = spec();
        s.neighbor_labels = vec!["c".into()];
        assert!(matches!(s.compile(g.schema()), Err(Error::Config(_))));
    }

    #[test]
    fn one_hot_groups_and_dimension() {
        let (g, split) = neighborhood();
        let map = spec().compile(g.schema()).unwrap();
        for v in g.nodes() {
            let phi = map.build(&g, &split, v).unwrap();
            assert_eq!(phi.len(), map.dim());
            assert_eq!(phi[1..4].iter().sum::<f64>(), 1.0);
            assert!(phi[4..].iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn drop_first_coding_skips_reference_level() {
        let (g, split) = neighborhood();
        let mut s = spec();
        s.one_hot = OneHotCoding::DropFirst;
        let map = s.compile(g.schema()).unwrap();
        assert_eq!(map.dim(), 6);
        assert_eq!(&map.build(&g, &split, 0).unwrap()[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(&map.build(&g, &split, 2).unwrap()[..3], &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn default_spec_layout() {
        let (g, _) = neighborhood();
        let s = FeatureSpec::default_for(g.schema());
        let map = s.compile(g.schema()).unwrap();
        // 1 + (3-1) + (3-1) one-hots + (2 + 2) neighbor values + 1 class
        assert_eq!(map.dim(), 10);
        assert_eq!(map.penalized().iter().filter(|&&p| !p).count(), 1);
    }

    #[test]
    fn toml_round_trip() {
        let s = spec();
        assert_eq!(FeatureSpec::from_toml(&s.to_toml()).unwrap(), s);
        let parsed = FeatureSpec::from_toml("self_attrs = [\"color\"]\n").unwrap();
        assert!(parsed.intercept);
        assert_eq!(parsed.one_hot, OneHotCoding::Full);
        assert!(FeatureSpec::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn exhaustive_subsample_equals_exact() {
        let (g, split) = neighborhood();
        let map = spec().compile(g.schema()).unwrap();
        let exact = map.build(&g, &split, 0).unwrap();
        for k in [4, 5, 100] {
            assert_eq!(map.build_stochastic(&g, &split, 0, k, 3).unwrap(), exact);
        }
        assert!(map.build_stochastic(&g, &split, 0, 0, 3).is_err());
    }

    fn big_star(n_leaves: usize, class_a: usize) -> (AttributedGraph, LabelSplit) {
        let mut b = GraphBuilder::new(Vec::<&str>::new(), ["a", "b"]);
        b.add_node(0, &[], Some("a")).unwrap();
        for i in 1..=n_leaves {
            b.add_node(i as u64, &[], Some(if i <= class_a { "a" } else { "b" })).unwrap();
            b.add_edge(0, i);
        }
        let (g, _) = b.build().unwrap();
        let split = LabelSplit::all_labeled(&g);
        (g, split)
    }

    #[test]
    fn homogeneous_neighborhood_subsample_is_exact() {
        let (g, split) = big_star(100, 100);
        let mut s = FeatureSpec::intercept_only();
        s.neighbor_labels = vec!["a".into()];
        let map = s.compile(g.schema()).unwrap();
        assert_eq!(map.build_stochastic(&g, &split, 0, 10, 1).unwrap()[1], 1.0);
    }

    #[test]
    fn subsampled_proportion_is_unbiased() {
        let (g, split) = big_star(1000, 400);
        let mut s = FeatureSpec::intercept_only();
        s.intercept = false;
        s.neighbor_labels = vec!["a".into()];
        let map = s.compile(g.schema()).unwrap();
        let reps = 10_000;
        let k = 50usize;
        let mean = (0..reps)
            .map(|r| map.build_stochastic(&g, &split, 0, k, r).unwrap()[0])
            .sum::<f64>()
            / reps as f64;
        // hypergeometric variance of the sample proportion
        let (n, p) = (1000.0, 0.4);
        let var = p * (1.0 - p) / k as f64 * (n - k as f64) / (n - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!((mean - 0.4).abs() < 3.0 * se, "mean={mean} se={se}");
    }

    #[test]
    fn neighbor_order_does_not_matter() {
        // same neighborhood inserted in two orders
        let build = |order: &[usize]| {
            let mut b = GraphBuilder::new(["c"], ["a", "b"]);
            for (i, c) in ["x", "y", "x", "z"].iter().enumerate() {
                b.add_node(i as u64, &[c], Some(if i % 2 == 0 { "a" } else { "b" })).unwrap();
            }
            for &v in order {
                b.add_edge(v, 0);
            }
            b.build().unwrap().0
        };
        let g1 = build(&[1, 2, 3]);
        let g2 = build(&[3, 1, 2]);
        let s = FeatureSpec {
            neighbor_attrs: vec![NeighborAttr { attr: "c".into(), value: "x".into() }],
            neighbor_labels: vec!["a".into()],
            ..FeatureSpec::intercept_only()
        };
        let m1 = s.compile(g1.schema()).unwrap();
        let m2 = s.compile(g2.schema()).unwrap();
        let s1 = LabelSplit::all_labeled(&g1);
        let s2 = LabelSplit::all_labeled(&g2);
        assert_eq!(m1.build(&g1, &s1, 0).unwrap(), m2.build(&g2, &s2, 0).unwrap());
    }

    #[test]
    fn table_rows_follow_node_list() {
        let (g, split) = neighborhood();
        let map = spec().compile(g.schema()).unwrap();
        let t = FeatureTable::build(&g, &map, &split, &[3, 0]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.row(1), map.build(&g, &split, 0).unwrap().as_slice());
        assert_eq!(t.label(0), Some(1));
        let t = FeatureTable::build(&g, &map, &split, &[4]).unwrap();
        assert_eq!(t.label(0), None);
        assert!(t.require_label(0).is_err());
    }
}
