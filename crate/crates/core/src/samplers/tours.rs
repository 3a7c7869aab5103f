//! Random-walk tour sampling.
//!
//! The seed set `S` is contracted into a single super-node whose edges are the
//! `d_S` edges leaving `S` (edges inside `S` are dropped). A tour is an
//! excursion of the simple random walk on that multigraph: it leaves the
//! super-node along a uniformly chosen outgoing edge, walks the original graph
//! and ends on the first return to any node of `S`. Successive tours are
//! i.i.d., which is what the estimators and the bootstrap rely on.

use std::collections::BTreeMap;

use rand::Rng;

use super::{CrawlAccess, Crawler, Method, IDLE_STEP_LIMIT};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeId};
use crate::rng::{self, CrateRng};

/// Seeds, super-node degree and completed tours of a tour crawl.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TourCollection {
    /// Sorted, distinct.
    pub seeds: Vec<NodeId>,
    pub d_s: usize,
    /// Each tour starts and ends in `seeds`; interior nodes are outside it.
    pub tours: Vec<Vec<NodeId>>,
    /// Original-graph degree of every interior node.
    pub degrees: BTreeMap<NodeId, usize>,
}

impl TourCollection {
    pub fn len(&self) -> usize {
        self.tours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tours.is_empty()
    }

    /// Every node is a seed: `d_S = 0` and no tours. The estimators then reduce
    /// to exact sums over the graph.
    pub fn whole_graph(g: &AttributedGraph) -> TourCollection {
        TourCollection {
            seeds: g.nodes().collect(),
            d_s: 0,
            tours: Vec::new(),
            degrees: BTreeMap::new(),
        }
    }

    /// Collection made of the tours at `indices` (repeats allowed), sharing
    /// the seed set and `d_S`.
    pub fn resample(&self, indices: &[usize]) -> TourCollection {
        let tours: Vec<Vec<NodeId>> = indices.iter().map(|&i| self.tours[i].clone()).collect();
        let mut degrees = BTreeMap::new();
        for tour in &tours {
            for v in interior(tour) {
                degrees.insert(*v, self.degrees[v]);
            }
        }
        TourCollection {
            seeds: self.seeds.clone(),
            d_s: self.d_s,
            tours,
            degrees,
        }
    }

    /// Checks the collection against the graph it was sampled from.
    pub fn validate(&self, g: &AttributedGraph) -> Result<()> {
        let mut is_seed = vec![false; g.node_count()];
        for w in self.seeds.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::data("seed list must be sorted and distinct"));
            }
        }
        for &s in &self.seeds {
            if !g.contains(s) {
                return Err(Error::data(format!("seed {s} not in graph")));
            }
            is_seed[s] = true;
        }
        if self.seeds.is_empty() {
            return Err(Error::data("empty seed set"));
        }
        let d_s = super_node_degree(g, &is_seed, &self.seeds);
        if d_s != self.d_s {
            return Err(Error::data(format!("stored d_S {} but graph gives {d_s}", self.d_s)));
        }
        for (k, tour) in self.tours.iter().enumerate() {
            if tour.len() < 3 {
                return Err(Error::data(format!("tour {k} has {} nodes, need at least 3", tour.len())));
            }
            if tour.iter().any(|&v| !g.contains(v)) {
                return Err(Error::data(format!("tour {k} leaves the graph")));
            }
            if !is_seed[tour[0]] || !is_seed[tour[tour.len() - 1]] {
                return Err(Error::data(format!("tour {k} does not start and end in the seed set")));
            }
            if let Some(v) = interior(tour).iter().find(|&&v| is_seed[v]) {
                return Err(Error::data(format!("tour {k} passes through seed {v}")));
            }
            if let Some(w) = tour.windows(2).find(|w| !g.has_edge(w[0], w[1])) {
                return Err(Error::data(format!("tour {k} steps along non-edge ({}, {})", w[0], w[1])));
            }
            for v in interior(tour) {
                match self.degrees.get(v) {
                    Some(&d) if d == g.degree(*v) => {}
                    Some(&d) => {
                        return Err(Error::data(format!("node {v}: stored degree {d}, graph degree {}", g.degree(*v))))
                    }
                    None => return Err(Error::data(format!("node {v}: degree not recorded"))),
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn interior(tour: &[NodeId]) -> &[NodeId] {
    &tour[1..tour.len() - 1]
}

fn super_node_degree(g: &AttributedGraph, is_seed: &[bool], seeds: &[NodeId]) -> usize {
    seeds
        .iter()
        .map(|&s| g.neighbors(s).iter().filter(|&&v| !is_seed[v]).count())
        .sum()
}

/// Default seed-set size, `max(1, ceil(0.01 * n))`.
pub fn default_seed_count(n: usize) -> usize {
    ((n as f64 * 0.01).ceil() as usize).max(1)
}

/// Collects a seed set with a simple random walk from `start`: the walk runs
/// at least `walk_len` steps and, if needed, until `target_size` distinct
/// nodes have been seen; the seeds are the first `target_size` of them.
/// Returned sorted.
pub fn collect_seeds(
    g: &AttributedGraph,
    start: NodeId,
    walk_len: usize,
    target_size: usize,
    rng_seed: u64,
) -> Result<Vec<NodeId>> {
    super::check_seed(g, start)?;
    if target_size == 0 || target_size >= g.node_count() {
        return Err(Error::argument(format!(
            "seed set size {target_size} must be in [1, {})",
            g.node_count()
        )));
    }
    let mut rng = rng::seeded(rng_seed);
    let mut seen = vec![false; g.node_count()];
    let mut order = vec![start];
    seen[start] = true;
    let mut u = start;
    let mut steps = 0usize;
    let mut idle = 0u64;
    while steps < walk_len || order.len() < target_size {
        let nbrs = g.neighbors(u);
        if nbrs.is_empty() || idle >= IDLE_STEP_LIMIT {
            return Err(Error::argument(format!(
                "seed walk from {start} cannot reach {target_size} distinct nodes"
            )));
        }
        u = nbrs[rng.random_range(0..nbrs.len())];
        steps += 1;
        if !seen[u] {
            seen[u] = true;
            order.push(u);
            idle = 0;
        } else {
            idle += 1;
        }
    }
    order.truncate(target_size);
    order.sort_unstable();
    Ok(order)
}

/// Resumable tour crawl. All seeds are queried (and charged) on creation.
///
/// A tour in progress when the budget is spent continues through already
/// queried nodes and stops at the first node that would need a new query;
/// no tour is started while the budget is spent.
#[derive(Debug, Clone)]
pub struct TourCrawler<'g> {
    access: CrawlAccess<'g>,
    seeds: Vec<NodeId>,
    is_seed: Vec<bool>,
    out_edges: Vec<(NodeId, NodeId)>,
    tours: Vec<Vec<NodeId>>,
    current: Vec<NodeId>,
    pending: Option<NodeId>,
    max_tours: Option<usize>,
    rng: CrateRng,
}

impl<'g> TourCrawler<'g> {
    pub fn new(g: &'g AttributedGraph, seeds: &[NodeId], rng_seed: u64) -> Result<Self> {
        let mut seeds = seeds.to_vec();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.is_empty() {
            return Err(Error::argument("empty seed set"));
        }
        let mut is_seed = vec![false; g.node_count()];
        for &s in &seeds {
            super::check_seed(g, s)?;
            is_seed[s] = true;
        }
        let out_edges: Vec<(NodeId, NodeId)> = seeds
            .iter()
            .flat_map(|&s| g.neighbors(s).iter().filter(|&&v| !is_seed[v]).map(move |&v| (s, v)))
            .collect();
        if out_edges.is_empty() {
            return Err(Error::AbsorbingSeedSet);
        }
        let mut access = CrawlAccess::new(g);
        access.raise_budget(seeds.len());
        for &s in &seeds {
            access.query(s).expect("budget covers the seeds");
        }
        Ok(TourCrawler {
            access,
            seeds,
            is_seed,
            out_edges,
            tours: Vec::new(),
            current: Vec::new(),
            pending: None,
            max_tours: None,
            rng: rng::seeded(rng_seed),
        })
    }

    /// Stop once this many tours are complete.
    pub fn with_max_tours(mut self, m: usize) -> Self {
        self.max_tours = Some(m);
        self
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.seeds
    }

    pub fn d_s(&self) -> usize {
        self.out_edges.len()
    }

    pub fn tour_count(&self) -> usize {
        self.tours.len()
    }

    /// Completed tours so far; a tour in progress is not included.
    pub fn tours(&self) -> TourCollection {
        let g = self.access.graph();
        let mut degrees = BTreeMap::new();
        for tour in &self.tours {
            for &v in interior(tour) {
                degrees.insert(v, g.degree(v));
            }
        }
        TourCollection {
            seeds: self.seeds.clone(),
            d_s: self.out_edges.len(),
            tours: self.tours.clone(),
            degrees,
        }
    }

    fn done(&self) -> bool {
        self.max_tours.is_some_and(|m| self.tours.len() >= m)
    }
}

impl Crawler for TourCrawler<'_> {
    fn method(&self) -> Method {
        Method::Ts
    }

    fn advance(&mut self, max_unique_queries: usize) {
        self.access.raise_budget(max_unique_queries);
        let mut idle = 0u64;
        while !self.done() && idle < IDLE_STEP_LIMIT {
            // no new tour once the budget is spent
            if self.current.is_empty() && self.pending.is_none() && self.access.exhausted() {
                return;
            }
            let next = if let Some(v) = self.pending.take() {
                v
            } else if self.current.is_empty() {
                let (s, v) = self.out_edges[self.rng.random_range(0..self.out_edges.len())];
                self.current.push(s);
                v
            } else {
                let u = *self.current.last().unwrap();
                let nbrs = self.access.neighbors(u);
                nbrs[self.rng.random_range(0..nbrs.len())]
            };
            if self.is_seed[next] {
                self.current.push(next);
                self.tours.push(std::mem::take(&mut self.current));
                idle = 0;
                continue;
            }
            match self.access.query(next) {
                Ok(true) => idle = 0,
                Ok(false) => idle += 1,
                Err(_) => {
                    self.pending = Some(next);
                    return;
                }
            }
            self.current.push(next);
        }
    }

    fn access(&self) -> &CrawlAccess<'_> {
        &self.access
    }
}

/// Samples up to `m` tours from seed set `seeds` within `budget` unique
/// queries (seeds included). Fewer tours are returned when the budget runs
/// out mid-tour; the unfinished tour is dropped.
pub fn sample_tours(
    g: &AttributedGraph,
    seeds: &[NodeId],
    m: usize,
    budget: usize,
    rng_seed: u64,
) -> Result<TourCollection> {
    if budget < seeds.len() {
        return Err(Error::argument(format!(
            "budget {budget} cannot cover {} seed nodes",
            seeds.len()
        )));
    }
    let mut crawler = TourCrawler::new(g, seeds, rng_seed)?.with_max_tours(m);
    crawler.advance(budget);
    Ok(crawler.tours())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_graphs::*;

    fn lollipop() -> AttributedGraph {
        let edges = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 3)];
        from_edges(8, &edges, &[0; 8], 2)
    }

    #[test]
    fn all_seeds_is_absorbing() {
        let g = complete(4);
        assert!(matches!(sample_tours(&g, &[0, 1, 2, 3], 5, 10, 0), Err(Error::AbsorbingSeedSet)));
    }

    #[test]
    fn path_end_seed() {
        let g = path(3);
        let t = sample_tours(&g, &[0], 50, 10, 1).unwrap();
        assert_eq!(t.d_s, 1);
        assert_eq!(t.len(), 50);
        for tour in &t.tours {
            assert_eq!(&tour[..2], &[0, 1]);
            assert_eq!(*tour.last().unwrap(), 0);
        }
        t.validate(&g).unwrap();
    }

    #[test]
    fn star_center_tours_pick_edges_uniformly() {
        let g = star(3);
        let m = 10_000;
        let t = sample_tours(&g, &[0], m, 10, 2).unwrap();
        assert_eq!(t.d_s, 3);
        let mut counts = [0usize; 4];
        for tour in &t.tours {
            assert_eq!(tour.len(), 3);
            counts[tour[1]] += 1;
        }
        let sd = (m as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for leaf in 1..=3 {
            assert!((counts[leaf] as f64 - m as f64 / 3.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn first_step_follows_edges_not_seeds() {
        // seed 0 has one outgoing edge, seed 3 has three
        let edges = [(0, 1), (3, 4), (3, 5), (3, 6), (1, 4), (5, 6), (1, 2)];
        let g = from_edges(7, &edges, &[0; 7], 2);
        let m = 20_000;
        let t = sample_tours(&g, &[0, 3], m, 100, 5).unwrap();
        assert_eq!(t.d_s, 4);
        let from_zero = t.tours.iter().filter(|tour| tour[0] == 0).count();
        let sd = (m as f64 * 0.25 * 0.75).sqrt();
        assert!((from_zero as f64 - m as f64 * 0.25).abs() < 3.0 * sd);
    }

    #[test]
    fn invariants_hold_and_d_s_recomputes() {
        let g = lollipop();
        let t = sample_tours(&g, &[0, 1], 200, 8, 3).unwrap();
        assert_eq!(t.d_s, 2);
        t.validate(&g).unwrap();
        assert!(t.tours.iter().all(|tour| tour.len() >= 3));
    }

    #[test]
    fn budget_exhaustion_discards_partial_tour() {
        let g = lollipop();
        let mut c = TourCrawler::new(&g, &[0], 4).unwrap();
        c.advance(3);
        assert!(c.spent() <= 3);
        let tours = c.tours();
        tours.validate(&g).unwrap();
        // the crawl spent its budget on nodes of the unfinished tour
        assert!(tours.tours.iter().flatten().all(|&v| c.access().is_queried(v)));
    }

    #[test]
    fn staged_crawl_matches_direct() {
        let g = lollipop();
        let mut staged = TourCrawler::new(&g, &[2], 8).unwrap();
        for b in 1..=8 {
            staged.advance(b);
        }
        let mut direct = TourCrawler::new(&g, &[2], 8).unwrap();
        direct.advance(8);
        assert_eq!(staged.tours(), direct.tours());
        assert_eq!(staged.sample(), direct.sample());
    }

    #[test]
    fn resample_keeps_seeds_and_d_s() {
        let g = lollipop();
        let t = sample_tours(&g, &[0], 10, 8, 3).unwrap();
        let r = t.resample(&[1, 1, 4]);
        assert_eq!(r.seeds, t.seeds);
        assert_eq!(r.d_s, t.d_s);
        assert_eq!(r.tours[0], t.tours[1]);
        r.validate(&g).unwrap();
    }

    #[test]
    fn seeds_singleton_and_complete_graph() {
        let g = complete(4);
        assert_eq!(collect_seeds(&g, 2, 10, 1, 0).unwrap(), vec![2]);
        let s = collect_seeds(&g, 0, 30, 3, 0).unwrap();
        assert_eq!(s.len(), 3);
        for &a in &s {
            for &b in &s {
                assert!(a == b || g.has_edge(a, b));
            }
        }
        assert_eq!(collect_seeds(&g, 0, 30, 3, 42).unwrap(), collect_seeds(&g, 0, 30, 3, 42).unwrap());
        assert!(collect_seeds(&g, 0, 30, 4, 42).is_err());
    }

    #[test]
    fn default_seed_count_rounds_up() {
        assert_eq!(default_seed_count(10), 1);
        assert_eq!(default_seed_count(101), 2);
        assert_eq!(default_seed_count(1000), 10);
    }
}
