//! Network crawlers.
//!
//! Every crawler sees the graph only through [`CrawlAccess`], which charges
//! one unit of budget the first time a node is queried (its attributes and
//! neighbor list are read) and nothing for later visits. Crawlers are
//! resumable: [`Crawler::advance`] extends a crawl to a larger budget, and a
//! crawl advanced in several stages is identical to one run to the final
//! budget directly.

mod bfs;
mod forest_fire;
mod format;
mod tours;
mod walks;

pub use bfs::BfsCrawler;
pub use forest_fire::{ForestFireCrawler, DEFAULT_FORWARD_PROBABILITY};
pub use format::{read_sample, read_tours, write_sample, write_tours};
pub use tours::{collect_seeds, default_seed_count, sample_tours, TourCollection, TourCrawler};
pub use walks::{mh_kernel_row, mh_transition, MetropolisHastingsCrawler, RandomWalkCrawler};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeId};

/// Walks stop after this many consecutive steps without reaching a new node.
/// Only reachable when the budget exceeds the size of the seed's component.
pub(crate) const IDLE_STEP_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "BFS")]
    Bfs,
    #[serde(rename = "FF")]
    Ff,
    #[serde(rename = "RW")]
    Rw,
    #[serde(rename = "MH")]
    Mh,
    #[serde(rename = "TS")]
    Ts,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Bfs, Method::Ff, Method::Rw, Method::Mh, Method::Ts];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Bfs => "BFS",
            Method::Ff => "FF",
            Method::Rw => "RW",
            Method::Mh => "MH",
            Method::Ts => "TS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::argument(format!("unknown crawl method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrawlBudget {
    pub max_unique_queries: usize,
    pub spent: usize,
}

impl CrawlBudget {
    pub fn new(max_unique_queries: usize) -> Self {
        CrawlBudget {
            max_unique_queries,
            spent: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.max_unique_queries.saturating_sub(self.spent)
    }
}

/// The budget was exhausted before a new node could be queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exhausted;

/// Crawl-only view of a graph with unique-query accounting.
#[derive(Debug, Clone)]
pub struct CrawlAccess<'g> {
    graph: &'g AttributedGraph,
    queried: Vec<bool>,
    visited: Vec<NodeId>,
    budget: CrawlBudget,
}

impl<'g> CrawlAccess<'g> {
    pub fn new(graph: &'g AttributedGraph) -> Self {
        CrawlAccess {
            graph,
            queried: vec![false; graph.node_count()],
            visited: Vec::new(),
            budget: CrawlBudget::new(0),
        }
    }

    pub fn graph(&self) -> &'g AttributedGraph {
        self.graph
    }

    pub fn budget(&self) -> CrawlBudget {
        self.budget
    }

    /// Raises the budget ceiling; lowering it is ignored.
    pub fn raise_budget(&mut self, max_unique_queries: usize) {
        self.budget.max_unique_queries = self.budget.max_unique_queries.max(max_unique_queries);
    }

    #[inline]
    pub fn is_queried(&self, v: NodeId) -> bool {
        self.queried[v]
    }

    /// Queries `v`, charging the budget if it has not been queried before.
    /// Returns whether the node was new.
    pub fn query(&mut self, v: NodeId) -> std::result::Result<bool, Exhausted> {
        if self.queried[v] {
            return Ok(false);
        }
        if self.budget.spent >= self.budget.max_unique_queries {
            return Err(Exhausted);
        }
        self.queried[v] = true;
        self.visited.push(v);
        self.budget.spent += 1;
        Ok(true)
    }

    /// Neighbors of a node that has been queried.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &'g [NodeId] {
        debug_assert!(self.queried[v], "neighbors of unqueried node {v}");
        self.graph.neighbors(v)
    }

    /// Degree lookup used by walk proposals; free of charge.
    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.graph.degree(v)
    }

    pub fn visited(&self) -> &[NodeId] {
        &self.visited
    }

    pub fn exhausted(&self) -> bool {
        self.budget.spent >= self.budget.max_unique_queries
    }

    pub fn all_queried(&self) -> bool {
        self.visited.len() == self.graph.node_count()
    }
}

/// Ordered unique nodes visited by a crawl.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlSample {
    pub method: Method,
    pub visited: Vec<NodeId>,
}

impl CrawlSample {
    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    /// Checks uniqueness and that every node after the first neighbors an
    /// earlier one.
    pub fn validate(&self, g: &AttributedGraph) -> Result<()> {
        let mut seen = vec![false; g.node_count()];
        for (i, &v) in self.visited.iter().enumerate() {
            if !g.contains(v) {
                return Err(Error::data(format!("node {v} not in graph")));
            }
            if seen[v] {
                return Err(Error::data(format!("node {v} visited twice")));
            }
            if i > 0 && !g.neighbors(v).iter().any(|&w| seen[w]) {
                return Err(Error::data(format!("node {v} not adjacent to earlier visits")));
            }
            seen[v] = true;
        }
        Ok(())
    }
}

/// A resumable crawl.
pub trait Crawler {
    fn method(&self) -> Method;

    /// Continues the crawl until `max_unique_queries` nodes have been queried
    /// or the crawl cannot make progress.
    fn advance(&mut self, max_unique_queries: usize);

    fn access(&self) -> &CrawlAccess<'_>;

    fn spent(&self) -> usize {
        self.access().budget().spent
    }

    fn sample(&self) -> CrawlSample {
        CrawlSample {
            method: self.method(),
            visited: self.access().visited().to_vec(),
        }
    }
}

pub(crate) fn check_seed(g: &AttributedGraph, seed: NodeId) -> Result<()> {
    if g.contains(seed) {
        Ok(())
    } else {
        Err(Error::argument(format!("seed node {seed} not in graph")))
    }
}

pub fn crawl_bfs(g: &AttributedGraph, seed: NodeId, budget: usize) -> Result<CrawlSample> {
    let mut c = BfsCrawler::new(g, seed)?;
    c.advance(budget);
    Ok(c.sample())
}

pub fn crawl_ff(g: &AttributedGraph, seed: NodeId, budget: usize, p_forward: f64, rng_seed: u64) -> Result<CrawlSample> {
    let mut c = ForestFireCrawler::new(g, seed, p_forward, rng_seed)?;
    c.advance(budget);
    Ok(c.sample())
}

pub fn crawl_rw(g: &AttributedGraph, seed: NodeId, budget: usize, rng_seed: u64) -> Result<CrawlSample> {
    let mut c = RandomWalkCrawler::new(g, seed, rng_seed)?;
    c.advance(budget);
    Ok(c.sample())
}

pub fn crawl_mh(g: &AttributedGraph, seed: NodeId, budget: usize, rng_seed: u64) -> Result<CrawlSample> {
    let mut c = MetropolisHastingsCrawler::new(g, seed, rng_seed)?;
    c.advance(budget);
    Ok(c.sample())
}
