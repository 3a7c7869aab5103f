use rand::Rng;

use super::{check_seed, CrawlAccess, Crawler, Method, IDLE_STEP_LIMIT};
use crate::error::Result;
use crate::graph::{AttributedGraph, NodeId};
use crate::rng::{self, CrateRng};

/// One Metropolis-Hastings step from `u`: propose a uniform neighbor `v` and
/// accept with probability `min(1, d_u / d_v)`, which gives the transition
/// probability `min(1/d_u, 1/d_v)` and a uniform stationary distribution.
pub fn mh_transition<R: Rng + ?Sized>(g: &AttributedGraph, u: NodeId, rng: &mut R) -> NodeId {
    let nbrs = g.neighbors(u);
    if nbrs.is_empty() {
        return u;
    }
    let v = nbrs[rng.random_range(0..nbrs.len())];
    let accept: f64 = rng.random();
    if accept * (g.degree(v) as f64) < g.degree(u) as f64 {
        v
    } else {
        u
    }
}

/// Row `u` of the Metropolis-Hastings kernel: the neighbor entries followed by
/// the self-loop residual.
pub fn mh_kernel_row(g: &AttributedGraph, u: NodeId) -> Vec<(NodeId, f64)> {
    let du = g.degree(u) as f64;
    let mut row: Vec<(NodeId, f64)> = g
        .neighbors(u)
        .iter()
        .map(|&v| (v, (1.0 / du).min(1.0 / g.degree(v) as f64)))
        .collect();
    let moving: f64 = row.iter().map(|&(_, p)| p).sum();
    row.push((u, 1.0 - moving));
    row
}

/// Simple random walk; first visits are recorded, revisits are free.
#[derive(Debug, Clone)]
pub struct RandomWalkCrawler<'g> {
    access: CrawlAccess<'g>,
    seed: NodeId,
    current: Option<NodeId>,
    pending: Option<NodeId>,
    rng: CrateRng,
}

impl<'g> RandomWalkCrawler<'g> {
    pub fn new(g: &'g AttributedGraph, seed: NodeId, rng_seed: u64) -> Result<Self> {
        check_seed(g, seed)?;
        Ok(RandomWalkCrawler {
            access: CrawlAccess::new(g),
            seed,
            current: None,
            pending: None,
            rng: rng::seeded(rng_seed),
        })
    }
}

impl Crawler for RandomWalkCrawler<'_> {
    fn method(&self) -> Method {
        Method::Rw
    }

    fn advance(&mut self, max_unique_queries: usize) {
        self.access.raise_budget(max_unique_queries);
        let mut u = match self.current {
            Some(u) => u,
            None => {
                if self.access.query(self.seed).is_err() {
                    return;
                }
                self.current = Some(self.seed);
                self.seed
            }
        };
        let mut idle = 0u64;
        while !self.access.exhausted() && !self.access.all_queried() && idle < IDLE_STEP_LIMIT {
            let v = match self.pending.take() {
                Some(v) => v,
                None => {
                    let nbrs = self.access.neighbors(u);
                    if nbrs.is_empty() {
                        break;
                    }
                    nbrs[self.rng.random_range(0..nbrs.len())]
                }
            };
            match self.access.query(v) {
                Ok(true) => idle = 0,
                Ok(false) => idle += 1,
                Err(_) => {
                    self.pending = Some(v);
                    break;
                }
            }
            u = v;
        }
        self.current = Some(u);
    }

    fn access(&self) -> &CrawlAccess<'_> {
        &self.access
    }
}

/// Metropolis-Hastings random walk; rejected proposals and self-loops are free.
#[derive(Debug, Clone)]
pub struct MetropolisHastingsCrawler<'g> {
    access: CrawlAccess<'g>,
    seed: NodeId,
    current: Option<NodeId>,
    pending: Option<NodeId>,
    rng: CrateRng,
}

impl<'g> MetropolisHastingsCrawler<'g> {
    pub fn new(g: &'g AttributedGraph, seed: NodeId, rng_seed: u64) -> Result<Self> {
        check_seed(g, seed)?;
        Ok(MetropolisHastingsCrawler {
            access: CrawlAccess::new(g),
            seed,
            current: None,
            pending: None,
            rng: rng::seeded(rng_seed),
        })
    }
}

impl Crawler for MetropolisHastingsCrawler<'_> {
    fn method(&self) -> Method {
        Method::Mh
    }

    fn advance(&mut self, max_unique_queries: usize) {
        self.access.raise_budget(max_unique_queries);
        let g = self.access.graph();
        let mut u = match self.current {
            Some(u) => u,
            None => {
                if self.access.query(self.seed).is_err() {
                    return;
                }
                self.current = Some(self.seed);
                self.seed
            }
        };
        let mut idle = 0u64;
        while !self.access.exhausted() && !self.access.all_queried() && idle < IDLE_STEP_LIMIT {
            if g.degree(u) == 0 {
                break;
            }
            let v = match self.pending.take() {
                Some(v) => v,
                None => mh_transition(g, u, &mut self.rng),
            };
            match self.access.query(v) {
                Ok(true) => idle = 0,
                Ok(false) => idle += 1,
                Err(_) => {
                    self.pending = Some(v);
                    break;
                }
            }
            u = v;
        }
        self.current = Some(u);
    }

    fn access(&self) -> &CrawlAccess<'_> {
        &self.access
    }
}
