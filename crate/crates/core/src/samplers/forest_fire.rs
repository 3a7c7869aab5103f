use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::{check_seed, CrawlAccess, Crawler, Method};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeId};
use crate::rng::{self, CrateRng};

pub const DEFAULT_FORWARD_PROBABILITY: f64 = 0.7;

/// Forest fire sampling.
///
/// Each burned node draws `n ~ Geometric` with mean `p_f / (1 - p_f)` and
/// burns `n` of its unburned neighbors, chosen uniformly. When the fire dies
/// out before the budget is spent, it restarts from a uniformly chosen burned
/// node that still has unburned neighbors and burns at least one of them.
#[derive(Debug, Clone)]
pub struct ForestFireCrawler<'g> {
    access: CrawlAccess<'g>,
    burn_count: Geometric,
    front: VecDeque<NodeId>,
    // chosen for burning but not yet queried when the budget ran out
    pending: VecDeque<NodeId>,
    seed: NodeId,
    started: bool,
    rng: CrateRng,
}

impl<'g> ForestFireCrawler<'g> {
    pub fn new(g: &'g AttributedGraph, seed: NodeId, p_forward: f64, rng_seed: u64) -> Result<Self> {
        check_seed(g, seed)?;
        if !(p_forward > 0.0 && p_forward < 1.0) {
            return Err(Error::argument(format!("forward burning probability {p_forward} outside (0, 1)")));
        }
        let burn_count = Geometric::new(1.0 - p_forward)
            .map_err(|e| Error::argument(format!("forward burning probability: {e}")))?;
        Ok(ForestFireCrawler {
            access: CrawlAccess::new(g),
            burn_count,
            front: VecDeque::new(),
            pending: VecDeque::new(),
            seed,
            started: false,
            rng: rng::seeded(rng_seed),
        })
    }

    fn unburned_neighbors(&self, u: NodeId) -> Vec<NodeId> {
        self.access
            .neighbors(u)
            .iter()
            .copied()
            .filter(|&w| !self.access.is_queried(w))
            .collect()
    }

    /// Picks up to `n` unburned neighbors of `u` to burn.
    fn ignite(&mut self, u: NodeId, n: usize) {
        let candidates = self.unburned_neighbors(u);
        let n = n.min(candidates.len());
        let picks = index::sample(&mut self.rng, candidates.len(), n);
        self.pending.extend(picks.into_iter().map(|i| candidates[i]));
    }

    fn restart_candidates(&self) -> Vec<NodeId> {
        self.access
            .visited()
            .iter()
            .copied()
            .filter(|&u| self.access.neighbors(u).iter().any(|&w| !self.access.is_queried(w)))
            .collect()
    }
}

impl Crawler for ForestFireCrawler<'_> {
    fn method(&self) -> Method {
        Method::Ff
    }

    fn advance(&mut self, max_unique_queries: usize) {
        self.access.raise_budget(max_unique_queries);
        if !self.started {
            if self.access.query(self.seed).is_err() {
                return;
            }
            self.started = true;
            self.front.push_back(self.seed);
        }
        loop {
            while let Some(&w) = self.pending.front() {
                match self.access.query(w) {
                    Ok(true) => self.front.push_back(w),
                    Ok(false) => {}
                    Err(_) => return,
                }
                self.pending.pop_front();
            }
            if self.access.exhausted() {
                return;
            }
            if let Some(u) = self.front.pop_front() {
                let n = self.burn_count.sample(&mut self.rng) as usize;
                self.ignite(u, n);
            } else {
                let candidates = self.restart_candidates();
                if candidates.is_empty() {
                    return;
                }
                let u = candidates[self.rng.random_range(0..candidates.len())];
                let n = (self.burn_count.sample(&mut self.rng) as usize).max(1);
                self.ignite(u, n);
            }
        }
    }

    fn access(&self) -> &CrawlAccess<'_> {
        &self.access
    }
}
