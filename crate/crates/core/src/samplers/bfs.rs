use std::collections::VecDeque;

use super::{check_seed, CrawlAccess, Crawler, Method};
use crate::error::Result;
use crate::graph::{AttributedGraph, NodeId};

/// Snowball sampling: FIFO expansion, neighbors enqueued in id order.
#[derive(Debug, Clone)]
pub struct BfsCrawler<'g> {
    access: CrawlAccess<'g>,
    queue: VecDeque<NodeId>,
    discovered: Vec<bool>,
}

impl<'g> BfsCrawler<'g> {
    pub fn new(g: &'g AttributedGraph, seed: NodeId) -> Result<Self> {
        check_seed(g, seed)?;
        let mut discovered = vec![false; g.node_count()];
        discovered[seed] = true;
        Ok(BfsCrawler {
            access: CrawlAccess::new(g),
            queue: VecDeque::from([seed]),
            discovered,
        })
    }
}

impl Crawler for BfsCrawler<'_> {
    fn method(&self) -> Method {
        Method::Bfs
    }

    fn advance(&mut self, max_unique_queries: usize) {
        self.access.raise_budget(max_unique_queries);
        while !self.access.exhausted() {
            let Some(u) = self.queue.pop_front() else { break };
            self.access.query(u).expect("budget checked above");
            for &w in self.access.neighbors(u) {
                if !self.discovered[w] {
                    self.discovered[w] = true;
                    self.queue.push_back(w);
                }
            }
        }
    }

    fn access(&self) -> &CrawlAccess<'_> {
        &self.access
    }
}
