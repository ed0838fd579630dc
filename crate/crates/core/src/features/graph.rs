use std::collections::VecDeque;

use crate::corpus::DepArc;
use crate::error::{Error, Result};

/// Undirected view of a dependency parse, used for hop distances.
#[derive(Debug, Clone)]
pub struct DepGraph {
    adjacency: Vec<Vec<usize>>,
}

impl DepGraph {
    /// Arcs whose endpoints fall outside `0..n_tokens` are ignored.
    pub fn new(n_tokens: usize, deps: &[DepArc]) -> Self {
        let mut adjacency = vec![Vec::new(); n_tokens];
        for arc in deps {
            let Some(head) = arc.head() else { continue };
            if arc.token_index < n_tokens && head < n_tokens && head != arc.token_index {
                adjacency[arc.token_index].push(head);
                adjacency[head].push(arc.token_index);
            }
        }
        DepGraph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    fn check(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::Feature(format!(
                "token index {index} is out of range for {} tokens",
                self.len()
            )))
        }
    }

    /// Hop counts from `source` to every token; `None` marks tokens in
    /// another tree.
    pub fn distances_from(&self, source: usize) -> Result<Vec<Option<usize>>> {
        self.check(source)?;
        let mut dist = vec![None; self.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(node) = queue.pop_front() {
            let next = dist[node].map(|d| d + 1);
            for &neighbour in &self.adjacency[node] {
                if dist[neighbour].is_none() {
                    dist[neighbour] = next;
                    queue.push_back(neighbour);
                }
            }
        }
        Ok(dist)
    }

    pub fn distance(&self, a: usize, b: usize) -> Result<Option<usize>> {
        self.check(b)?;
        Ok(self.distances_from(a)?[b])
    }
}

/// Shortest path length between two tokens in the undirected dependency
/// graph, or `None` when they are unreachable from each other.
pub fn parse_distance(a: usize, b: usize, deps: &[DepArc], n_tokens: usize) -> Result<Option<usize>> {
    DepGraph::new(n_tokens, deps).distance(a, b)
}
