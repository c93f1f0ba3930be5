//! Gradient routing toward the gateway.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GradientTable {
    pub gateway: usize,
    pub hops: Vec<usize>,
    pub next_hop: Vec<Option<usize>>,
}

/// Breadth-first hop counts from the gateway over the links accepted by
/// `usable`. Each node forwards to its lowest-id neighbour one hop closer.
pub fn build_gradient<F>(n: usize, gateway: usize, usable: F) -> Result<GradientTable, ConfigError>
where
    F: Fn(usize, usize) -> bool,
{
    let mut hops = vec![usize::MAX; n];
    hops[gateway] = 0;
    let mut queue = VecDeque::from([gateway]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if hops[v] == usize::MAX && usable(u, v) {
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if let Some(hole) = (0..n).find(|&v| hops[v] == usize::MAX) {
        return Err(ConfigError::RoutingHole(hole));
    }
    let next_hop = (0..n)
        .map(|v| {
            if v == gateway {
                None
            } else {
                (0..n).find(|&u| hops[u] + 1 == hops[v] && usable(u, v))
            }
        })
        .collect();
    Ok(GradientTable {
        gateway,
        hops,
        next_hop,
    })
}

impl GradientTable {
    pub fn gradient_route(&self, node: usize) -> Option<usize> {
        self.next_hop[node]
    }

    /// Nodes visited from `node` to the gateway, inclusive of both.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let mut p = vec![node];
        let mut cur = node;
        while let Some(nx) = self.next_hop[cur] {
            p.push(nx);
            cur = nx;
        }
        p
    }

    pub fn max_hop(&self) -> usize {
        self.hops.iter().copied().max().unwrap_or(0)
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.hops.len())
            .filter(|&c| self.next_hop[c] == Some(node))
            .collect()
    }
}
