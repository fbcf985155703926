//! Shared generators and exhaustive oracles for the integration tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use ksep::graph::{Graph, NodeId};
use ksep::solution::l_max;

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (0..n - 1)
        .map(|i| (i as NodeId, (i + 1) as NodeId, 1))
        .collect();
    Graph::from_edges(n, &edges, None).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    let mut edges: Vec<_> = (0..n - 1)
        .map(|i| (i as NodeId, (i + 1) as NodeId, 1))
        .collect();
    edges.push(((n - 1) as NodeId, 0, 1));
    Graph::from_edges(n, &edges, None).unwrap()
}

pub fn grid(rows: usize, cols: usize) -> Graph {
    let id = |r: usize, c: usize| (r * cols + c) as NodeId;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1), 1));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c), 1));
            }
        }
    }
    Graph::from_edges(rows * cols, &edges, None).unwrap()
}

/// Random connected graph: a random spanning tree plus `extra` random edges.
pub fn random_connected<R: Rng>(n: usize, extra: usize, weighted: bool, rng: &mut R) -> Graph {
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    order.shuffle(rng);
    let mut edges = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (order[i].min(order[j]), order[i].max(order[j]));
        edges.insert((a, b));
    }
    let mut attempts = 0;
    while edges.len() < n - 1 + extra && attempts < 20 * extra + 100 {
        attempts += 1;
        let a = rng.gen_range(0..n) as NodeId;
        let b = rng.gen_range(0..n) as NodeId;
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<_> = edges
        .into_iter()
        .map(|(a, b)| (a, b, if weighted { rng.gen_range(1..=4) } else { 1 }))
        .collect();
    let node_weights = if weighted {
        Some((0..n).map(|_| rng.gen_range(1..=3)).collect())
    } else {
        None
    };
    Graph::from_edges(n, &edges, node_weights).unwrap()
}

/// Disjoint union of 2–3 random connected components.
pub fn multi_component<R: Rng>(total_n: usize, components: usize, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    let mut offset = 0usize;
    let base = total_n / components;
    for c in 0..components {
        let n = if c + 1 == components {
            total_n - offset
        } else {
            base
        };
        let part = random_connected(n, n / 2, false, rng);
        for (u, v, w) in part.edges() {
            edges.push((u + offset as NodeId, v + offset as NodeId, w));
        }
        offset += n;
    }
    Graph::from_edges(total_n, &edges, None).unwrap()
}

/// Random tree on n nodes.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Graph {
    random_connected(n, 0, false, rng)
}

/// Clusters of random graphs joined by sparse random bridge edges.
pub fn clustered<R: Rng>(
    clusters: usize,
    cluster_n: usize,
    intra_deg: usize,
    bridges: usize,
    rng: &mut R,
) -> Graph {
    let n = clusters * cluster_n;
    let mut edges = Vec::new();
    for c in 0..clusters {
        let base = c * cluster_n;
        // spanning path plus random intra-cluster edges
        for i in 1..cluster_n {
            edges.push(((base + i - 1) as NodeId, (base + i) as NodeId, 1));
        }
        for _ in 0..cluster_n * intra_deg {
            let u = base + rng.gen_range(0..cluster_n);
            let v = base + rng.gen_range(0..cluster_n);
            if u != v {
                edges.push((u.min(v) as NodeId, u.max(v) as NodeId, 1));
            }
        }
    }
    for _ in 0..bridges {
        let c1 = rng.gen_range(0..clusters);
        let c2 = rng.gen_range(0..clusters);
        if c1 == c2 {
            continue;
        }
        let u = c1 * cluster_n + rng.gen_range(0..cluster_n);
        let v = c2 * cluster_n + rng.gen_range(0..cluster_n);
        edges.push((u.min(v) as NodeId, u.max(v) as NodeId, 1));
    }
    edges.sort_unstable();
    edges.dedup();
    Graph::from_edges(n, &edges, None).unwrap()
}

fn components_minus(g: &Graph, removed: u32) -> Vec<u64> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if seen[s] || removed >> s & 1 == 1 {
            continue;
        }
        let mut weight = 0u64;
        let mut stack = vec![s as NodeId];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            weight += g.node_weight(v);
            for (u, _) in g.neighbors(v) {
                if !seen[u as usize] && removed >> u & 1 == 0 {
                    seen[u as usize] = true;
                    stack.push(u);
                }
            }
        }
        comps.push(weight);
    }
    comps
}

fn pack(weights: &[u64], bins: &mut [u64], i: usize, cap: f64) -> bool {
    if i == weights.len() {
        return true;
    }
    let mut tried = std::collections::BTreeSet::new();
    for b in 0..bins.len() {
        if !tried.insert(bins[b]) {
            continue; // identical bin load already attempted
        }
        if (bins[b] + weights[i]) as f64 <= cap {
            bins[b] += weights[i];
            if pack(weights, bins, i + 1, cap) {
                return true;
            }
            bins[b] -= weights[i];
        }
    }
    false
}

/// Exhaustive minimum-weight balanced k-way separator for graphs with
/// n ≤ 20: every node subset is tried as the separator, and the remaining
/// components are bin-packed into k blocks of capacity L_max.
pub fn oracle_min_separator(g: &Graph, k: u32, epsilon: f64) -> Option<u64> {
    let n = g.n();
    assert!(n <= 20, "oracle limited to tiny graphs");
    let cap = l_max(g.total_node_weight(), k, epsilon);
    let mut best: Option<u64> = None;
    for mask in 0u32..1 << n {
        let weight: u64 = (0..n)
            .filter(|&v| mask >> v & 1 == 1)
            .map(|v| g.node_weight(v as NodeId))
            .sum();
        if best.is_some_and(|b| weight >= b) {
            continue;
        }
        let mut comps = components_minus(g, mask);
        if comps.iter().any(|&c| c as f64 > cap) {
            continue;
        }
        comps.sort_unstable_by(|a, b| b.cmp(a));
        let feasible = comps.len() <= k as usize
            || pack(&comps, &mut vec![0u64; k as usize], 0, cap);
        if feasible {
            best = Some(weight);
        }
    }
    best
}

/// Exhaustive minimum-weight node set whose removal disconnects every node
/// of `sources` from every node of `sinks` (removed nodes may include
/// endpoints).
pub fn oracle_min_disconnect(g: &Graph, sources: &[NodeId], sinks: &[NodeId]) -> u64 {
    let n = g.n();
    assert!(n <= 16);
    let mut best = u64::MAX;
    for mask in 0u32..1 << n {
        let weight: u64 = (0..n)
            .filter(|&v| mask >> v & 1 == 1)
            .map(|v| g.node_weight(v as NodeId))
            .sum();
        if weight >= best {
            continue;
        }
        // BFS from surviving sources through surviving nodes
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        for &s in sources {
            if mask >> s & 1 == 0 && !seen[s as usize] {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        let mut hit = false;
        while let Some(v) = stack.pop() {
            if sinks.contains(&v) {
                hit = true;
                break;
            }
            for (u, _) in g.neighbors(v) {
                if mask >> u & 1 == 0 && !seen[u as usize] {
                    seen[u as usize] = true;
                    stack.push(u);
                }
            }
        }
        if !hit && sinks.iter().all(|&t| mask >> t & 1 == 1 || !seen[t as usize]) {
            best = weight;
        }
    }
    best
}

/// Exhaustive minimum-weight vertex cover of the given edge list.
pub fn oracle_min_cover(g: &Graph, edges: &[(NodeId, NodeId)]) -> u64 {
    let mut nodes: Vec<NodeId> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    assert!(nodes.len() <= 16);
    let mut best = u64::MAX;
    for mask in 0u32..1 << nodes.len() {
        let chosen: Vec<NodeId> = (0..nodes.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| nodes[i])
            .collect();
        if edges
            .iter()
            .all(|&(u, v)| chosen.contains(&u) || chosen.contains(&v))
        {
            let weight: u64 = chosen.iter().map(|&v| g.node_weight(v)).sum();
            best = best.min(weight);
        }
    }
    best
}

/// Brute-force maximum-weight matching over an explicit edge list.
pub fn oracle_max_matching(edges: &[(NodeId, NodeId, u64)]) -> u64 {
    assert!(edges.len() <= 16);
    let mut best = 0u64;
    for mask in 0u32..1 << edges.len() {
        let chosen: Vec<_> = (0..edges.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| edges[i])
            .collect();
        let mut used = std::collections::BTreeSet::new();
        if chosen
            .iter()
            .all(|&(u, v, _)| used.insert(u) && used.insert(v))
        {
            best = best.max(chosen.iter().map(|&(_, _, w)| w).sum());
        }
    }
    best
}
