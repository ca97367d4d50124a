//! Brute-force oracles and graph generators shared by integration tests.

#![allow(dead_code)]

use std::io::Write;

use cohesion_gcl::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to the process stderr so the line shows up even when the
/// test harness captures output.
pub fn report(line: &str) {
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{line}");
}

pub fn verdict(criterion: u32, ok: bool, detail: &str) {
    report(&format!(
        "criterion {criterion}: {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    ));
}

/// Core numbers by repeated deletion: for each `k`, strip nodes of degree
/// `< k` until none remain; survivors have core number `>= k`.
pub fn naive_core(g: &Graph) -> Vec<usize> {
    let n = g.node_count;
    let mut core = vec![0; n];
    for k in 1..=n {
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if !alive[v] {
                    continue;
                }
                let d = g
                    .edges
                    .iter()
                    .filter(|&&(a, b)| (a == v && alive[b]) || (b == v && alive[a]))
                    .count();
                if d < k {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !alive.iter().any(|&a| a) {
            break;
        }
        for v in 0..n {
            if alive[v] {
                core[v] = k;
            }
        }
    }
    core
}

/// Truss numbers by repeated deletion: for each `k >= 2`, strip edges in
/// fewer than `k - 2` triangles of the remaining graph.
pub fn naive_truss(g: &Graph) -> Vec<usize> {
    let n = g.node_count;
    let m = g.edges.len();
    let mut truss = vec![2; m];
    let mut adj = vec![vec![false; n]; n];
    for k in 3..=n + 1 {
        let mut alive = vec![true; m];
        loop {
            for row in adj.iter_mut() {
                row.fill(false);
            }
            for (i, &(u, v)) in g.edges.iter().enumerate() {
                if alive[i] {
                    adj[u][v] = true;
                    adj[v][u] = true;
                }
            }
            let mut changed = false;
            for (i, &(u, v)) in g.edges.iter().enumerate() {
                if alive[i] && (0..n).filter(|&w| adj[u][w] && adj[v][w]).count() < k - 2 {
                    alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !alive.iter().any(|&a| a) {
            break;
        }
        for i in 0..m {
            if alive[i] {
                truss[i] = k;
            }
        }
    }
    truss
}

/// Cliques of size `k` containing each node, by checking every `k`-subset.
pub fn brute_cliques(g: &Graph, k: usize) -> Vec<u64> {
    let n = g.node_count;
    let mut adj = vec![0u32; n];
    for &(u, v) in &g.edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    let mut counts = vec![0u64; n];
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let clique = (0..n)
            .filter(|&v| mask >> v & 1 == 1)
            .all(|v| (adj[v] | 1 << v) & mask == mask);
        if clique {
            for (v, c) in counts.iter_mut().enumerate() {
                if mask >> v & 1 == 1 {
                    *c += 1;
                }
            }
        }
    }
    counts
}

pub fn gnp(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

pub fn is_connected(g: &Graph) -> bool {
    if g.node_count == 0 {
        return true;
    }
    let nb = g.neighbors();
    let mut seen = vec![false; g.node_count];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &nb[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Connected random graph on `n` nodes: a random spanning tree plus extra
/// edges with probability `p`.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = std::collections::BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.insert((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
