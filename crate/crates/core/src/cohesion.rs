//! k-core and k-truss decompositions and the node sets / count features built on them.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A cohesion property used to rank nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Core,
    Truss,
}

impl Property {
    /// Smallest meaningful `k` for this property.
    pub fn min_k(self) -> usize {
        match self {
            Property::Core => 1,
            Property::Truss => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Property::Core => "core",
            Property::Truss => "truss",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "core" | "k-core" => Ok(Property::Core),
            "truss" | "k-truss" => Ok(Property::Truss),
            other => Err(Error::Argument(format!(
                "unknown cohesion property `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreDecomposition {
    pub core_number: Vec<usize>,
    pub k_max: usize,
}

impl CoreDecomposition {
    pub fn node_set(&self, k: usize) -> Vec<usize> {
        (0..self.core_number.len())
            .filter(|&v| self.core_number[v] >= k)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrussDecomposition {
    /// Aligned with `Graph::edges`.
    pub truss_number: Vec<usize>,
    pub k_max: usize,
}

impl TrussDecomposition {
    /// Largest truss number over the edges incident to each node; 0 when isolated.
    pub fn node_levels(&self, g: &Graph) -> Vec<usize> {
        let mut level = vec![0; g.node_count];
        for (&(u, v), &t) in g.edges.iter().zip(&self.truss_number) {
            level[u] = level[u].max(t);
            level[v] = level[v].max(t);
        }
        level
    }
}

/// Batagelj–Zaversnik bucket peeling, O(n + m).
pub fn core_numbers(g: &Graph) -> CoreDecomposition {
    let n = g.node_count;
    let adj = g.neighbors();
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);

    // bin[d] = start of degree-d block in `vert`
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let c = *b;
        *b = start;
        start += c;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;

    for i in 0..n {
        let v = vert[i];
        for &u in &adj[v] {
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    vert.swap(pu, pw);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    let k_max = deg.iter().copied().max().unwrap_or(0);
    CoreDecomposition {
        core_number: deg,
        k_max,
    }
}

/// Support peeling: repeatedly remove the edge of minimum triangle support,
/// ties broken by ascending `(u, v)`.
pub fn truss_numbers(g: &Graph) -> Result<TrussDecomposition> {
    if g.edges.is_empty() {
        return Err(Error::Empty(
            "truss decomposition needs at least one edge".into(),
        ));
    }
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); g.node_count];
    for &(u, v) in &g.edges {
        adj[u].insert(v);
        adj[v].insert(u);
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let id: HashMap<(usize, usize), usize> = g.edge_index();

    let common = |adj: &[HashSet<usize>], u: usize, v: usize| -> Vec<usize> {
        let (small, large) = if adj[u].len() <= adj[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        adj[small]
            .iter()
            .copied()
            .filter(|w| adj[large].contains(w))
            .collect()
    };

    let mut support = vec![0usize; g.edges.len()];
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        support[e] = common(&adj, u, v).len();
    }
    let mut queue: BTreeSet<(usize, (usize, usize))> = g
        .edges
        .iter()
        .enumerate()
        .map(|(e, &(u, v))| (support[e], key(u, v)))
        .collect();

    let mut truss = vec![0usize; g.edges.len()];
    let mut k = 2;
    while let Some((sup, (u, v))) = queue.pop_first() {
        k = k.max(sup + 2);
        truss[id[&(u, v)]] = k;
        for w in common(&adj, u, v) {
            for other in [key(u, w), key(v, w)] {
                let oe = id[&other];
                queue.remove(&(support[oe], other));
                support[oe] -= 1;
                queue.insert((support[oe], other));
            }
        }
        adj[u].remove(&v);
        adj[v].remove(&u);
    }
    let k_max = truss.iter().copied().max().unwrap_or(2);
    Ok(TrussDecomposition {
        truss_number: truss,
        k_max,
    })
}

/// Per-node cohesion level and the graph's main order for `property`.
///
/// A node belongs to the `k`-cohesive node set iff its level is `>= k`. For
/// truss the level is the largest truss number among incident edges. Edgeless
/// graphs report all-zero levels and `k_max = 0` for both properties.
pub fn node_levels(g: &Graph, property: Property) -> (Vec<usize>, usize) {
    match property {
        Property::Core => {
            let d = core_numbers(g);
            (d.core_number, d.k_max)
        }
        Property::Truss => match truss_numbers(g) {
            Ok(t) => (t.node_levels(g), t.k_max),
            Err(_) => (vec![0; g.node_count], 0),
        },
    }
}

/// Nodes of the `k`-core, or endpoints of edges of the `k`-truss. Ascending.
pub fn cohesive_node_set(g: &Graph, property: Property, k: usize) -> Result<Vec<usize>> {
    if k < property.min_k() {
        return Err(Error::Argument(format!(
            "k = {k} is below the minimum {} for {property}",
            property.min_k()
        )));
    }
    let (level, _) = node_levels(g, property);
    Ok((0..g.node_count).filter(|&v| level[v] >= k).collect())
}

/// Node counts of the `i`-cohesive subgraphs: `i` in `1..=k` for core,
/// `2..=k+1` for truss, core block first. Duplicate properties are ignored.
pub fn cohesion_feature_vector(g: &Graph, k: usize, properties: &[Property]) -> Vec<f64> {
    let props: BTreeSet<Property> = properties.iter().copied().collect();
    let mut out = Vec::with_capacity(k * props.len());
    for p in props {
        let (level, _) = node_levels(g, p);
        let first = p.min_k();
        for i in first..first + k {
            out.push(level.iter().filter(|&&l| l >= i).count() as f64);
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Naive repeated-deletion decompositions, independent of the peeling code.
    use crate::graph::Graph;

    pub fn core_numbers(g: &Graph) -> Vec<usize> {
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
            let mut any = false;
            for v in 0..n {
                if alive[v] {
                    core[v] = k;
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
        core
    }

    pub fn truss_numbers(g: &Graph) -> Vec<usize> {
        let m = g.edges.len();
        let mut truss = vec![2; m];
        let has = |alive: &[bool], a: usize, b: usize| {
            g.edges
                .iter()
                .zip(alive)
                .any(|(&(x, y), &al)| al && ((x == a && y == b) || (x == b && y == a)))
        };
        for k in 3.. {
            let mut alive = vec![true; m];
            loop {
                let mut changed = false;
                for e in 0..m {
                    if !alive[e] {
                        continue;
                    }
                    let (u, v) = g.edges[e];
                    let tri = (0..g.node_count)
                        .filter(|&w| w != u && w != v && has(&alive, u, w) && has(&alive, v, w))
                        .count();
                    if tri + 2 < k {
                        alive[e] = false;
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
            for e in 0..m {
                if alive[e] {
                    truss[e] = k;
                }
            }
        }
        truss
    }
}
