//! Loader and writer for the TU graph-classification text format.
//!
//! A dataset `NAME` in directory `dir` consists of
//!
//! * `NAME_A.txt`: one `u, v` pair per line, 1-based global node ids,
//! * `NAME_graph_indicator.txt`: line `i` holds the 1-based graph id of node `i`,
//! * `NAME_graph_labels.txt`: one integer class label per graph,
//! * `NAME_node_labels.txt` (optional): one integer label per node.
//!
//! Edges may be listed once or in both directions; duplicates are merged and
//! self-loops are dropped.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};

fn tu_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_required(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::Format(format!("missing file {}", path.display())));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_int_column(text: &str, path: &Path) -> Result<Vec<i64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<i64>().map_err(|e| {
                Error::parse(
                    format!("{}:{}", path.display(), i + 1),
                    format!("`{}`: {e}", l.trim()),
                )
            })
        })
        .collect()
}

pub fn load_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let a_path = tu_path(dir, name, "A");
    let ind_path = tu_path(dir, name, "graph_indicator");
    let gl_path = tu_path(dir, name, "graph_labels");
    let nl_path = tu_path(dir, name, "node_labels");

    let a_text = read_required(&a_path)?;
    let indicator = parse_int_column(&read_required(&ind_path)?, &ind_path)?;
    let graph_labels = parse_int_column(&read_required(&gl_path)?, &gl_path)?;
    let node_labels = if nl_path.is_file() {
        let text = fs::read_to_string(&nl_path).map_err(|e| Error::io(&nl_path, e))?;
        Some(parse_int_column(&text, &nl_path)?)
    } else {
        None
    };

    let graph_count = graph_labels.len();
    // Global node -> (graph, local index).
    let mut local = Vec::with_capacity(indicator.len());
    let mut sizes = vec![0usize; graph_count];
    for (node, &gid) in indicator.iter().enumerate() {
        if gid < 1 || gid as usize > graph_count {
            return Err(Error::Format(format!(
                "node {} assigned to graph {gid}, but only {graph_count} graph labels exist",
                node + 1
            )));
        }
        let gi = gid as usize - 1;
        local.push((gi, sizes[gi]));
        sizes[gi] += 1;
    }

    let mut edge_sets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_count];
    let mut seen: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); graph_count];
    for (lineno, line) in a_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", a_path.display(), lineno + 1);
        let mut parts = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Format(format!("{}: expected `u, v`", loc())));
        };
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| Error::parse(loc(), format!("`{t}`: {e}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        for x in [u, v] {
            if x < 1 || x > local.len() {
                return Err(Error::Format(format!(
                    "{}: node {x} has no graph indicator entry",
                    loc()
                )));
            }
        }
        let (gu, lu) = local[u - 1];
        let (gv, lv) = local[v - 1];
        if gu != gv {
            return Err(Error::Format(format!(
                "{}: edge ({u},{v}) crosses graphs {} and {}",
                loc(),
                gu + 1,
                gv + 1
            )));
        }
        if lu == lv {
            continue;
        }
        let key = (lu.min(lv), lu.max(lv));
        if seen[gu].insert(key) {
            edge_sets[gu].push(key);
        }
    }

    let features: Option<Vec<DMatrix<f64>>> = match &node_labels {
        None => None,
        Some(nl) => {
            if nl.len() != indicator.len() {
                return Err(Error::Format(format!(
                    "{} node labels for {} nodes",
                    nl.len(),
                    indicator.len()
                )));
            }
            let mut distinct: Vec<i64> = nl.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let mut mats: Vec<DMatrix<f64>> = sizes
                .iter()
                .map(|&n| DMatrix::zeros(n, distinct.len()))
                .collect();
            for (node, &lab) in nl.iter().enumerate() {
                let (gi, li) = local[node];
                let col = distinct.binary_search(&lab).expect("present");
                mats[gi][(li, col)] = 1.0;
            }
            Some(mats)
        }
    };

    let mut graphs = Vec::with_capacity(graph_count);
    for (gi, edges) in edge_sets.into_iter().enumerate() {
        let weights = vec![1.0; edges.len()];
        let mut g = Graph {
            node_count: sizes[gi],
            edges,
            edge_weights: weights,
            node_features: None,
        };
        if let Some(f) = &features {
            g.node_features = Some(f[gi].clone());
        }
        graphs.push(g);
    }
    GraphDataset::from_raw_labels(name, graphs, &graph_labels)
}

/// Writes `ds` in TU format. Edges are listed in both directions. Node labels
/// are written when every graph carries one-hot feature rows.
pub fn write_tu_dataset(ds: &GraphDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &ds.name;
    let mut a = String::new();
    let mut ind = String::new();
    let mut nl = String::new();
    let one_hot = ds.graphs.iter().all(|g| {
        g.node_features.as_ref().is_some_and(|f| {
            f.row_iter().all(|r| {
                r.iter().filter(|&&x| x == 1.0).count() == 1
                    && r.iter().all(|&x| x == 0.0 || x == 1.0)
            })
        })
    });
    let mut offset = 0usize;
    for (gi, g) in ds.graphs.iter().enumerate() {
        for _ in 0..g.node_count {
            ind.push_str(&format!("{}\n", gi + 1));
        }
        for &(u, v) in &g.edges {
            a.push_str(&format!("{}, {}\n", u + offset + 1, v + offset + 1));
            a.push_str(&format!("{}, {}\n", v + offset + 1, u + offset + 1));
        }
        if one_hot {
            let f = g.node_features.as_ref().expect("checked");
            for r in f.row_iter() {
                let col = r.iter().position(|&x| x == 1.0).expect("checked");
                nl.push_str(&format!("{col}\n"));
            }
        }
        offset += g.node_count;
    }
    let labels: String = ds
        .labels
        .iter()
        .map(|&l| format!("{}\n", ds.label_map.get(l).copied().unwrap_or(l as i64)))
        .collect();
    let write = |suffix: &str, body: &str| {
        let p = tu_path(dir, name, suffix);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("A", &a)?;
    write("graph_indicator", &ind)?;
    write("graph_labels", &labels)?;
    if one_hot {
        write("node_labels", &nl)?;
    }
    Ok(())
}
