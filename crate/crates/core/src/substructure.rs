//! Per-node clique counts on original graphs.
//!
//! Counts are computed once per dataset and reused for every augmented view:
//! a view's node `i` takes the row of the original node `kept[i]`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    #[default]
    Log1p,
    /// Each column divided by its maximum within the graph.
    MaxPerGraph,
}

impl Normalization {
    fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Log1p => "log1p",
            Normalization::MaxPerGraph => "max-per-graph",
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "log1p" => Ok(Normalization::Log1p),
            "max-per-graph" | "max" => Ok(Normalization::MaxPerGraph),
            other => Err(Error::Argument(format!("unknown normalization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubstructureSpec {
    pub clique_sizes: Vec<usize>,
    pub normalization: Normalization,
}

impl Default for SubstructureSpec {
    fn default() -> Self {
        SubstructureSpec {
            clique_sizes: vec![3, 4, 5],
            normalization: Normalization::Log1p,
        }
    }
}

impl SubstructureSpec {
    pub fn new(mut clique_sizes: Vec<usize>, normalization: Normalization) -> Result<Self> {
        clique_sizes.sort_unstable();
        clique_sizes.dedup();
        let spec = SubstructureSpec {
            clique_sizes,
            normalization,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clique_sizes.is_empty() {
            return Err(Error::Argument("clique size set is empty".into()));
        }
        if let Some(&k) = self.clique_sizes.iter().find(|&&k| k < 3) {
            return Err(Error::Argument(format!("clique size {k} < 3")));
        }
        if self.clique_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(
                "clique sizes must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.clique_sizes.len()
    }

    fn cache_key(&self) -> String {
        let sizes: Vec<String> = self.clique_sizes.iter().map(usize::to_string).collect();
        format!("c{}__{}", sizes.join("-"), self.normalization.as_str())
    }
}

/// Node-by-size matrix of clique counts (possibly normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct SubstructureFeatures {
    pub sizes: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl SubstructureFeatures {
    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    /// Rows of the original nodes that survived an augmentation.
    pub fn select(&self, kept: &[usize]) -> SubstructureFeatures {
        SubstructureFeatures {
            sizes: self.sizes.clone(),
            matrix: self.matrix.select_rows(kept.iter()),
        }
    }

    pub fn normalized(&self, how: Normalization) -> SubstructureFeatures {
        let mut m = self.matrix.clone();
        match how {
            Normalization::None => {}
            Normalization::Log1p => m.apply(|x| *x = x.ln_1p()),
            Normalization::MaxPerGraph => {
                for mut col in m.column_iter_mut() {
                    let max = col.iter().copied().fold(0.0, f64::max);
                    if max > 0.0 {
                        col /= max;
                    }
                }
            }
        }
        SubstructureFeatures {
            sizes: self.sizes.clone(),
            matrix: m,
        }
    }
}

/// Exact per-node counts of `k`-cliques for each `k` in `sizes`.
///
/// Cliques are enumerated once each by ordered backtracking: a partial clique
/// is only extended by common neighbors with a larger index than its last node.
pub fn count_cliques_per_node(g: &Graph, sizes: &[usize]) -> SubstructureFeatures {
    let max_k = sizes.iter().copied().max().unwrap_or(0);
    let adj = g.neighbors();
    let forward: Vec<Vec<usize>> = adj
        .iter()
        .enumerate()
        .map(|(v, ns)| ns.iter().copied().filter(|&u| u > v).collect())
        .collect();
    let mut counts = DMatrix::zeros(g.node_count, sizes.len());
    let col_of: Vec<Option<usize>> = (0..=max_k)
        .map(|k| sizes.iter().position(|&s| s == k))
        .collect();

    let mut stack = Vec::with_capacity(max_k);
    for v in 0..g.node_count {
        stack.push(v);
        extend(
            &forward,
            &forward[v],
            &mut stack,
            max_k,
            &col_of,
            &mut counts,
        );
        stack.pop();
    }
    SubstructureFeatures {
        sizes: sizes.to_vec(),
        matrix: counts,
    }
}

fn extend(
    forward: &[Vec<usize>],
    candidates: &[usize],
    stack: &mut Vec<usize>,
    max_k: usize,
    col_of: &[Option<usize>],
    counts: &mut DMatrix<f64>,
) {
    if let Some(Some(col)) = col_of.get(stack.len()) {
        for &v in stack.iter() {
            counts[(v, *col)] += 1.0;
        }
    }
    if stack.len() == max_k {
        return;
    }
    for (i, &u) in candidates.iter().enumerate() {
        // candidates are ascending, so the rest are all > u
        let next: Vec<usize> = intersect_sorted(&candidates[i + 1..], &forward[u]);
        stack.push(u);
        extend(forward, &next, stack, max_k, col_of, counts);
        stack.pop();
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Environment variable naming the default feature cache directory.
pub const CACHE_ENV: &str = "COHESION_GCL_CACHE";

pub fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

/// Normalized features for every graph of `ds`.
///
/// With `cache_dir`, results are read from / written to
/// `<dir>/<dataset>__c<sizes>__<normalization>.csv` with columns
/// `graph,node,c3,c4,...`. Writes go through a temporary file and a rename.
pub fn ogsn_features(
    ds: &GraphDataset,
    spec: &SubstructureSpec,
    cache_dir: Option<&Path>,
) -> Result<Vec<SubstructureFeatures>> {
    spec.validate()?;
    let cache_path =
        cache_dir.map(|d| d.join(format!("{}__{}.csv", sanitize(&ds.name), spec.cache_key())));
    if let Some(p) = &cache_path {
        if p.is_file() {
            if let Ok(cached) = read_cache(p, ds, spec) {
                return Ok(cached);
            }
        }
    }
    let feats: Vec<SubstructureFeatures> = ds
        .graphs
        .par_iter()
        .map(|g| count_cliques_per_node(g, &spec.clique_sizes).normalized(spec.normalization))
        .collect();
    if let Some(p) = &cache_path {
        write_cache(p, spec, &feats)?;
    }
    Ok(feats)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn header(spec: &SubstructureSpec) -> String {
    let mut h = String::from("graph,node");
    for k in &spec.clique_sizes {
        let _ = write!(h, ",c{k}");
    }
    h
}

pub fn features_to_csv(spec: &SubstructureSpec, feats: &[SubstructureFeatures]) -> String {
    let mut s = header(spec);
    s.push('\n');
    for (gi, f) in feats.iter().enumerate() {
        for (v, row) in f.matrix.row_iter().enumerate() {
            let _ = write!(s, "{gi},{v}");
            for x in row.iter() {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
    }
    s
}

fn write_cache(path: &Path, spec: &SubstructureSpec, feats: &[SubstructureFeatures]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, features_to_csv(spec, feats)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_cache(
    path: &Path,
    ds: &GraphDataset,
    spec: &SubstructureSpec,
) -> Result<Vec<SubstructureFeatures>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(header(spec).as_str()) {
        return Err(Error::Format("cache header mismatch".into()));
    }
    let mut mats: Vec<DMatrix<f64>> = ds
        .graphs
        .iter()
        .map(|g| DMatrix::from_element(g.node_count, spec.dim(), f64::NAN))
        .collect();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 2 + spec.dim() {
            return Err(Error::Format("cache row width".into()));
        }
        let bad = |e: String| Error::parse(path.display().to_string(), e);
        let gi: usize = cells[0]
            .parse()
            .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let v: usize = cells[1]
            .parse()
            .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let m = mats
            .get_mut(gi)
            .ok_or_else(|| Error::Format("cache graph index".into()))?;
        if v >= m.nrows() {
            return Err(Error::Format("cache node index".into()));
        }
        for (c, cell) in cells[2..].iter().enumerate() {
            m[(v, c)] = cell
                .parse()
                .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
        }
    }
    if mats.iter().any(|m| m.iter().any(|x| x.is_nan())) {
        return Err(Error::Format("cache is incomplete".into()));
    }
    Ok(mats
        .into_iter()
        .map(|matrix| SubstructureFeatures {
            sizes: spec.clique_sizes.clone(),
            matrix,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use proptest::prelude::*;

    /// Exhaustive subset check, independent of the backtracking.
    fn brute(g: &Graph, k: usize) -> Vec<f64> {
        let n = g.node_count;
        let adj = g.neighbors();
        let mut out = vec![0.0; n];
        let mut idx: Vec<usize> = (0..k).collect();
        if k > n {
            return out;
        }
        loop {
            let is_clique = idx.iter().enumerate().all(|(a, &u)| {
                idx[a + 1..]
                    .iter()
                    .all(|&v| adj[u].binary_search(&v).is_ok())
            });
            if is_clique {
                for &u in &idx {
                    out[u] += 1.0;
                }
            }
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] != i + n - k {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    fn col(f: &SubstructureFeatures, c: usize) -> Vec<f64> {
        f.matrix.column(c).iter().copied().collect()
    }

    #[test]
    fn k4_counts() {
        let f = count_cliques_per_node(&complete(4), &[3, 4]);
        assert_eq!(col(&f, 0), vec![3.0; 4]);
        assert_eq!(col(&f, 1), vec![1.0; 4]);
    }

    #[test]
    fn triangle_counts() {
        assert_eq!(
            col(&count_cliques_per_node(&complete(3), &[3]), 0),
            vec![1.0; 3]
        );
    }

    #[test]
    fn bowtie_counts() {
        let g = bowtie();
        assert_eq!(brute(&g, 3), vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        let f = count_cliques_per_node(&g, &[3, 4]);
        assert_eq!(col(&f, 0), brute(&g, 3));
        assert_eq!(col(&f, 1), vec![0.0; 5]);
    }

    #[test]
    fn normalizations() {
        let ds = GraphDataset::from_raw_labels("k4", vec![complete(4)], &[0]).unwrap();
        let spec = SubstructureSpec::new(vec![3], Normalization::Log1p).unwrap();
        let f = ogsn_features(&ds, &spec, None).unwrap();
        assert!(f[0].matrix.iter().all(|&x| (x - 4f64.ln()).abs() < 1e-15));
        let spec = SubstructureSpec::new(vec![3], Normalization::MaxPerGraph).unwrap();
        assert!(ogsn_features(&ds, &spec, None).unwrap()[0]
            .matrix
            .iter()
            .all(|&x| x == 1.0));
    }

    #[test]
    fn two_graph_fixture() {
        let ds = GraphDataset::from_raw_labels("fx", vec![complete(3), path(3)], &[1, 2]).unwrap();
        let spec = SubstructureSpec::new(vec![3], Normalization::None).unwrap();
        let f = ogsn_features(&ds, &spec, None).unwrap();
        assert_eq!(col(&f[0], 0), vec![1.0; 3]);
        assert_eq!(col(&f[1], 0), vec![0.0; 3]);
    }

    #[test]
    fn spec_validation() {
        assert!(SubstructureSpec::new(vec![], Normalization::None).is_err());
        assert!(SubstructureSpec::new(vec![2, 3], Normalization::None).is_err());
        assert_eq!(
            SubstructureSpec::new(vec![5, 3, 3], Normalization::None)
                .unwrap()
                .clique_sizes,
            vec![3, 5]
        );
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds =
            GraphDataset::from_raw_labels("a/b", vec![complete(5), bowtie()], &[0, 1]).unwrap();
        let spec = SubstructureSpec::default();
        let first = ogsn_features(&ds, &spec, Some(dir.path())).unwrap();
        let file = dir.path().join("a_b__c3-4-5__log1p.csv");
        assert!(file.is_file());
        let text = fs::read_to_string(&file).unwrap();
        assert!(text.starts_with("graph,node,c3,c4,c5\n"));
        let second = ogsn_features(&ds, &spec, Some(dir.path())).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn select_maps_rows() {
        let f = count_cliques_per_node(&bowtie(), &[3]);
        let s = f.select(&[1, 2]);
        assert_eq!(col(&s, 0), vec![1.0, 2.0]);
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..=10).prop_flat_map(|n| {
            proptest::collection::vec(prop::bool::weighted(0.55), n * (n - 1) / 2).prop_map(
                move |bits| {
                    let mut e = Vec::new();
                    let mut i = 0;
                    for u in 0..n {
                        for v in u + 1..n {
                            if bits[i] {
                                e.push((u, v));
                            }
                            i += 1;
                        }
                    }
                    Graph::new(n, e).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(g in arb_graph()) {
            let f = count_cliques_per_node(&g, &[3, 4, 5]);
            for (c, k) in [3, 4, 5].into_iter().enumerate() {
                prop_assert_eq!(col(&f, c), brute(&g, k));
            }
        }

        #[test]
        fn handshake_and_relabeling(g in arb_graph(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let f = count_cliques_per_node(&g, &[3, 4]);
            // each k-clique is counted once per member
            for (c, k) in [3usize, 4].into_iter().enumerate() {
                let sum: f64 = f.matrix.column(c).sum();
                prop_assert_eq!(sum % k as f64, 0.0);
            }
            let mut perm: Vec<usize> = (0..g.node_count).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let fp = count_cliques_per_node(&g.permuted(&perm), &[3, 4]);
            for v in 0..g.node_count {
                prop_assert_eq!(f.matrix.row(v), fp.matrix.row(perm[v]));
            }
        }
    }
}
