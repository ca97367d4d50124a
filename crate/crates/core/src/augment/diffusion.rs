use nalgebra::DMatrix;

use super::{ImportanceWeights, WeightMode};
use crate::cohesion::{node_levels, Property};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Raw membership counts over every cohesion level (`1..=k_max` for core,
/// `2..=k_max` for truss). `normalizer_used` records the graph mean.
pub fn vertex_importance_det(g: &Graph, property: Property) -> ImportanceWeights {
    let (level, _) = node_levels(g, property);
    let lo = property.min_k();
    let values: Vec<f64> = level
        .iter()
        .map(|&l| if l >= lo { (l - lo + 1) as f64 } else { 0.0 })
        .collect();
    let mean = if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    };
    ImportanceWeights {
        mode: WeightMode::Deterministic,
        values,
        normalizer_used: mean,
    }
}

/// `w'(v) = eta * w(v) / mean(w) + (1 - eta)`; the result has mean 1.
pub fn mix_importance(w_raw: &ImportanceWeights, eta: f64) -> Result<ImportanceWeights> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Argument(format!("eta = {eta} outside [0, 1]")));
    }
    if w_raw.mode != WeightMode::Deterministic {
        return Err(Error::Argument(
            "mixing needs deterministic-mode weights".into(),
        ));
    }
    let mean = w_raw.normalizer_used;
    if !(mean > 0.0) {
        return Err(Error::Empty("importance weights are all zero".into()));
    }
    Ok(ImportanceWeights {
        mode: WeightMode::Deterministic,
        values: w_raw
            .values
            .iter()
            .map(|w| eta * w / mean + (1.0 - eta))
            .collect(),
        normalizer_used: mean,
    })
}

/// Scales each edge by the mean mixed importance of its endpoints. Topology
/// and features are unchanged.
pub fn reweight_edges(g: &Graph, w_raw: &ImportanceWeights, eta: f64) -> Result<Graph> {
    if g.edges.is_empty() {
        return Err(Error::Empty("reweighting needs at least one edge".into()));
    }
    if w_raw.values.len() != g.node_count {
        return Err(Error::Argument(format!(
            "{} weights for {} nodes",
            w_raw.values.len(),
            g.node_count
        )));
    }
    let mixed = mix_importance(w_raw, eta)?;
    let w = &mixed.values;
    let edge_weights = g
        .edges
        .iter()
        .zip(&g.edge_weights)
        .map(|(&(u, v), &we)| 0.5 * (w[u] + w[v]) * we)
        .collect();
    Ok(Graph {
        edge_weights,
        ..g.clone()
    })
}

/// Symmetric normalization `D^{-1/2} A D^{-1/2}` of the weighted adjacency.
pub fn transition_matrix(g: &Graph) -> Result<DMatrix<f64>> {
    let deg = g.weighted_degrees();
    if let Some(v) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Argument(format!(
            "node {v} has zero weighted degree"
        )));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = g.node_count;
    let mut t = DMatrix::zeros(n, n);
    for (&(u, v), &w) in g.edges.iter().zip(&g.edge_weights) {
        let x = w * inv_sqrt[u] * inv_sqrt[v];
        t[(u, v)] += x;
        t[(v, u)] += x;
    }
    Ok(t)
}

/// Dense personalized-PageRank diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    pub matrix: DMatrix<f64>,
    pub alpha: f64,
}

impl DiffusionMatrix {
    /// `max |((I - (1 - alpha) T) S - alpha I)_{ij}|` against `g`'s transition matrix.
    pub fn residual(&self, g: &Graph) -> Result<f64> {
        let n = self.matrix.nrows();
        let t = transition_matrix(g)?;
        let m = DMatrix::identity(n, n) - t * (1.0 - self.alpha);
        let r = m * &self.matrix - DMatrix::identity(n, n) * self.alpha;
        Ok(r.amax())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// `S = alpha (I - (1 - alpha) D^{-1/2} A D^{-1/2})^{-1}` via a dense
/// Cholesky solve. The system matrix is symmetric positive definite for
/// `alpha > 0` since the spectrum of the normalized adjacency lies in `[-1, 1]`.
pub fn ppr_diffusion(g: &Graph, alpha: f64) -> Result<DiffusionMatrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Argument(format!("alpha = {alpha} outside (0, 1]")));
    }
    let n = g.node_count;
    let t = transition_matrix(g)?;
    let system = DMatrix::identity(n, n) - t * (1.0 - alpha);
    let rhs = DMatrix::identity(n, n) * alpha;
    let mut s = match system.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Argument("diffusion system is singular".into()))?,
    };
    // symmetrize away round-off
    let st = s.transpose();
    s += st;
    s *= 0.5;
    Ok(DiffusionMatrix { matrix: s, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn det_weights() {
        let w = vertex_importance_det(&complete(4), Property::Core);
        assert_eq!(w.values, vec![3.0; 4]);
        let w = vertex_importance_det(&triangle_pendant(), Property::Core);
        assert_eq!(w.values, vec![2.0, 2.0, 2.0, 1.0]);
        assert_eq!(w.normalizer_used, 1.75);
        assert_eq!(
            vertex_importance_det(&path(3), Property::Core).values,
            vec![1.0; 3]
        );
        // truss: K4 edges are 4-truss, counted over k = 2, 3, 4
        assert_eq!(
            vertex_importance_det(&complete(4), Property::Truss).values,
            vec![3.0; 4]
        );
    }

    #[test]
    fn reweight_examples() {
        let g = triangle_pendant();
        let w = vertex_importance_det(&g, Property::Core);
        assert_eq!(reweight_edges(&g, &w, 0.0).unwrap(), g);
        let r = reweight_edges(&g, &w, 1.0).unwrap();
        let idx = g.edge_index();
        assert!((r.edge_weights[idx[&(0, 1)]] - 8.0 / 7.0).abs() < 1e-12);
        assert!((r.edge_weights[idx[&(0, 3)]] - 6.0 / 7.0).abs() < 1e-12);
        let k4 = complete(4);
        let w = vertex_importance_det(&k4, Property::Core);
        for eta in [0.0, 0.3, 1.0] {
            assert!(reweight_edges(&k4, &w, eta)
                .unwrap()
                .edge_weights
                .iter()
                .all(|&x| (x - 1.0).abs() < 1e-15));
        }
        assert!(matches!(
            reweight_edges(&g, &w, 1.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn mixed_mean_is_one() {
        let w = vertex_importance_det(&bowtie(), Property::Truss);
        for eta in [0.0, 0.25, 0.5, 1.0] {
            let m = mix_importance(&w, eta).unwrap();
            let mean = m.values.iter().sum::<f64>() / m.values.len() as f64;
            assert!((mean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_one_is_identity() {
        let d = ppr_diffusion(&bowtie(), 1.0).unwrap();
        assert!((d.matrix.clone() - DMatrix::identity(5, 5)).amax() <= 1e-12);
    }

    #[test]
    fn two_node_closed_form() {
        let g = path(2);
        let d = ppr_diffusion(&g, 0.5).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((d.matrix.clone() - want).amax() <= 1e-12);
        assert!(d.residual(&g).unwrap() < 1e-12);
    }

    #[test]
    fn isolated_node_and_bad_alpha() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        assert!(matches!(ppr_diffusion(&g, 0.5), Err(Error::Argument(_))));
        assert!(matches!(
            ppr_diffusion(&path(2), 0.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            ppr_diffusion(&path(2), 1.5),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn reweighting_raises_cohesive_diffusion() {
        let g = triangle_pendant();
        let w = vertex_importance_det(&g, Property::Core);
        let rw = reweight_edges(&g, &w, 1.0).unwrap();
        let plain = ppr_diffusion(&g, 0.2).unwrap();
        let cohesive = ppr_diffusion(&rw, 0.2).unwrap();
        assert!(cohesive.matrix[(0, 1)] > plain.matrix[(0, 1)]);
        assert!(cohesive.residual(&rw).unwrap() < 1e-10);
    }
}
