use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense layer `y = x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: DMatrix<f64>,
    pub bias: DMatrix<f64>,
}

impl Linear {
    /// Uniform in `±1/sqrt(fan_in)` for weights and bias.
    fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |_, _| rng.random_range(-bound..bound);
        let weight = DMatrix::from_fn(fan_in, fan_out, &mut draw);
        let bias = DMatrix::from_fn(1, fan_out, &mut draw);
        Linear { weight, bias }
    }

    fn zeros_like(&self) -> Self {
        Linear {
            weight: DMatrix::zeros(self.weight.nrows(), self.weight.ncols()),
            bias: DMatrix::zeros(1, self.bias.ncols()),
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = x * &self.weight;
        for mut row in y.row_iter_mut() {
            row += &self.bias;
        }
        y
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// One GIN layer: a two-layer ReLU MLP over `(1 + eps) h_v + sum_u h_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub lin1: Linear,
    pub lin2: Linear,
    pub eps: f64,
}

/// Projection head used only by the contrastive objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub lin1: Linear,
    pub lin2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub layers: Vec<GinLayer>,
    pub head: Head,
}

impl Params {
    pub(crate) fn init(
        seed: u64,
        layer_count: usize,
        input_dim: usize,
        substructure_dim: usize,
        hidden_dim: usize,
        projection_dim: usize,
        gin_eps: f64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_count);
        let mut prev = input_dim;
        for _ in 0..layer_count {
            let fan_in = prev + substructure_dim;
            layers.push(GinLayer {
                lin1: Linear::init(&mut rng, fan_in, hidden_dim),
                lin2: Linear::init(&mut rng, hidden_dim, hidden_dim),
                eps: gin_eps,
            });
            prev = hidden_dim;
        }
        let head = Head {
            lin1: Linear::init(&mut rng, hidden_dim, hidden_dim),
            lin2: Linear::init(&mut rng, hidden_dim, projection_dim),
        };
        Params { layers, head }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            layers: self
                .layers
                .iter()
                .map(|l| GinLayer {
                    lin1: l.lin1.zeros_like(),
                    lin2: l.lin2.zeros_like(),
                    eps: 0.0,
                })
                .collect(),
            head: Head {
                lin1: self.head.lin1.zeros_like(),
                lin2: self.head.lin2.zeros_like(),
            },
        }
    }

    /// Visits every parameter block in a fixed order: per layer
    /// `lin1.weight, lin1.bias, lin2.weight, lin2.bias, eps`, then the head's
    /// `lin1.weight, lin1.bias, lin2.weight, lin2.bias`.
    pub fn for_each_block(&self, mut f: impl FnMut(&[f64], (usize, usize))) {
        for l in &self.layers {
            for lin in [&l.lin1, &l.lin2] {
                f(lin.weight.as_slice(), lin.weight.shape());
                f(lin.bias.as_slice(), lin.bias.shape());
            }
            f(std::slice::from_ref(&l.eps), (1, 1));
        }
        for lin in [&self.head.lin1, &self.head.lin2] {
            f(lin.weight.as_slice(), lin.weight.shape());
            f(lin.bias.as_slice(), lin.bias.shape());
        }
    }

    pub fn for_each_block_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for l in &mut self.layers {
            for lin in [&mut l.lin1, &mut l.lin2] {
                f(lin.weight.as_mut_slice());
                f(lin.bias.as_mut_slice());
            }
            f(std::slice::from_mut(&mut l.eps));
        }
        for lin in [&mut self.head.lin1, &mut self.head.lin2] {
            f(lin.weight.as_mut_slice());
            f(lin.bias.as_mut_slice());
        }
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        self.for_each_block(|b, _| n += b.len());
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_block(|b, _| out.extend_from_slice(b));
        out
    }

    pub fn set_from_slice(&mut self, flat: &[f64]) {
        let mut at = 0;
        self.for_each_block_mut(|b| {
            b.copy_from_slice(&flat[at..at + b.len()]);
            at += b.len();
        });
        assert_eq!(at, flat.len(), "flat parameter length mismatch");
    }

    pub fn add_assign(&mut self, other: &Params) {
        let flat = other.to_vec();
        let mut at = 0;
        self.for_each_block_mut(|b| {
            for x in b.iter_mut() {
                *x += flat[at];
                at += 1;
            }
        });
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_block(|b, _| ok &= b.iter().all(|x| x.is_finite()));
        ok
    }
}
