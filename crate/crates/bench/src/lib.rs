//! Fixtures shared by the benchmark targets.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svga_core::model::init_params;
use svga_core::synth::{citation_like, SynthSpec};
use svga_core::train::GraphOps;
use svga_core::{Dataset, Dims, ModelParams, TrainConfig, Variant};

/// A generated dataset with its graph matrices and freshly initialized parameters.
pub struct Fixture {
    pub data: Dataset,
    pub ops: GraphOps,
    pub params: ModelParams,
    pub config: TrainConfig,
}

impl Fixture {
    pub fn new(spec: &SynthSpec, dim: usize, variant: Variant) -> Self {
        let data = citation_like(spec, 0).expect("synthetic data");
        let ops = GraphOps::new(&data.graph);
        let n = data.graph.num_nodes();
        let dims = Dims {
            n,
            d: dim,
            m: data.features.values.ncols(),
            c: data.num_classes(),
            r: dim.min(n),
        };
        let params = init_params(dims, variant, 0).expect("init");
        let config = TrainConfig {
            dim,
            variant,
            ..TrainConfig::default()
        };
        Self {
            data,
            ops,
            params,
            config,
        }
    }
}

/// Uniform `rows × cols` matrix from a fixed seed.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>() - 0.5)
}
