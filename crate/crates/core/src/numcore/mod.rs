//! Small dense-network engine with hand-written backpropagation.
//!
//! Only what the two prognostic networks need: affine layers with GELU/ReLU
//! activations, inverted dropout, a single-head feature attention block and
//! an adaptive-moment optimizer. Parameters live in plain row-major `Vec<f64>`
//! buffers so that models can be flattened for the optimizer and serialized
//! without any tensor library.

mod activation;
mod attention;
mod dense;
mod optim;
mod scaler;

pub use activation::{gelu, gelu_grad, Activation};
pub use attention::{AttentionBlock, AttentionCache, AttentionGrads};
pub use dense::{DenseCheckpoint, DenseGrads, DenseNet, ForwardCache, Layer, LayerSpec};
pub use optim::{AdamConfig, AdamState};
pub use scaler::Standardizer;

use rand::SeedableRng;
use thiserror::Error;

/// Deterministic random stream used everywhere in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from `(root, index)` (SplitMix64 finalizer).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("activation cache does not belong to this network")]
    StaleCache,
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

pub(crate) fn check_len(
    context: &'static str,
    expected: usize,
    actual: usize,
) -> Result<(), NetError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NetError::Shape {
            context,
            expected,
            actual,
        })
    }
}

/// `y = W x + b` for a row-major `out × in` matrix.
pub(crate) fn affine(weight: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    bias.iter()
        .enumerate()
        .map(|(r, b)| {
            let row = &weight[r * n_in..(r + 1) * n_in];
            b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
        })
        .collect()
}

/// `Wᵀ g` for a row-major `out × in` matrix.
pub(crate) fn affine_transpose(weight: &[f64], n_in: usize, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n_in];
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        let row = &weight[r * n_in..(r + 1) * n_in];
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * gr;
        }
    }
    out
}

/// Accumulates the outer product `g xᵀ` into a row-major gradient buffer.
pub(crate) fn add_outer(acc: &mut [f64], g: &[f64], x: &[f64]) {
    let n_in = x.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        let row = &mut acc[r * n_in..(r + 1) * n_in];
        for (a, xi) in row.iter_mut().zip(x) {
            *a += gr * xi;
        }
    }
}
