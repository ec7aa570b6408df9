use super::{affine_transpose, check_len, NetError, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// Single-head attention over the entries of one input vector.
///
/// With `q = W_Q x`, `k = W_K x`, `v = W_V x` the score matrix is the outer
/// product `q kᵀ / √d`; each row is softmax-normalised and the output is
/// `A v`. Row `a` of `A` says how much feature `a` draws from every other
/// feature's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBlock {
    pub dim: usize,
    pub w_query: Vec<f64>,
    pub w_key: Vec<f64>,
    pub w_value: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Row-stochastic `d × d` attention weights.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub w_query: Vec<f64>,
    pub w_key: Vec<f64>,
    pub w_value: Vec<f64>,
}

impl AttentionGrads {
    pub fn add_assign(&mut self, other: &AttentionGrads) {
        for (a, b) in [
            (&mut self.w_query, &other.w_query),
            (&mut self.w_key, &other.w_key),
            (&mut self.w_value, &other.w_value),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        [&self.w_query[..], &self.w_key[..], &self.w_value[..]].concat()
    }
}

fn matvec(w: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|r| {
            w[r * d..(r + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

impl AttentionBlock {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            w_query: vec![0.0; dim * dim],
            w_key: vec![0.0; dim * dim],
            w_value: vec![0.0; dim * dim],
        }
    }

    /// Query/key start small and value starts near identity so an untrained
    /// block is close to a pass-through.
    pub fn init(dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let mut block = Self::zeros(dim);
        for w in block.w_query.iter_mut().chain(block.w_key.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        for (i, w) in block.w_value.iter_mut().enumerate() {
            let diag = if i / dim == i % dim { 1.0 } else { 0.0 };
            *w = diag + 0.1 * rng.random_range(-bound..bound);
        }
        block
    }

    pub fn param_count(&self) -> usize {
        3 * self.dim * self.dim
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, AttentionCache), NetError> {
        check_len("attention input", self.dim, x.len())?;
        let d = self.dim;
        let q = matvec(&self.w_query, x);
        let k = matvec(&self.w_key, x);
        let v = matvec(&self.w_value, x);
        let scale = 1.0 / (d as f64).sqrt();
        let mut weights = vec![0.0; d * d];
        let mut out = vec![0.0; d];
        for a in 0..d {
            let row = &mut weights[a * d..(a + 1) * d];
            for (b, r) in row.iter_mut().enumerate() {
                *r = q[a] * k[b] * scale;
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for r in row.iter_mut() {
                *r = (*r - max).exp();
                total += *r;
            }
            for r in row.iter_mut() {
                *r /= total;
            }
            out[a] = row.iter().zip(&v).map(|(w, vb)| w * vb).sum();
        }
        Ok((
            out,
            AttentionCache {
                x: x.to_vec(),
                q,
                k,
                v,
                weights,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &AttentionCache,
        grad_out: &[f64],
    ) -> Result<(AttentionGrads, Vec<f64>), NetError> {
        let d = self.dim;
        if cache.x.len() != d || cache.weights.len() != d * d {
            return Err(NetError::StaleCache);
        }
        check_len("attention output gradient", d, grad_out.len())?;
        let scale = 1.0 / (d as f64).sqrt();
        let a_w = &cache.weights;
        let mut dv = vec![0.0; d];
        let mut dq = vec![0.0; d];
        let mut dk = vec![0.0; d];
        for a in 0..d {
            let row = &a_w[a * d..(a + 1) * d];
            let g = grad_out[a];
            // dL/dA_ab = g_a v_b; softmax Jacobian on row a
            let dot: f64 = row.iter().zip(&cache.v).map(|(w, vb)| w * g * vb).sum();
            for b in 0..d {
                dv[b] += row[b] * g;
                let ds = row[b] * (g * cache.v[b] - dot);
                dq[a] += ds * cache.k[b] * scale;
                dk[b] += ds * cache.q[a] * scale;
            }
        }
        let outer = |g: &[f64]| -> Vec<f64> {
            let mut m = vec![0.0; d * d];
            super::add_outer(&mut m, g, &cache.x);
            m
        };
        let grads = AttentionGrads {
            w_query: outer(&dq),
            w_key: outer(&dk),
            w_value: outer(&dv),
        };
        let mut dx = affine_transpose(&self.w_query, d, &dq);
        for (o, t) in dx.iter_mut().zip(affine_transpose(&self.w_key, d, &dk)) {
            *o += t;
        }
        for (o, t) in dx.iter_mut().zip(affine_transpose(&self.w_value, d, &dv)) {
            *o += t;
        }
        Ok((grads, dx))
    }

    pub fn zero_grads(&self) -> AttentionGrads {
        let n = self.dim * self.dim;
        AttentionGrads {
            w_query: vec![0.0; n],
            w_key: vec![0.0; n],
            w_value: vec![0.0; n],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        [&self.w_query[..], &self.w_key[..], &self.w_value[..]].concat()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NetError> {
        check_len("attention parameters", self.param_count(), flat.len())?;
        let n = self.dim * self.dim;
        self.w_query.copy_from_slice(&flat[..n]);
        self.w_key.copy_from_slice(&flat[n..2 * n]);
        self.w_value.copy_from_slice(&flat[2 * n..]);
        Ok(())
    }
}
