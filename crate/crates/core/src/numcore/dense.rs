use super::{
    add_outer, affine, affine_transpose, check_len, rng_from_seed, Activation, NetError, Rng,
};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// Shape and behaviour of one affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Dropout applied to this layer's activated output.
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, dropout: f64) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Row-major `out_dim × in_dim`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            spec,
            weight: vec![0.0; spec.in_dim * spec.out_dim],
            bias: vec![0.0; spec.out_dim],
        }
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) for weights and biases.
    pub fn init(spec: LayerSpec, rng: &mut Rng) -> Self {
        let bound = 1.0 / (spec.in_dim.max(1) as f64).sqrt();
        let mut layer = Self::zeros(spec);
        for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        layer
    }
}

/// Feed-forward stack of affine layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    seed: u64,
}

/// Intermediates recorded by [`DenseNet::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    dims: Vec<(usize, usize)>,
}

/// Parameter gradients, same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl DenseGrads {
    pub fn add_assign(&mut self, other: &DenseGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|v| v.iter_mut())
            .for_each(|x| *x *= s);
    }

    /// Flattened in the same order as [`DenseNet::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|g| *g == 0.0)
    }
}

impl DenseNet {
    /// Builds a randomly initialised network from chained layer specs.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self, NetError> {
        let mut rng = rng_from_seed(seed);
        let layers = specs.iter().map(|s| Layer::init(*s, &mut rng)).collect();
        Self::from_layers(layers, seed)
    }

    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Checkpoint(
                "network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            check_len("layer chain", pair[0].spec.out_dim, pair[1].spec.in_dim)?;
        }
        for layer in &layers {
            check_len(
                "weight",
                layer.spec.in_dim * layer.spec.out_dim,
                layer.weight.len(),
            )?;
            check_len("bias", layer.spec.out_dim, layer.bias.len())?;
            if !(0.0..1.0).contains(&layer.spec.dropout) {
                return Err(NetError::Checkpoint(format!(
                    "dropout rate {} outside [0, 1)",
                    layer.spec.dropout
                )));
            }
        }
        Ok(Self { layers, seed })
    }

    /// Hidden stack `in → widths[0] → … → widths[last] → out`, hidden layers share one
    /// activation and dropout rate, the output layer is linear without dropout.
    pub fn mlp(
        in_dim: usize,
        widths: &[usize],
        out_dim: usize,
        activation: Activation,
        dropout: f64,
        seed: u64,
    ) -> Result<Self, NetError> {
        let mut specs = Vec::with_capacity(widths.len() + 1);
        let mut prev = in_dim;
        for &w in widths {
            specs.push(LayerSpec::new(prev, w, activation, dropout));
            prev = w;
        }
        specs.push(LayerSpec::new(prev, out_dim, Activation::Identity, 0.0));
        Self::new(&specs, seed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Overrides the dropout rate of every layer that currently has dropout or is hidden.
    pub fn set_hidden_dropout(&mut self, rate: f64) {
        let last = self.layers.len() - 1;
        for layer in &mut self.layers[..last] {
            layer.spec.dropout = rate;
        }
    }

    /// Runs the network. Dropout is active iff `dropout_rng` is provided.
    pub fn forward(
        &self,
        x: &[f64],
        mut dropout_rng: Option<&mut Rng>,
    ) -> Result<(Vec<f64>, ForwardCache), NetError> {
        check_len("network input", self.input_dim(), x.len())?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            dims: self
                .layers
                .iter()
                .map(|l| (l.spec.in_dim, l.spec.out_dim))
                .collect(),
        };
        let mut h = x.to_vec();
        for layer in &self.layers {
            let z = affine(&layer.weight, &layer.bias, &h);
            let mut out: Vec<f64> = z.iter().map(|&v| layer.spec.activation.apply(v)).collect();
            let mask = match dropout_rng.as_deref_mut() {
                Some(rng) if layer.spec.dropout > 0.0 => {
                    let keep = 1.0 - layer.spec.dropout;
                    let m: Vec<f64> = (0..out.len())
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    out.iter_mut().zip(&m).for_each(|(o, s)| *o *= s);
                    Some(m)
                }
                _ => None,
            };
            cache.inputs.push(std::mem::replace(&mut h, out));
            cache.pre.push(z);
            cache.masks.push(mask);
        }
        Ok((h, cache))
    }

    /// Deterministic evaluation without recording a cache.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        check_len("network input", self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = affine(&layer.weight, &layer.bias, &h)
                .into_iter()
                .map(|v| layer.spec.activation.apply(v))
                .collect();
        }
        Ok(h)
    }

    /// Backpropagates `output_grad` through a cache from [`forward`](Self::forward).
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<(DenseGrads, Vec<f64>), NetError> {
        let dims: Vec<(usize, usize)> = self
            .layers
            .iter()
            .map(|l| (l.spec.in_dim, l.spec.out_dim))
            .collect();
        if dims != cache.dims || cache.pre.len() != self.layers.len() {
            return Err(NetError::StaleCache);
        }
        check_len("output gradient", self.output_dim(), output_grad.len())?;
        let n = self.layers.len();
        let mut weights = vec![Vec::new(); n];
        let mut biases = vec![Vec::new(); n];
        let mut g = output_grad.to_vec();
        for idx in (0..n).rev() {
            let layer = &self.layers[idx];
            if let Some(mask) = &cache.masks[idx] {
                g.iter_mut().zip(mask).for_each(|(gi, m)| *gi *= m);
            }
            let gz: Vec<f64> = g
                .iter()
                .zip(&cache.pre[idx])
                .map(|(gi, z)| gi * layer.spec.activation.derivative(*z))
                .collect();
            let mut dw = vec![0.0; layer.weight.len()];
            add_outer(&mut dw, &gz, &cache.inputs[idx]);
            g = affine_transpose(&layer.weight, layer.spec.in_dim, &gz);
            weights[idx] = dw;
            biases[idx] = gz;
        }
        Ok((DenseGrads { weights, biases }, g))
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            weights: self
                .layers
                .iter()
                .map(|l| vec![0.0; l.weight.len()])
                .collect(),
            biases: self
                .layers
                .iter()
                .map(|l| vec![0.0; l.bias.len()])
                .collect(),
        }
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NetError> {
        check_len("flat parameters", self.param_count(), flat.len())?;
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn sum_sq_params(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias))
            .map(|w| w * w)
            .sum()
    }

    pub fn to_checkpoint(&self) -> DenseCheckpoint {
        let mut layer_dims = vec![self.input_dim()];
        layer_dims.extend(self.layers.iter().map(|l| l.spec.out_dim));
        DenseCheckpoint {
            layer_dims,
            activations: self.layers.iter().map(|l| l.spec.activation).collect(),
            dropout_rates: self.layers.iter().map(|l| l.spec.dropout).collect(),
            weights: self.layers.iter().map(|l| l.weight.clone()).collect(),
            biases: self.layers.iter().map(|l| l.bias.clone()).collect(),
            seed: self.seed,
        }
    }

    pub fn from_checkpoint(ck: &DenseCheckpoint) -> Result<Self, NetError> {
        let n = ck.activations.len();
        if ck.layer_dims.len() != n + 1
            || ck.dropout_rates.len() != n
            || ck.weights.len() != n
            || ck.biases.len() != n
        {
            return Err(NetError::Checkpoint("inconsistent layer counts".into()));
        }
        let layers = (0..n)
            .map(|i| Layer {
                spec: LayerSpec::new(
                    ck.layer_dims[i],
                    ck.layer_dims[i + 1],
                    ck.activations[i],
                    ck.dropout_rates[i],
                ),
                weight: ck.weights[i].clone(),
                bias: ck.biases[i].clone(),
            })
            .collect();
        Self::from_layers(layers, ck.seed)
    }
}

/// JSON checkpoint layout: dimensions `[in, h1, …, out]`, row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCheckpoint {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub dropout_rates: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net() -> DenseNet {
        let spec = LayerSpec::new(2, 2, Activation::Identity, 0.0);
        let layer = Layer {
            spec,
            weight: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
        };
        DenseNet::from_layers(vec![layer], 0).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let (y, _) = identity_net().forward(&[1.0, 2.0], None).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn hand_computed_two_layer_chain() {
        // W1 = [[1,2,3],[-1,0,1]], b1 = [0.5,-0.5], ReLU; W2 = [[2,-1]], b2 = [0.1]
        let l1 = Layer {
            spec: LayerSpec::new(3, 2, Activation::Relu, 0.0),
            weight: vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0],
            bias: vec![0.5, -0.5],
        };
        let l2 = Layer {
            spec: LayerSpec::new(2, 1, Activation::Identity, 0.0),
            weight: vec![2.0, -1.0],
            bias: vec![0.1],
        };
        let net = DenseNet::from_layers(vec![l1, l2], 0).unwrap();
        // x = [1,0,0]: z1 = [1.5, -1.5] → relu [1.5, 0] → 2*1.5 + 0.1 = 3.1
        let (y, _) = net.forward(&[1.0, 0.0, 0.0], None).unwrap();
        assert!((y[0] - 3.1).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let net = identity_net();
        assert!(matches!(
            net.forward(&[1.0], None),
            Err(NetError::Shape { .. })
        ));
        let other = DenseNet::mlp(3, &[4], 1, Activation::Relu, 0.0, 1).unwrap();
        let (_, cache) = other.forward(&[0.0; 3], None).unwrap();
        assert_eq!(net.backward(&cache, &[1.0, 1.0]), Err(NetError::StaleCache));
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let net = DenseNet::mlp(4, &[5, 3], 2, Activation::Gelu, 0.0, 3).unwrap();
        let (_, cache) = net.forward(&[0.3, -1.0, 2.0, 0.1], None).unwrap();
        let (g, gx) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.is_zero());
        assert!(gx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_linear_gradient() {
        let layer = Layer {
            spec: LayerSpec::new(1, 1, Activation::Identity, 0.0),
            weight: vec![0.7],
            bias: vec![0.0],
        };
        let net = DenseNet::from_layers(vec![layer], 0).unwrap();
        let (_, cache) = net.forward(&[3.0], None).unwrap();
        let (g, _) = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.weights[0], vec![3.0]);
        assert_eq!(g.biases[0], vec![1.0]);
    }

    #[test]
    fn param_count_and_roundtrip() {
        let net = DenseNet::mlp(10, &[128, 64], 1, Activation::Relu, 0.0, 9).unwrap();
        assert_eq!(net.param_count(), 10 * 128 + 128 + 128 * 64 + 64 + 64 + 1);
        let json = serde_json::to_string(&net.to_checkpoint()).unwrap();
        let back = DenseNet::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn dropout_off_is_deterministic_and_seeded_dropout_repeats() {
        let net = DenseNet::mlp(3, &[16], 2, Activation::Gelu, 0.3, 5).unwrap();
        let x = [0.2, -0.4, 1.1];
        assert_eq!(
            net.forward(&x, None).unwrap().0,
            net.forward(&x, None).unwrap().0
        );
        let mut r1 = rng_from_seed(11);
        let mut r2 = rng_from_seed(11);
        assert_eq!(
            net.forward(&x, Some(&mut r1)).unwrap().0,
            net.forward(&x, Some(&mut r2)).unwrap().0
        );
    }
}
