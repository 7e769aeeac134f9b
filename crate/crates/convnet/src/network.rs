use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::layers::{
    conv_backward, conv_forward, gap_backward, gap_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, softmax_xent,
};
use crate::tensor::Tensor;
use crate::{ConvnetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize },
    MaxPool { window: usize, stride: usize },
    Relu,
    GlobalAvgPool,
}

/// Ordered layers plus the `(channels, height, width)` input they expect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

pub const STANDARD_ARCHITECTURE: &str = "(96) 7c - 3p - (256) 5c - 2p - (512) 3c - 2p - (10) 1c";

impl NetworkSpec {
    pub fn new(input: [usize; 3], layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = NetworkSpec { input, layers };
        spec.shape_trace()?;
        Ok(spec)
    }

    /// Parses the compact notation `(N) Kc` for a K×K convolution with N
    /// filters and `Kp` for K×K max pooling with stride K, joined by `-`.
    /// `(N) cK` is accepted as well. Each convolution except the last is
    /// followed by a ReLU, and a global average pool closes the network.
    pub fn parse(notation: &str, input: [usize; 3]) -> Result<Self> {
        let bad = |t: &str| ConvnetError::InvalidConfig(format!("bad layer `{t}` in `{notation}`"));
        let mut layers = Vec::new();
        let tokens: Vec<String> = notation.split('-').map(|t| t.split_whitespace().collect()).collect();
        let convs = tokens.iter().filter(|t| t.starts_with('(')).count();
        let mut seen = 0;
        for t in &tokens {
            if let Some(rest) = t.strip_prefix('(') {
                let (n, k) = rest.split_once(')').ok_or_else(|| bad(t))?;
                let out_channels: usize = n.parse().map_err(|_| bad(t))?;
                let k = k.strip_suffix('c').or_else(|| k.strip_prefix('c')).ok_or_else(|| bad(t))?;
                let kernel: usize = k.parse().map_err(|_| bad(t))?;
                layers.push(LayerSpec::Conv { out_channels, kernel });
                seen += 1;
                if seen < convs {
                    layers.push(LayerSpec::Relu);
                }
            } else if let Some(k) = t.strip_suffix('p') {
                let window: usize = k.parse().map_err(|_| bad(t))?;
                layers.push(LayerSpec::MaxPool { window, stride: window });
            } else {
                return Err(bad(t));
            }
        }
        layers.push(LayerSpec::GlobalAvgPool);
        NetworkSpec::new(input, layers)
    }

    /// The 96×96 RGB classifier: four valid convolutions with max pooling
    /// and a 1×1 convolution feeding global average pooling.
    pub fn standard() -> Self {
        NetworkSpec::parse(STANDARD_ARCHITECTURE, [3, 96, 96]).expect("built-in architecture is valid")
    }

    /// Two convolutions and global average pooling, for small inputs.
    pub fn micro(input: [usize; 3], hidden: usize, kernel: usize, classes: usize) -> Result<Self> {
        NetworkSpec::parse(&format!("({hidden}) {kernel}c - ({classes}) 1c"), input)
    }

    /// Output `(channels, height, width)` after each layer. Fails when a
    /// kernel or window does not fit, or the network does not end in a
    /// global average pool.
    pub fn shape_trace(&self) -> Result<Vec<[usize; 3]>> {
        let mut shape = self.input;
        if shape.contains(&0) {
            return Err(ConvnetError::ShapeMismatch(format!("input {shape:?}")));
        }
        let mut trace = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let [c, h, w] = shape;
            shape = match *layer {
                LayerSpec::Conv { out_channels, kernel } => {
                    if kernel == 0 || kernel > h || kernel > w || out_channels == 0 {
                        return Err(ConvnetError::ShapeMismatch(format!("layer {i}: {kernel}x{kernel} conv on {h}x{w}")));
                    }
                    [out_channels, h - kernel + 1, w - kernel + 1]
                }
                LayerSpec::MaxPool { window, stride } => {
                    if window == 0 || stride == 0 || window > h || window > w {
                        return Err(ConvnetError::ShapeMismatch(format!("layer {i}: {window}/{stride} pool on {h}x{w}")));
                    }
                    [c, (h - window) / stride + 1, (w - window) / stride + 1]
                }
                LayerSpec::Relu => shape,
                LayerSpec::GlobalAvgPool => [c, 1, 1],
            };
            trace.push(shape);
        }
        if self.layers.last() != Some(&LayerSpec::GlobalAvgPool) {
            return Err(ConvnetError::ShapeMismatch("network must end with global average pooling".into()));
        }
        Ok(trace)
    }

    pub fn classes(&self) -> usize {
        self.shape_trace().map(|t| t.last().unwrap()[0]).unwrap_or(0)
    }

    /// `(out, in, k)` for every convolution, in order.
    pub fn conv_shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut c = self.input[0];
        let mut out = Vec::new();
        for layer in &self.layers {
            if let LayerSpec::Conv { out_channels, kernel } = *layer {
                out.push((out_channels, c, kernel));
                c = out_channels;
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.conv_shapes().iter().map(|&(o, i, k)| o * i * k * k + o).sum()
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for layer in &self.layers {
            match *layer {
                LayerSpec::Conv { out_channels, kernel } => parts.push(format!("({out_channels}) {kernel}c")),
                LayerSpec::MaxPool { window, .. } => parts.push(format!("{window}p")),
                LayerSpec::Relu | LayerSpec::GlobalAvgPool => {}
            }
        }
        write!(f, "{}", parts.join(" - "))
    }
}

/// Weights `(out, in, k, k)` and bias of one convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(out: usize, input: usize, kernel: usize) -> Self {
        ConvParams { weights: Tensor::zeros([out, input, kernel, kernel]), bias: vec![0.0; out] }
    }

    pub fn add_assign(&mut self, other: &ConvParams) {
        self.weights.add_assign(&other.weights);
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

enum Cache {
    Conv(Tensor),
    Pool([usize; 4], Vec<usize>),
    Relu(Tensor),
    Gap([usize; 4]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    /// One entry per convolution in `spec`, in order.
    pub params: Vec<ConvParams>,
}

impl Network {
    pub fn zeros(spec: NetworkSpec) -> Self {
        let params = spec.conv_shapes().into_iter().map(|(o, i, k)| ConvParams::zeros(o, i, k)).collect();
        Network { spec, params }
    }

    /// He-normal weights (std `sqrt(2 / fan_in)`) and zero biases.
    pub fn he_init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Self {
        let mut net = Network::zeros(spec);
        for p in &mut net.params {
            let [_, i, k, _] = p.weights.shape();
            let normal = Normal::new(0.0, (2.0 / (i * k * k) as f64).sqrt()).unwrap();
            for w in p.weights.data_mut() {
                *w = normal.sample(rng);
            }
        }
        net
    }

    pub fn zero_grads(&self) -> Vec<ConvParams> {
        self.spec.conv_shapes().into_iter().map(|(o, i, k)| ConvParams::zeros(o, i, k)).collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if [c, h, w] != self.spec.input {
            return Err(ConvnetError::ShapeMismatch(format!("input {:?} for network expecting {:?}", x.shape(), self.spec.input)));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor, caches: Option<&mut Vec<Cache>>) -> Result<Tensor> {
        self.check_input(x)?;
        let mut caches = caches;
        let mut cur = x.clone();
        let mut conv = 0;
        for layer in &self.spec.layers {
            let next = match *layer {
                LayerSpec::Conv { .. } => {
                    let p = &self.params[conv];
                    conv += 1;
                    conv_forward(&cur, &p.weights, &p.bias)?
                }
                LayerSpec::MaxPool { window, stride } => {
                    let (out, arg) = maxpool_forward(&cur, window, stride)?;
                    if let Some(c) = caches.as_deref_mut() {
                        c.push(Cache::Pool(cur.shape(), arg));
                    }
                    cur = out;
                    continue;
                }
                LayerSpec::Relu => relu_forward(&cur),
                LayerSpec::GlobalAvgPool => gap_forward(&cur),
            };
            if let Some(c) = caches.as_deref_mut() {
                c.push(match *layer {
                    LayerSpec::Conv { .. } => Cache::Conv(cur),
                    LayerSpec::Relu => Cache::Relu(cur),
                    _ => Cache::Gap(cur.shape()),
                });
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Logits, shaped `(batch, classes, 1, 1)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, None)
    }

    /// Mean cross-entropy over the batch, its parameter gradients and the logits.
    pub fn loss_and_grads(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, Vec<ConvParams>, Tensor)> {
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let logits = self.run(x, Some(&mut caches))?;
        let (loss, mut grad) = softmax_xent(&logits, labels)?;
        let mut grads = self.zero_grads();
        let mut conv = self.params.len();
        for (layer, cache) in self.spec.layers.iter().zip(caches).rev() {
            grad = match (layer, cache) {
                (LayerSpec::Conv { .. }, Cache::Conv(input)) => {
                    conv -= 1;
                    let g = conv_backward(&input, &self.params[conv].weights, &grad)?;
                    grads[conv] = ConvParams { weights: g.weights, bias: g.bias };
                    g.input
                }
                (LayerSpec::MaxPool { .. }, Cache::Pool(shape, arg)) => maxpool_backward(shape, &arg, &grad)?,
                (LayerSpec::Relu, Cache::Relu(input)) => relu_backward(&input, &grad),
                (LayerSpec::GlobalAvgPool, Cache::Gap(shape)) => gap_backward(shape, &grad),
                _ => unreachable!("cache order follows layer order"),
            };
        }
        Ok((loss, grads, logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctxaug_core::seed::rng_from;
    use rand_distr::StandardNormal;

    #[test]
    fn standard_network_shape_trace() {
        let spec = NetworkSpec::standard();
        let sides: Vec<usize> = spec
            .shape_trace()
            .unwrap()
            .iter()
            .filter(|s| s[1] > 1)
            .map(|s| s[1])
            .collect();
        // conv, relu, pool, conv, relu, pool, conv, relu, pool, conv(1x1)
        assert_eq!(sides, vec![90, 90, 30, 26, 26, 13, 11, 11, 5, 5]);
        let trace = spec.shape_trace().unwrap();
        assert_eq!(trace[8], [512, 5, 5]);
        assert_eq!(trace[9], [10, 5, 5]);
        assert_eq!(*trace.last().unwrap(), [10, 1, 1]);
        assert_eq!(spec.classes(), 10);
        let (o, i, k) = spec.conv_shapes()[0];
        assert_eq!(o * i * k * k + o, 14208);
        assert_eq!(spec.to_string(), STANDARD_ARCHITECTURE);
    }

    #[test]
    fn standard_network_relu_placement() {
        let spec = NetworkSpec::standard();
        assert_eq!(spec.layers.iter().filter(|l| **l == LayerSpec::Relu).count(), 3);
        assert_eq!(spec.layers[spec.layers.len() - 2], LayerSpec::Conv { out_channels: 10, kernel: 1 });
    }

    #[test]
    fn parse_accepts_both_kernel_spellings() {
        let a = NetworkSpec::parse("(4) 3c - 2p - (2) c1", [1, 8, 8]).unwrap();
        let b = NetworkSpec::parse("(4)3c-2p-(2)1c", [1, 8, 8]).unwrap();
        assert_eq!(a, b);
        assert!(NetworkSpec::parse("(4) 9c", [1, 8, 8]).is_err());
        assert!(NetworkSpec::parse("(4) 3x", [1, 8, 8]).is_err());
        assert!(NetworkSpec::new([1, 8, 8], vec![LayerSpec::Relu]).is_err());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_logits() {
        let spec = NetworkSpec::parse("(6) 5c - 2p - (4) 3c - (3) 1c", [3, 20, 20]).unwrap();
        let net = Network::he_init(spec, &mut rng_from(&[1]));
        let out = net.forward(&Tensor::zeros([2, 3, 20, 20])).unwrap();
        assert_eq!(out.shape(), [2, 3, 1, 1]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn he_init_statistics() {
        let spec = NetworkSpec::parse("(64) 5c - (2) 1c", [8, 9, 9]).unwrap();
        let net = Network::he_init(spec, &mut rng_from(&[2]));
        let w = net.params[0].weights.data();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 2.0 / 200.0).abs() < 0.1 * 2.0 / 200.0);
        assert!(net.params.iter().all(|p| p.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn input_shape_is_checked() {
        let net = Network::zeros(NetworkSpec::micro([3, 8, 8], 2, 3, 2).unwrap());
        assert!(matches!(net.forward(&Tensor::zeros([1, 3, 9, 8])), Err(ConvnetError::ShapeMismatch(_))));
    }

    #[test]
    fn network_gradients_match_finite_differences() {
        let spec = NetworkSpec::parse("(3) 3c - 2p - (2) 1c", [2, 7, 7]).unwrap();
        let mut rng = rng_from(&[3]);
        let mut net = Network::he_init(spec, &mut rng);
        for p in &mut net.params {
            for b in &mut p.bias {
                *b = StandardNormal.sample(&mut rng);
            }
        }
        let x = Tensor::from_fn([2, 2, 7, 7], |_| StandardNormal.sample(&mut rng));
        let labels = [1, 0];
        let (_, grads, _) = net.loss_and_grads(&x, &labels).unwrap();
        let h = 1e-5;
        for (li, g) in grads.iter().enumerate() {
            for i in 0..g.weights.len() + g.bias.len() {
                let bump = |delta: f64| {
                    let mut n = net.clone();
                    let p = &mut n.params[li];
                    if i < g.weights.len() {
                        p.weights.data_mut()[i] += delta;
                    } else {
                        p.bias[i - g.weights.len()] += delta;
                    }
                    n.loss_and_grads(&x, &labels).unwrap().0
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if i < g.weights.len() { g.weights.data()[i] } else { g.bias[i - g.weights.len()] };
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(err < 1e-6, "layer {li} param {i}: {analytic} vs {numeric}");
            }
        }
    }
}
