//! Network topologies, float reference inference, and the integer-quantized
//! mirror of the encrypted path.
//!
//! Tensors are flat `Vec`s in CHW order. Weight tensors follow the PyTorch
//! layout: conv weights are `[out, in, kh, kw]`, dense weights `[out, in]`.

mod quant;

pub use quant::{
    int_forward, int_forward_trace, quantize_net, requantize_relu, saturate, QLayer, QuantLayer, QuantNetwork,
    QuantScheme, QuantTensor, DEFAULT_ACT_LEVELS, DEFAULT_INPUT_LEVELS, DEFAULT_WEIGHT_BITS,
};

use crate::data::WeightContainer;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NnError {
    #[error("unknown architecture {0:?} (expected lenet5, slenet5, micronet or smicronet)")]
    UnknownArchitecture(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("weight container lacks tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?} has dims {got:?}, expected {expected:?}")]
    TensorDims {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("activation mismatch: {0}")]
    Activation(String),
    #[error("invalid quantization: {0}")]
    Quant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub const fn flat(features: usize) -> Self {
        Self::new(features, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// Leaky integrate-and-fire threshold unit; only valid in spiking runs.
    Lif,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    /// 2×2 window, stride 2, summing (the ÷4 is folded into scales).
    SumPool2,
    Flatten,
    Dense {
        out_features: usize,
    },
    Activation(Activation),
}

impl LayerKind {
    pub fn is_linear(&self) -> bool {
        matches!(self, LayerKind::Conv2d { .. } | LayerKind::Dense { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

pub const ARCHITECTURES: [&str; 4] = ["lenet5", "slenet5", "micronet", "smicronet"];
pub const NUM_CLASSES: usize = 10;

/// `lenet5`/`micronet` use ReLU; the `s`-prefixed variants use LIF units.
pub fn build_architecture(name: &str) -> Result<NetworkSpec, NnError> {
    let (base, act) = match name {
        "lenet5" | "micronet" => (name, Activation::Relu),
        "slenet5" => ("lenet5", Activation::Lif),
        "smicronet" => ("micronet", Activation::Lif),
        other => return Err(NnError::UnknownArchitecture(other.to_string())),
    };
    let mut b = Builder::default();
    if base == "lenet5" {
        b.conv(6, 5, 1, 2).act(act).pool();
        b.conv(16, 5, 1, 0).act(act).pool();
        b.flatten();
        b.dense(120).act(act);
        b.dense(84).act(act);
        b.dense(NUM_CLASSES);
    } else {
        b.conv(4, 5, 2, 0).act(act);
        b.flatten();
        b.dense(NUM_CLASSES);
    }
    let spec = NetworkSpec {
        name: name.to_string(),
        input: Shape::new(1, 28, 28),
        layers: b.layers,
    };
    spec.shapes()?;
    Ok(spec)
}

#[derive(Default)]
struct Builder {
    layers: Vec<LayerSpec>,
    convs: usize,
    denses: usize,
    acts: usize,
    pools: usize,
}

impl Builder {
    fn push(&mut self, name: String, kind: LayerKind) -> &mut Self {
        self.layers.push(LayerSpec { name, kind });
        self
    }

    fn conv(&mut self, out_channels: usize, kernel: usize, stride: usize, pad: usize) -> &mut Self {
        self.convs += 1;
        let kind = LayerKind::Conv2d {
            out_channels,
            kernel,
            stride,
            pad,
        };
        self.push(format!("conv{}", self.convs), kind)
    }

    fn dense(&mut self, out_features: usize) -> &mut Self {
        self.denses += 1;
        self.push(format!("fc{}", self.denses), LayerKind::Dense { out_features })
    }

    fn act(&mut self, a: Activation) -> &mut Self {
        self.acts += 1;
        let prefix = match a {
            Activation::Relu => "relu",
            Activation::Lif => "lif",
        };
        self.push(format!("{prefix}{}", self.acts), LayerKind::Activation(a))
    }

    fn pool(&mut self) -> &mut Self {
        self.pools += 1;
        self.push(format!("pool{}", self.pools), LayerKind::SumPool2)
    }

    fn flatten(&mut self) -> &mut Self {
        self.push("flatten".into(), LayerKind::Flatten)
    }
}

impl NetworkSpec {
    /// Output shape of every layer, validating the chain.
    pub fn shapes(&self) -> Result<Vec<Shape>, NnError> {
        let mut cur = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            cur = layer_output_shape(&layer.name, &layer.kind, cur)?;
            out.push(cur);
        }
        Ok(out)
    }

    /// Input shape of layer `idx`.
    pub fn input_shape(&self, idx: usize) -> Result<Shape, NnError> {
        Ok(if idx == 0 { self.input } else { self.shapes()?[idx - 1] })
    }

    pub fn output_shape(&self) -> Result<Shape, NnError> {
        Ok(self.shapes()?.last().copied().unwrap_or(self.input))
    }

    /// `(name, dims)` of every parameter tensor, in layer order.
    pub fn parameter_manifest(&self) -> Result<Vec<(String, Vec<usize>)>, NnError> {
        let shapes = self.shapes()?;
        let mut manifest = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { self.input } else { shapes[i - 1] };
            match layer.kind {
                LayerKind::Conv2d {
                    out_channels, kernel, ..
                } => {
                    manifest.push((
                        format!("{}.weight", layer.name),
                        vec![out_channels, input.c, kernel, kernel],
                    ));
                    manifest.push((format!("{}.bias", layer.name), vec![out_channels]));
                }
                LayerKind::Dense { out_features } => {
                    manifest.push((format!("{}.weight", layer.name), vec![out_features, input.len()]));
                    manifest.push((format!("{}.bias", layer.name), vec![out_features]));
                }
                _ => {}
            }
        }
        Ok(manifest)
    }

    pub fn parameter_count(&self) -> Result<usize, NnError> {
        Ok(self
            .parameter_manifest()?
            .iter()
            .map(|(_, d)| d.iter().product::<usize>())
            .sum())
    }

    /// The single activation kind used by the network, if any.
    pub fn activation(&self) -> Option<Activation> {
        self.layers.iter().find_map(|l| match l.kind {
            LayerKind::Activation(a) => Some(a),
            _ => None,
        })
    }

    pub fn activation_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Activation(_)))
            .count()
    }

    pub fn is_spiking(&self) -> bool {
        self.activation() == Some(Activation::Lif)
    }

    fn require_activation(&self, want: Activation) -> Result<(), NnError> {
        for l in &self.layers {
            if let LayerKind::Activation(a) = l.kind {
                if a != want {
                    return Err(NnError::Activation(format!(
                        "layer {} is {a:?}, this path needs {want:?}",
                        l.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn layer_output_shape(name: &str, kind: &LayerKind, input: Shape) -> Result<Shape, NnError> {
    match *kind {
        LayerKind::Conv2d {
            out_channels,
            kernel,
            stride,
            pad,
        } => {
            if kernel == 0 || stride == 0 || out_channels == 0 {
                return Err(NnError::Shape(format!(
                    "{name}: kernel, stride and channels must be positive"
                )));
            }
            let (ph, pw) = (input.h + 2 * pad, input.w + 2 * pad);
            if ph < kernel || pw < kernel {
                return Err(NnError::Shape(format!(
                    "{name}: kernel {kernel} larger than padded input {ph}x{pw}"
                )));
            }
            Ok(Shape::new(
                out_channels,
                (ph - kernel) / stride + 1,
                (pw - kernel) / stride + 1,
            ))
        }
        LayerKind::SumPool2 => {
            if input.h < 2 || input.w < 2 {
                return Err(NnError::Shape(format!("{name}: input {input:?} too small to pool")));
            }
            Ok(Shape::new(input.c, input.h / 2, input.w / 2))
        }
        LayerKind::Flatten => Ok(Shape::flat(input.len())),
        LayerKind::Dense { out_features } => {
            if input.h != 1 || input.w != 1 {
                return Err(NnError::Shape(format!(
                    "{name}: dense layer needs a flattened input, got {input:?}"
                )));
            }
            if out_features == 0 {
                return Err(NnError::Shape(format!("{name}: zero output features")));
            }
            Ok(Shape::flat(out_features))
        }
        LayerKind::Activation(_) => Ok(input),
    }
}

/// Float weights of one conv or dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearWeights {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// A network spec with float weights bound to its linear layers.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Shape>,
    params: Vec<Option<LinearWeights>>,
}

impl Network {
    /// Binds weights by name, rejecting missing tensors or wrong dims.
    pub fn bind(spec: NetworkSpec, weights: &WeightContainer) -> Result<Self, NnError> {
        let shapes = spec.shapes()?;
        let manifest = spec.parameter_manifest()?;
        for (name, dims) in &manifest {
            let t = weights.get(name).ok_or_else(|| NnError::MissingTensor(name.clone()))?;
            if &t.dims != dims {
                return Err(NnError::TensorDims {
                    name: name.clone(),
                    expected: dims.clone(),
                    got: t.dims.clone(),
                });
            }
        }
        let params = spec
            .layers
            .iter()
            .map(|l| {
                l.kind.is_linear().then(|| LinearWeights {
                    weight: weights
                        .get(&format!("{}.weight", l.name))
                        .expect("checked")
                        .values
                        .clone(),
                    bias: weights
                        .get(&format!("{}.bias", l.name))
                        .expect("checked")
                        .values
                        .clone(),
                })
            })
            .collect();
        Ok(Self { spec, shapes, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn input_shape(&self, idx: usize) -> Shape {
        if idx == 0 {
            self.spec.input
        } else {
            self.shapes[idx - 1]
        }
    }

    pub fn weights(&self, idx: usize) -> Option<&LinearWeights> {
        self.params[idx].as_ref()
    }

    pub fn weights_mut(&mut self, idx: usize) -> Option<&mut LinearWeights> {
        self.params[idx].as_mut()
    }

    /// Applies a non-activation layer in floating point. Sum pooling is
    /// scaled by 1/4 here, so the float path computes an average pool.
    pub fn apply_layer(&self, idx: usize, x: &[f64]) -> Vec<f64> {
        let input = self.input_shape(idx);
        let output = self.shapes[idx];
        debug_assert_eq!(x.len(), input.len());
        match self.spec.layers[idx].kind {
            LayerKind::Conv2d {
                kernel, stride, pad, ..
            } => {
                let p = self.params[idx].as_ref().expect("bound");
                conv2d_f64(x, input, output, &p.weight, &p.bias, kernel, stride, pad)
            }
            LayerKind::Dense { out_features } => {
                let p = self.params[idx].as_ref().expect("bound");
                (0..out_features)
                    .map(|o| {
                        let row = &p.weight[o * x.len()..(o + 1) * x.len()];
                        p.bias[o] as f64 + row.iter().zip(x).map(|(&w, &v)| w as f64 * v).sum::<f64>()
                    })
                    .collect()
            }
            LayerKind::SumPool2 => sum_pool2(x, input, output, |a, b| a + b, 0.0)
                .into_iter()
                .map(|s| s * 0.25)
                .collect(),
            LayerKind::Flatten => x.to_vec(),
            LayerKind::Activation(Activation::Relu) => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerKind::Activation(Activation::Lif) => {
                panic!("LIF layers carry state; use the spiking forward pass")
            }
        }
    }
}

fn check_input(spec: &NetworkSpec, len: usize) -> Result<(), NnError> {
    if len != spec.input.len() {
        return Err(NnError::Shape(format!(
            "input has {len} values, {} expects {:?}",
            spec.name, spec.input
        )));
    }
    Ok(())
}

/// Standard (non-spiking) float inference. Pixels are expected in `[0, 1]`.
pub fn float_forward(net: &Network, image: &[f64]) -> Result<Vec<f64>, NnError> {
    Ok(float_forward_trace(net, image)?.pop().expect("non-empty network"))
}

/// Like [`float_forward`] but returns every layer's output.
pub fn float_forward_trace(net: &Network, image: &[f64]) -> Result<Vec<Vec<f64>>, NnError> {
    net.spec.require_activation(Activation::Relu)?;
    check_input(&net.spec, image.len())?;
    let mut outs: Vec<Vec<f64>> = Vec::with_capacity(net.spec.layers.len());
    for idx in 0..net.spec.layers.len() {
        let next = net.apply_layer(idx, outs.last().map_or(image, |v| v.as_slice()));
        outs.push(next);
    }
    Ok(outs)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_f64(
    x: &[f64],
    input: Shape,
    output: Shape,
    weight: &[f32],
    bias: &[f32],
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; output.len()];
    for oc in 0..output.c {
        for oy in 0..output.h {
            for ox in 0..output.w {
                let mut acc = bias[oc] as f64;
                for ic in 0..input.c {
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= input.h as isize {
                            continue;
                        }
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= input.w as isize {
                                continue;
                            }
                            let w = weight[((oc * input.c + ic) * kernel + ky) * kernel + kx];
                            acc += w as f64 * x[(ic * input.h + iy as usize) * input.w + ix as usize];
                        }
                    }
                }
                out[(oc * output.h + oy) * output.w + ox] = acc;
            }
        }
    }
    out
}

pub(crate) fn sum_pool2<T: Copy>(x: &[T], input: Shape, output: Shape, add: impl Fn(T, T) -> T, zero: T) -> Vec<T> {
    let mut out = vec![zero; output.len()];
    for c in 0..output.c {
        for oy in 0..output.h {
            for ox in 0..output.w {
                let mut acc = zero;
                for dy in 0..2 {
                    for dx in 0..2 {
                        acc = add(acc, x[(c * input.h + 2 * oy + dy) * input.w + 2 * ox + dx]);
                    }
                }
                out[(c * output.h + oy) * output.w + ox] = acc;
            }
        }
    }
    out
}
