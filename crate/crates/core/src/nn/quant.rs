use super::{sum_pool2, Activation, LayerKind, Network, NnError, Shape};
use crate::bfv::{center_mod, centered_bounds};

/// How float weights and activations map onto integers mod `t`.
///
/// A real value `x` is represented by the integer `round(x · scale)`.
/// Scales are chosen independently of `t`; when `t` is too small the
/// integers saturate at the edge of the centered range.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantScheme {
    pub weight_bits: u32,
    /// Integer levels spanning a `[0, 1]` input pixel.
    pub input_levels: u32,
    /// Integer levels spanning the calibrated range of each ReLU output.
    pub act_levels: u32,
    /// One per conv/dense layer, in network order.
    pub weight_scales: Vec<f64>,
    /// One per ReLU layer, in network order.
    pub act_scales: Vec<f64>,
}

pub const DEFAULT_WEIGHT_BITS: u32 = 3;
pub const DEFAULT_INPUT_LEVELS: u32 = 15;
pub const DEFAULT_ACT_LEVELS: u32 = 7;

impl QuantScheme {
    /// Weight scales map each layer's largest `|w|` to `2^(bits-1) - 1`;
    /// activation scales map the largest ReLU output seen on `calibration`
    /// to `act_levels`.
    pub fn calibrate(
        net: &Network,
        calibration: &[Vec<f64>],
        weight_bits: u32,
        input_levels: u32,
        act_levels: u32,
    ) -> Result<Self, NnError> {
        if !(2..=32).contains(&weight_bits) || input_levels == 0 || act_levels == 0 {
            return Err(NnError::Quant(format!(
                "weight_bits {weight_bits}, input_levels {input_levels}, act_levels {act_levels}"
            )));
        }
        let w_max = ((1u64 << (weight_bits - 1)) - 1) as f64;
        let mut weight_scales = Vec::new();
        let mut relu_sites = Vec::new();
        for (idx, layer) in net.spec().layers.iter().enumerate() {
            if let Some(p) = net.weights(idx) {
                let m = p.weight.iter().fold(0f64, |m, &w| m.max((w as f64).abs()));
                weight_scales.push(if m > 0.0 { w_max / m } else { 1.0 });
            }
            if layer.kind == LayerKind::Activation(Activation::Relu) {
                relu_sites.push(idx);
            }
        }
        let mut act_max = vec![0f64; relu_sites.len()];
        if !relu_sites.is_empty() {
            for image in calibration {
                let outs = super::float_forward_trace(net, image)?;
                for (m, &idx) in act_max.iter_mut().zip(&relu_sites) {
                    *m = outs[idx].iter().fold(*m, |a, &v| a.max(v));
                }
            }
        }
        let act_scales = act_max
            .iter()
            .map(|&m| {
                if m > 0.0 {
                    act_levels as f64 / m
                } else {
                    act_levels as f64
                }
            })
            .collect();
        Ok(Self {
            weight_bits,
            input_levels,
            act_levels,
            weight_scales,
            act_scales,
        })
    }
}

/// Integer tensor in centered residues mod `t`; `data ≈ value · scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantTensor {
    pub data: Vec<i64>,
    pub shape: Shape,
    pub scale: f64,
}

/// Clamps `v` into the centered range of `t`.
pub fn saturate(v: f64, t: u64) -> i64 {
    let (lo, hi) = centered_bounds(t);
    if v.is_nan() {
        return 0;
    }
    (v.max(lo as f64).min(hi as f64)) as i64
}

/// ReLU on a centered residue followed by rescaling to the next layer's
/// activation scale.
pub fn requantize_relu(v: i64, in_scale: f64, out_scale: f64, t: u64) -> i64 {
    if v <= 0 {
        0
    } else {
        saturate((v as f64 / in_scale * out_scale).round(), t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QLayer {
    Conv2d {
        weight: Vec<i64>,
        bias: Vec<i64>,
        input: Shape,
        output: Shape,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Dense {
        weight: Vec<i64>,
        bias: Vec<i64>,
        input: usize,
        output: usize,
    },
    SumPool2 {
        input: Shape,
        output: Shape,
    },
    Flatten,
    Relu {
        in_scale: f64,
        out_scale: f64,
    },
    /// Threshold unit fed with current `v / in_scale`.
    Lif {
        in_scale: f64,
    },
}

impl QLayer {
    /// Evaluates a conv, dense, pool or flatten layer with exact integer
    /// accumulation, reducing each output into the centered range mod `t`.
    /// Returns `None` for activation layers.
    pub fn apply_affine(&self, x: &[i64], t: u64) -> Option<Vec<i64>> {
        Some(match self {
            QLayer::Conv2d {
                weight,
                bias,
                input,
                output,
                kernel,
                stride,
                pad,
            } => {
                let (k, s, p) = (*kernel, *stride, *pad);
                let mut out = vec![0; output.len()];
                for oc in 0..output.c {
                    for oy in 0..output.h {
                        for ox in 0..output.w {
                            let mut acc = bias[oc] as i128;
                            for ic in 0..input.c {
                                for ky in 0..k {
                                    let Some(iy) = (oy * s + ky).checked_sub(p).filter(|&v| v < input.h) else {
                                        continue;
                                    };
                                    for kx in 0..k {
                                        let Some(ix) = (ox * s + kx).checked_sub(p).filter(|&v| v < input.w) else {
                                            continue;
                                        };
                                        let w = weight[((oc * input.c + ic) * k + ky) * k + kx];
                                        acc += w as i128 * x[(ic * input.h + iy) * input.w + ix] as i128;
                                    }
                                }
                            }
                            out[(oc * output.h + oy) * output.w + ox] = center_mod(acc, t);
                        }
                    }
                }
                out
            }
            QLayer::Dense {
                weight,
                bias,
                input,
                output,
            } => (0..*output)
                .map(|o| {
                    let row = &weight[o * input..(o + 1) * input];
                    let acc = row
                        .iter()
                        .zip(x)
                        .fold(bias[o] as i128, |a, (&w, &v)| a + w as i128 * v as i128);
                    center_mod(acc, t)
                })
                .collect(),
            QLayer::SumPool2 { input, output } => sum_pool2(x, *input, *output, |a, b| a + b, 0i64)
                .into_iter()
                .map(|v| center_mod(v as i128, t))
                .collect(),
            QLayer::Flatten => x.to_vec(),
            QLayer::Relu { .. } | QLayer::Lif { .. } => return None,
        })
    }

    pub fn is_affine(&self) -> bool {
        !matches!(self, QLayer::Relu { .. } | QLayer::Lif { .. })
    }
}

/// One quantized layer with its output shape and the scale of its output.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantLayer {
    pub name: String,
    pub op: QLayer,
    pub output: Shape,
    pub scale: f64,
}

/// A network with integer weights mod `t` and the scale bookkeeping needed
/// to move between real and integer domains.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantNetwork {
    pub name: String,
    pub t: u64,
    pub input: Shape,
    pub layers: Vec<QuantLayer>,
    /// Scale of the network input (pixel levels, or 1 for spikes).
    pub input_scale: f64,
    pub input_levels: u32,
    /// Weights and biases clipped by the centered range of `t`.
    pub saturated: usize,
    pub spiking: bool,
}

fn quantize_values(values: &[f32], scale: f64, t: u64, saturated: &mut usize) -> Vec<i64> {
    let (lo, hi) = centered_bounds(t);
    values
        .iter()
        .map(|&v| {
            let r = (v as f64 * scale).round();
            if r < lo as f64 || r > hi as f64 {
                *saturated += 1;
            }
            saturate(r, t)
        })
        .collect()
}

/// Quantizes weights with `round(w · scale)` saturated into `[-t/2, t/2)`;
/// biases use the accumulated scale of the layer's output.
pub fn quantize_net(net: &Network, scheme: &QuantScheme, t: u64) -> Result<QuantNetwork, NnError> {
    if t < 2 {
        return Err(NnError::Quant(format!("t = {t} must be at least 2")));
    }
    let spec = net.spec();
    let spiking = spec.is_spiking();
    let linear_count = spec.layers.iter().filter(|l| l.kind.is_linear()).count();
    let relu_count = spec
        .layers
        .iter()
        .filter(|l| l.kind == LayerKind::Activation(Activation::Relu))
        .count();
    if scheme.weight_scales.len() != linear_count || scheme.act_scales.len() != relu_count {
        return Err(NnError::Quant(format!(
            "scheme has {} weight / {} activation scales, {} needs {linear_count} / {relu_count}",
            scheme.weight_scales.len(),
            scheme.act_scales.len(),
            spec.name
        )));
    }
    let input_scale = if spiking { 1.0 } else { scheme.input_levels as f64 };
    let mut scale = input_scale;
    let mut saturated = 0usize;
    let (mut wi, mut ai) = (0, 0);
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (idx, layer) in spec.layers.iter().enumerate() {
        let input = net.input_shape(idx);
        let output = net.shapes()[idx];
        let op = match layer.kind {
            LayerKind::Conv2d { .. } | LayerKind::Dense { .. } => {
                let p = net.weights(idx).expect("bound");
                let sw = scheme.weight_scales[wi];
                wi += 1;
                let weight = quantize_values(&p.weight, sw, t, &mut saturated);
                let bias = quantize_values(&p.bias, scale * sw, t, &mut saturated);
                scale *= sw;
                match layer.kind {
                    LayerKind::Conv2d {
                        kernel, stride, pad, ..
                    } => QLayer::Conv2d {
                        weight,
                        bias,
                        input,
                        output,
                        kernel,
                        stride,
                        pad,
                    },
                    _ => QLayer::Dense {
                        weight,
                        bias,
                        input: input.len(),
                        output: output.len(),
                    },
                }
            }
            LayerKind::SumPool2 => {
                scale *= 4.0;
                QLayer::SumPool2 { input, output }
            }
            LayerKind::Flatten => QLayer::Flatten,
            LayerKind::Activation(Activation::Relu) => {
                let out_scale = scheme.act_scales[ai];
                ai += 1;
                let op = QLayer::Relu {
                    in_scale: scale,
                    out_scale,
                };
                scale = out_scale;
                op
            }
            LayerKind::Activation(Activation::Lif) => {
                let op = QLayer::Lif { in_scale: scale };
                scale = 1.0;
                op
            }
        };
        layers.push(QuantLayer {
            name: layer.name.clone(),
            op,
            output,
            scale,
        });
    }
    Ok(QuantNetwork {
        name: spec.name.clone(),
        t,
        input: spec.input,
        layers,
        input_scale,
        input_levels: scheme.input_levels,
        saturated,
        spiking,
    })
}

impl QuantNetwork {
    /// Pixels in `[0, 1]` to integer levels, saturated mod `t`.
    pub fn quantize_input(&self, image: &[f64]) -> QuantTensor {
        QuantTensor {
            data: image
                .iter()
                .map(|&p| saturate((p * self.input_levels as f64).round(), self.t))
                .collect(),
            shape: self.input,
            scale: self.input_scale,
        }
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    /// Scale of the logits.
    pub fn output_scale(&self) -> f64 {
        self.layers.last().map_or(self.input_scale, |l| l.scale)
    }
}

/// Integer forward pass of a ReLU network: the decrypted-domain mirror of
/// encrypted evaluation.
pub fn int_forward(qnet: &QuantNetwork, x: &QuantTensor) -> Result<QuantTensor, NnError> {
    Ok(int_forward_trace(qnet, x)?.pop().expect("non-empty network"))
}

/// Every layer's output of [`int_forward`].
pub fn int_forward_trace(qnet: &QuantNetwork, x: &QuantTensor) -> Result<Vec<QuantTensor>, NnError> {
    if qnet.spiking {
        return Err(NnError::Activation(format!(
            "{} is spiking; use the spiking forward pass",
            qnet.name
        )));
    }
    if x.data.len() != qnet.input.len() {
        return Err(NnError::Shape(format!(
            "input has {} values, expected {}",
            x.data.len(),
            qnet.input.len()
        )));
    }
    let t = qnet.t;
    let mut cur = x.data.clone();
    let mut outs = Vec::with_capacity(qnet.layers.len());
    for layer in &qnet.layers {
        cur = match &layer.op {
            QLayer::Relu { in_scale, out_scale } => cur
                .iter()
                .map(|&v| requantize_relu(v, *in_scale, *out_scale, t))
                .collect(),
            QLayer::Lif { .. } => unreachable!("non-spiking network"),
            affine => affine.apply_affine(&cur, t).expect("affine layer"),
        };
        outs.push(QuantTensor {
            data: cur.clone(),
            shape: layer.output,
            scale: layer.scale,
        });
    }
    Ok(outs)
}
