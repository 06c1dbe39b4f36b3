//! Leaky integrate-and-fire dynamics, constant-current encoding, and
//! time-stepped spiking inference.

use crate::nn::{argmax, Activation, LayerKind, Network, NnError, QLayer, QuantNetwork, Shape};

pub const DEFAULT_SEQ_LENGTH: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifParams {
    /// Inverse synaptic time constant, 1/s.
    pub tau_syn_inv: f64,
    /// Inverse membrane time constant, 1/s.
    pub tau_mem_inv: f64,
    pub v_leak: f64,
    pub v_th: f64,
    pub v_reset: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_syn_inv: 200.0,
            tau_mem_inv: 100.0,
            v_leak: 0.0,
            v_th: 0.5,
            v_reset: 0.0,
            dt: 0.001,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.tau_syn_inv > 0.0 && self.tau_mem_inv > 0.0 && self.v_th > self.v_reset && self.dt > 0.0) {
            return Err(NnError::Activation(format!("invalid LIF parameters {self:?}")));
        }
        Ok(())
    }
}

/// Membrane potential `v` and synaptic current `i` per neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct LifState {
    pub v: Vec<f64>,
    pub i: Vec<f64>,
}

impl LifState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            i: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// One explicit Euler step in place; returns the spikes.
    pub fn step(&mut self, input: &[f64], p: &LifParams) -> Result<Vec<u8>, NnError> {
        if input.len() != self.len() {
            return Err(NnError::Shape(format!(
                "LIF input has {} values for {} neurons",
                input.len(),
                self.len()
            )));
        }
        let mut spikes = vec![0u8; input.len()];
        for (k, &x) in input.iter().enumerate() {
            let i = self.i[k] + p.dt * (-p.tau_syn_inv * self.i[k]) + x;
            let mut v = self.v[k] + p.dt * p.tau_mem_inv * (p.v_leak - self.v[k] + i);
            if v >= p.v_th {
                spikes[k] = 1;
                v = p.v_reset;
            }
            self.i[k] = i;
            self.v[k] = v;
        }
        Ok(spikes)
    }
}

pub fn lif_step(state: &LifState, input: &[f64], p: &LifParams) -> Result<(LifState, Vec<u8>), NnError> {
    let mut next = state.clone();
    let spikes = next.step(input, p)?;
    Ok((next, spikes))
}

/// Binary spike tensors, one per timestep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrain {
    pub shape: Shape,
    pub steps: Vec<Vec<u8>>,
}

impl SpikeTrain {
    pub fn seq_length(&self) -> usize {
        self.steps.len()
    }

    pub fn total_spikes(&self) -> usize {
        self.steps.iter().flatten().map(|&s| s as usize).sum()
    }
}

/// Drives one LIF neuron per pixel with the pixel value as constant current.
pub fn encode_constant_current(
    image: &[f64],
    shape: Shape,
    p: &LifParams,
    seq_length: usize,
) -> Result<SpikeTrain, NnError> {
    if image.len() != shape.len() {
        return Err(NnError::Shape(format!(
            "image has {} values, shape {shape:?}",
            image.len()
        )));
    }
    let mut state = LifState::zeros(image.len());
    let steps = (0..seq_length)
        .map(|_| state.step(image, p))
        .collect::<Result<_, _>>()?;
    Ok(SpikeTrain { shape, steps })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpikingOutput {
    /// Output-layer potential summed over all timesteps.
    pub accumulated: Vec<f64>,
    /// Total spikes emitted by each LIF layer.
    pub spike_counts: Vec<usize>,
}

fn check_spiking(spec_name: &str, spiking: bool, train: &SpikeTrain, input: Shape) -> Result<(), NnError> {
    if !spiking {
        return Err(NnError::Activation(format!("{spec_name} has no LIF layers")));
    }
    if train.shape != input {
        return Err(NnError::Shape(format!(
            "spike train shape {:?} does not match input {input:?}",
            train.shape
        )));
    }
    Ok(())
}

/// Float spiking inference. State persists across timesteps; the final
/// layer has no threshold and its outputs are summed over time.
pub fn spiking_forward(net: &Network, train: &SpikeTrain, p: &LifParams) -> Result<SpikingOutput, NnError> {
    let spec = net.spec();
    check_spiking(&spec.name, spec.is_spiking(), train, spec.input)?;
    p.validate()?;
    let mut states: Vec<Option<LifState>> = spec
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| matches!(l.kind, LayerKind::Activation(_)).then(|| LifState::zeros(net.shapes()[i].len())))
        .collect();
    let mut accumulated = vec![0.0; net.shapes().last().map_or(0, Shape::len)];
    let mut spike_counts = vec![0usize; spec.activation_count()];
    for step in &train.steps {
        let mut cur: Vec<f64> = step.iter().map(|&s| s as f64).collect();
        let mut site = 0;
        for (idx, layer) in spec.layers.iter().enumerate() {
            cur = match layer.kind {
                LayerKind::Activation(Activation::Lif) => {
                    let spikes = states[idx].as_mut().expect("state").step(&cur, p)?;
                    spike_counts[site] += spikes.iter().map(|&s| s as usize).sum::<usize>();
                    site += 1;
                    spikes.into_iter().map(f64::from).collect()
                }
                _ => net.apply_layer(idx, &cur),
            };
        }
        for (a, v) in accumulated.iter_mut().zip(&cur) {
            *a += v;
        }
    }
    Ok(SpikingOutput {
        accumulated,
        spike_counts,
    })
}

/// The current a LIF unit sees for an integer pre-activation at `in_scale`.
pub fn lif_current(v: i64, in_scale: f64) -> f64 {
    v as f64 / in_scale
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntSpikingOutput {
    /// Sum over timesteps of the centered per-step logits.
    pub accumulated: Vec<i64>,
    pub spike_counts: Vec<usize>,
}

/// Integer mirror of [`spiking_forward`] on a quantized network: every
/// affine output is reduced mod `t`; LIF units see `v / scale`.
pub fn int_spiking_forward(
    qnet: &QuantNetwork,
    train: &SpikeTrain,
    p: &LifParams,
) -> Result<IntSpikingOutput, NnError> {
    check_spiking(&qnet.name, qnet.spiking, train, qnet.input)?;
    p.validate()?;
    let mut states: Vec<Option<LifState>> = qnet
        .layers
        .iter()
        .map(|l| matches!(l.op, QLayer::Lif { .. }).then(|| LifState::zeros(l.output.len())))
        .collect();
    let mut accumulated = vec![0i64; qnet.output_shape().len()];
    let mut spike_counts = vec![0usize; states.iter().flatten().count()];
    for step in &train.steps {
        let mut cur: Vec<i64> = step.iter().map(|&s| s as i64).collect();
        let mut site = 0;
        for (idx, layer) in qnet.layers.iter().enumerate() {
            cur = match &layer.op {
                QLayer::Lif { in_scale } => {
                    let currents: Vec<f64> = cur.iter().map(|&v| lif_current(v, *in_scale)).collect();
                    let spikes = states[idx].as_mut().expect("state").step(&currents, p)?;
                    spike_counts[site] += spikes.iter().map(|&s| s as usize).sum::<usize>();
                    site += 1;
                    spikes.into_iter().map(i64::from).collect()
                }
                QLayer::Relu { .. } => {
                    return Err(NnError::Activation(format!(
                        "{}: ReLU in a spiking network",
                        layer.name
                    )))
                }
                affine => affine.apply_affine(&cur, qnet.t).expect("affine"),
            };
        }
        for (a, v) in accumulated.iter_mut().zip(&cur) {
            *a += v;
        }
    }
    Ok(IntSpikingOutput {
        accumulated,
        spike_counts,
    })
}

/// Class readout: argmax, lowest index on ties.
pub fn decode_output<T: PartialOrd + Copy>(accumulated: &[T]) -> usize {
    argmax(accumulated)
}
