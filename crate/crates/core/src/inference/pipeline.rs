use std::time::Instant;

use rand::Rng;

use super::{decrypt_noisy, encrypt_values, he_affine, ActivationOracle, EncryptedTensor, HeError};
use crate::bfv::KeyPair;
use crate::nn::{NnError, QLayer, QuantNetwork, Shape};
use crate::snn::{encode_constant_current, LifParams};

/// Smallest noise budget among a layer's output ciphertexts, and the wall
/// time spent producing them (noise measurement itself is not timed).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub layer: String,
    pub step: usize,
    pub nb_bits: f64,
    pub ms: f64,
}

#[derive(Clone, Debug)]
pub struct EncryptedRun {
    /// Decrypted logits; for spiking runs, the per-step logits summed.
    pub logits: Vec<i64>,
    /// Encrypted logits of the last timestep.
    pub encrypted_logits: EncryptedTensor,
    pub trace: Vec<TraceRecord>,
    pub oracles: Vec<ActivationOracle>,
    pub elapsed_ms: f64,
}

impl EncryptedRun {
    pub fn oracle_calls(&self) -> usize {
        self.oracles.iter().map(ActivationOracle::invocations).sum()
    }

    pub fn corrupt_elements(&self) -> usize {
        self.oracles.iter().map(ActivationOracle::corrupt_elements).sum()
    }

    pub fn min_nb(&self) -> f64 {
        self.trace.iter().map(|r| r.nb_bits).fold(f64::INFINITY, f64::min)
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn min_budget(x: &EncryptedTensor, keys: &KeyPair) -> Result<f64, HeError> {
    Ok(decrypt_noisy(x, &keys.secret)?
        .iter()
        .map(|d| d.budget_bits)
        .fold(f64::INFINITY, f64::min))
}

struct Runner<'a, R: Rng + ?Sized> {
    qnet: &'a QuantNetwork,
    keys: &'a KeyPair,
    rng: &'a mut R,
    oracles: Vec<Option<ActivationOracle>>,
    trace: Vec<TraceRecord>,
    timed_ms: f64,
}

impl<'a, R: Rng + ?Sized> Runner<'a, R> {
    fn new(qnet: &'a QuantNetwork, keys: &'a KeyPair, lif: &LifParams, rng: &'a mut R) -> Result<Self, HeError> {
        if keys.public.params().t() != qnet.t {
            return Err(HeError::Shape(format!(
                "network quantized for t = {}, keys use t = {}",
                qnet.t,
                keys.public.params().t()
            )));
        }
        Ok(Self {
            qnet,
            keys,
            rng,
            oracles: qnet
                .layers
                .iter()
                .map(|l| ActivationOracle::for_layer(l, qnet.t, lif))
                .collect(),
            trace: Vec::new(),
            timed_ms: 0.0,
        })
    }

    fn record(&mut self, layer: &str, step: usize, nb_bits: f64, ms: f64) {
        self.timed_ms += ms;
        self.trace.push(TraceRecord {
            layer: layer.to_string(),
            step,
            nb_bits,
            ms,
        });
    }

    /// Encrypts `values`, runs every layer, and decrypts the output.
    fn step(
        &mut self,
        values: &[i64],
        shape: Shape,
        scale: f64,
        step: usize,
    ) -> Result<(EncryptedTensor, Vec<i64>), HeError> {
        let start = Instant::now();
        let cts = encrypt_values(values, &self.keys.public, self.rng)?;
        let mut x = EncryptedTensor { cts, shape, scale };
        let ms = elapsed_ms(start);
        let nb = min_budget(&x, self.keys)?;
        self.record("input", step, nb, ms);

        let layers = &self.qnet.layers;
        for (idx, layer) in layers.iter().enumerate() {
            let start = Instant::now();
            if let Some(oracle) = self.oracles[idx].as_mut() {
                x = oracle.apply(&x, self.keys, self.rng)?;
                let ms = elapsed_ms(start);
                let consumed = *oracle.nb_log().last().expect("just logged");
                // The oracle measured what the previous layer produced.
                if let Some(prev) = self.trace.last_mut() {
                    if prev.nb_bits.is_nan() {
                        prev.nb_bits = consumed;
                    }
                }
                let fresh = min_budget(&x, self.keys)?;
                self.record(&layer.name, step, fresh, ms);
                continue;
            }
            let flatten = matches!(layer.op, QLayer::Flatten);
            x = he_affine(layer, &x)?;
            let ms = elapsed_ms(start);
            let consumer_measures = idx + 1 == layers.len() || self.oracles[idx + 1].is_some();
            let nb = if flatten {
                self.trace.last().map_or(f64::NAN, |r| r.nb_bits)
            } else if consumer_measures {
                f64::NAN
            } else {
                min_budget(&x, self.keys)?
            };
            self.record(&layer.name, step, nb, ms);
        }

        let start = Instant::now();
        let decs = decrypt_noisy(&x, &self.keys.secret)?;
        self.timed_ms += elapsed_ms(start);
        let nb = decs.iter().map(|d| d.budget_bits).fold(f64::INFINITY, f64::min);
        if let Some(last) = self.trace.last_mut() {
            if last.nb_bits.is_nan() {
                last.nb_bits = nb;
            }
        }
        Ok((x, decs.iter().map(|d| d.value).collect()))
    }

    fn finish(self, logits: Vec<i64>, encrypted_logits: EncryptedTensor, extra_ms: f64) -> EncryptedRun {
        EncryptedRun {
            logits,
            encrypted_logits,
            trace: self.trace,
            oracles: self.oracles.into_iter().flatten().collect(),
            elapsed_ms: self.timed_ms + extra_ms,
        }
    }
}

/// Quantize, encrypt, alternate homomorphic affine layers with ReLU
/// oracles, and decrypt the logits.
pub fn run_encrypted_dnn<R: Rng + ?Sized>(
    qnet: &QuantNetwork,
    image: &[f64],
    keys: &KeyPair,
    rng: &mut R,
) -> Result<EncryptedRun, HeError> {
    if qnet.spiking {
        return Err(NnError::Activation(format!("{} is spiking", qnet.name)).into());
    }
    if image.len() != qnet.input.len() {
        return Err(HeError::Shape(format!("image has {} values", image.len())));
    }
    let start = Instant::now();
    let input = qnet.quantize_input(image);
    let quant_ms = elapsed_ms(start);
    let mut runner = Runner::new(qnet, keys, &LifParams::default(), rng)?;
    let (enc, logits) = runner.step(&input.data, input.shape, input.scale, 0)?;
    Ok(runner.finish(logits, enc, quant_ms))
}

/// Spiking counterpart: the image is encoded into `seq_length` spike
/// tensors, each encrypted fresh and pushed through the network with
/// LIF oracles whose state persists across steps. Output potentials are
/// decrypted per step and summed.
pub fn run_encrypted_snn<R: Rng + ?Sized>(
    qnet: &QuantNetwork,
    image: &[f64],
    keys: &KeyPair,
    lif: &LifParams,
    seq_length: usize,
    rng: &mut R,
) -> Result<EncryptedRun, HeError> {
    if !qnet.spiking {
        return Err(NnError::Activation(format!("{} has no LIF layers", qnet.name)).into());
    }
    lif.validate()?;
    let start = Instant::now();
    let train = encode_constant_current(image, qnet.input, lif, seq_length)?;
    let encode_ms = elapsed_ms(start);
    let mut runner = Runner::new(qnet, keys, lif, rng)?;
    let mut acc = vec![0i64; qnet.output_shape().len()];
    let mut last = None;
    for (step, spikes) in train.steps.iter().enumerate() {
        let values: Vec<i64> = spikes.iter().map(|&s| s as i64).collect();
        let (enc, out) = runner.step(&values, train.shape, 1.0, step)?;
        for (a, v) in acc.iter_mut().zip(out) {
            *a += v;
        }
        last = Some(enc);
    }
    let last = last.ok_or_else(|| HeError::Shape("seq_length must be at least 1".into()))?;
    Ok(runner.finish(acc, last, encode_ms))
}
