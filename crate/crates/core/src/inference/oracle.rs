use rand::Rng;

use super::{decrypt_noisy, encrypt_values, EncryptedTensor, HeError};
use crate::bfv::KeyPair;
use crate::nn::{requantize_relu, QLayer, QuantLayer};
use crate::snn::{lif_current, LifParams, LifState};

#[derive(Clone, Debug)]
pub enum OracleKind {
    Relu {
        in_scale: f64,
        out_scale: f64,
    },
    /// State persists across timesteps.
    Lif {
        in_scale: f64,
        params: LifParams,
        state: LifState,
    },
}

/// The trust boundary for nonlinearities: decrypts its input, applies the
/// activation in plaintext, and returns fresh encryptions. Every call is
/// counted and the smallest consumed noise budget is logged.
#[derive(Clone, Debug)]
pub struct ActivationOracle {
    pub name: String,
    kind: OracleKind,
    t: u64,
    invocations: usize,
    nb_log: Vec<f64>,
    corrupt_elements: usize,
}

impl ActivationOracle {
    pub fn new(name: impl Into<String>, kind: OracleKind, t: u64) -> Self {
        Self {
            name: name.into(),
            kind,
            t,
            invocations: 0,
            nb_log: Vec::new(),
            corrupt_elements: 0,
        }
    }

    /// Oracle for an activation layer; `None` for other layers.
    pub fn for_layer(layer: &QuantLayer, t: u64, lif: &LifParams) -> Option<Self> {
        let kind = match layer.op {
            QLayer::Relu { in_scale, out_scale } => OracleKind::Relu { in_scale, out_scale },
            QLayer::Lif { in_scale } => OracleKind::Lif {
                in_scale,
                params: *lif,
                state: LifState::zeros(layer.output.len()),
            },
            _ => return None,
        };
        Some(Self::new(layer.name.clone(), kind, t))
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn invocations(&self) -> usize {
        self.invocations
    }

    /// Minimum noise budget of the consumed ciphertexts, per invocation.
    pub fn nb_log(&self) -> &[f64] {
        &self.nb_log
    }

    /// Consumed ciphertexts whose budget was exhausted. Their decryptions
    /// are used as-is; the corruption propagates rather than aborting.
    pub fn corrupt_elements(&self) -> usize {
        self.corrupt_elements
    }

    /// Applies the activation to already-decrypted values.
    pub fn activate(&mut self, values: &[i64]) -> Result<Vec<i64>, HeError> {
        let t = self.t;
        Ok(match &mut self.kind {
            OracleKind::Relu { in_scale, out_scale } => values
                .iter()
                .map(|&v| requantize_relu(v, *in_scale, *out_scale, t))
                .collect(),
            OracleKind::Lif {
                in_scale,
                params,
                state,
            } => {
                let currents: Vec<f64> = values.iter().map(|&v| lif_current(v, *in_scale)).collect();
                state.step(&currents, params)?.into_iter().map(i64::from).collect()
            }
        })
    }

    fn output_scale(&self) -> f64 {
        match self.kind {
            OracleKind::Relu { out_scale, .. } => out_scale,
            OracleKind::Lif { .. } => 1.0,
        }
    }

    pub fn apply<R: Rng + ?Sized>(
        &mut self,
        x: &EncryptedTensor,
        keys: &KeyPair,
        rng: &mut R,
    ) -> Result<EncryptedTensor, HeError> {
        let decs = decrypt_noisy(x, &keys.secret)?;
        let min_nb = decs.iter().map(|d| d.budget_bits).fold(f64::INFINITY, f64::min);
        self.invocations += 1;
        self.nb_log.push(min_nb);
        self.corrupt_elements += decs.iter().filter(|d| d.budget_bits <= 0.0).count();
        let values: Vec<i64> = decs.iter().map(|d| d.value).collect();
        let out = self.activate(&values)?;
        Ok(EncryptedTensor {
            cts: encrypt_values(&out, &keys.public, rng)?,
            shape: x.shape,
            scale: self.output_scale(),
        })
    }
}
