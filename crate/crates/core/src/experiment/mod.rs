//! Plaintext-modulus sweeps pairing float inference with encrypted
//! inference, and the CSV reports they produce.

mod report;

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bfv::{keygen, BfvError, BfvParams, KeyPair};
use crate::data::{fixture_weights, load_split, read_weights, synthetic_dataset, DataError, IdxImageSet, Split};
use crate::inference::{run_encrypted_dnn, run_encrypted_snn, HeError, TraceRecord};
use crate::nn::{
    argmax, build_architecture, float_forward, quantize_net, Network, NnError, QuantNetwork, QuantScheme,
    DEFAULT_ACT_LEVELS, DEFAULT_INPUT_LEVELS, DEFAULT_WEIGHT_BITS, NUM_CLASSES,
};
use crate::snn::{decode_output, encode_constant_current, spiking_forward, LifParams, DEFAULT_SEQ_LENGTH};

pub use report::{
    emit_report, format_percent, percent, summarize, summary_header, CellSummary, ReportFiles, ReportOptions,
    PER_IMAGE_FILE, SUMMARY_FILE, TRACE_FILE,
};

/// Images used to calibrate activation scales, taken from the front of the
/// evaluated set.
pub const CALIBRATION_IMAGES: usize = 16;

pub const DEFAULT_T_LIST: [u64; 9] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000];

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("label {0} is outside 0..=9")]
    Label(usize),
    #[error("refusing to write a report with no rows")]
    EmptyReport,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Bfv(#[from] BfvError),
    #[error(transparent)]
    He(#[from] HeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeCategory {
    BothCorrect,
    StandardCorrect,
    EncryptedCorrect,
    BothWrongEqual,
    BothWrongDifferent,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 5] = [
        Self::BothCorrect,
        Self::StandardCorrect,
        Self::EncryptedCorrect,
        Self::BothWrongEqual,
        Self::BothWrongDifferent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BothCorrect => "BothCorrect",
            Self::StandardCorrect => "StandardCorrect",
            Self::EncryptedCorrect => "EncryptedCorrect",
            Self::BothWrongEqual => "BothWrongEqual",
            Self::BothWrongDifferent => "BothWrongDifferent",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OutcomeCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

pub fn classify_outcome(
    true_label: usize,
    standard_pred: usize,
    encrypted_pred: usize,
) -> Result<OutcomeCategory, ExperimentError> {
    for v in [true_label, standard_pred, encrypted_pred] {
        if v >= NUM_CLASSES {
            return Err(ExperimentError::Label(v));
        }
    }
    Ok(match (standard_pred == true_label, encrypted_pred == true_label) {
        (true, true) => OutcomeCategory::BothCorrect,
        (true, false) => OutcomeCategory::StandardCorrect,
        (false, true) => OutcomeCategory::EncryptedCorrect,
        (false, false) if standard_pred == encrypted_pred => OutcomeCategory::BothWrongEqual,
        (false, false) => OutcomeCategory::BothWrongDifferent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutcomeRecord {
    pub image_id: usize,
    pub true_label: usize,
    pub standard_pred: usize,
    pub encrypted_pred: usize,
    pub category: OutcomeCategory,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightSource {
    File(PathBuf),
    /// Uniform random weights from [`fixture_weights`].
    Fixture {
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetSource {
    /// Directory holding the `t10k-*` IDX files.
    Idx(PathBuf),
    Synthetic {
        seed: u64,
        count: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantOptions {
    pub weight_bits: u32,
    pub input_levels: u32,
    pub act_levels: u32,
}

impl Default for QuantOptions {
    fn default() -> Self {
        Self {
            weight_bits: DEFAULT_WEIGHT_BITS,
            input_levels: DEFAULT_INPUT_LEVELS,
            act_levels: DEFAULT_ACT_LEVELS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub model: String,
    pub t_list: Vec<u64>,
    pub n: usize,
    /// `None` evaluates every image in the dataset.
    pub image_count: Option<usize>,
    pub seed: u64,
    pub security_bits: u32,
    /// Replaces the security-table modulus for every `t`.
    pub override_q: Option<u64>,
    pub weights: WeightSource,
    pub dataset: DatasetSource,
    pub quant: QuantOptions,
    pub lif: LifParams,
    pub seq_length: usize,
}

impl SweepConfig {
    pub fn new(model: impl Into<String>, weights: WeightSource, dataset: DatasetSource) -> Self {
        Self {
            model: model.into(),
            t_list: DEFAULT_T_LIST.to_vec(),
            n: 1024,
            image_count: Some(200),
            seed: 42,
            security_bits: 128,
            override_q: None,
            weights,
            dataset,
            quant: QuantOptions::default(),
            lif: LifParams::default(),
            seq_length: DEFAULT_SEQ_LENGTH,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.t_list.is_empty() {
            return Err(ExperimentError::Config("t_list is empty".into()));
        }
        if let Some(&t) = self.t_list.iter().find(|&&t| t < 2) {
            return Err(ExperimentError::Config(format!("t = {t} must be at least 2")));
        }
        if self.image_count == Some(0) {
            return Err(ExperimentError::Config("image_count must be at least 1".into()));
        }
        if self.seq_length == 0 {
            return Err(ExperimentError::Config("seq_length must be at least 1".into()));
        }
        self.lif.validate()?;
        build_architecture(&self.model)?;
        Ok(())
    }

    pub fn load_network(&self) -> Result<Network, ExperimentError> {
        let weights = match &self.weights {
            WeightSource::File(path) => read_weights(path)?,
            WeightSource::Fixture { seed } => fixture_weights(&self.model, *seed)?,
        };
        Ok(Network::bind(build_architecture(&self.model)?, &weights)?)
    }

    pub fn load_images(&self) -> Result<IdxImageSet, ExperimentError> {
        let set = match &self.dataset {
            DatasetSource::Idx(dir) => load_split(dir, Split::Test)?,
            DatasetSource::Synthetic { seed, count } => synthetic_dataset(*count, *seed),
        };
        Ok(match self.image_count {
            Some(count) => set.truncated(count),
            None => set,
        })
    }

    fn params_for(&self, t: u64) -> Result<BfvParams, BfvError> {
        match self.override_q {
            Some(q) => BfvParams::with_modulus(self.n, q, t),
            None => BfvParams::standard(self.n, t, self.security_bits),
        }
    }
}

/// One image evaluated at one `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub t: u64,
    pub record: OutcomeRecord,
    /// Smallest noise budget observed anywhere in the encrypted run.
    pub min_nb: f64,
    pub ms_std: f64,
    pub ms_enc: f64,
    /// Elements whose noise had already wrapped when an oracle decrypted them.
    pub corrupt_elements: usize,
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub model: String,
    pub seed: u64,
    /// `(t, q)` in sweep order.
    pub moduli: Vec<(u64, u64)>,
    /// Ordered by `t` (sweep order), then image id.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Fraction of images at `t` whose float prediction matches the label.
    pub fn standard_accuracy(&self, t: u64) -> Option<f64> {
        let cell: Vec<&SweepRow> = self.rows.iter().filter(|r| r.t == t).collect();
        if cell.is_empty() {
            return None;
        }
        let hits = cell
            .iter()
            .filter(|r| r.record.standard_pred == r.record.true_label)
            .count();
        Some(hits as f64 / cell.len() as f64)
    }
}

/// SplitMix64 finalizer; derives independent stream seeds from the run seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(seed), |acc, &tag| mix(acc ^ mix(tag)))
}

const KEY_STREAM: u64 = 1;
const IMAGE_STREAM: u64 = 2;

struct StandardResult {
    pred: usize,
    ms: f64,
}

fn standard_predictions(
    net: &Network,
    images: &IdxImageSet,
    cfg: &SweepConfig,
) -> Result<Vec<StandardResult>, ExperimentError> {
    (0..images.len())
        .into_par_iter()
        .map(|i| {
            let image = images.image_f64(i);
            let start = Instant::now();
            let pred = if net.spec().is_spiking() {
                let train = encode_constant_current(&image, net.spec().input, &cfg.lif, cfg.seq_length)?;
                decode_output(&spiking_forward(net, &train, &cfg.lif)?.accumulated)
            } else {
                argmax(&float_forward(net, &image)?)
            };
            Ok(StandardResult {
                pred,
                ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

fn encrypted_row(
    cfg: &SweepConfig,
    qnet: &QuantNetwork,
    keys: &KeyPair,
    images: &IdxImageSet,
    image_id: usize,
    standard: &StandardResult,
) -> Result<SweepRow, ExperimentError> {
    let image = images.image_f64(image_id);
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, &[IMAGE_STREAM, qnet.t, image_id as u64]));
    let run = if qnet.spiking {
        run_encrypted_snn(qnet, &image, keys, &cfg.lif, cfg.seq_length, &mut rng)?
    } else {
        run_encrypted_dnn(qnet, &image, keys, &mut rng)?
    };
    let encrypted_pred = decode_output(&run.logits);
    let true_label = images.labels[image_id] as usize;
    let category = classify_outcome(true_label, standard.pred, encrypted_pred)?;
    Ok(SweepRow {
        t: qnet.t,
        record: OutcomeRecord {
            image_id,
            true_label,
            standard_pred: standard.pred,
            encrypted_pred,
            category,
        },
        min_nb: run.min_nb(),
        ms_std: standard.ms,
        ms_enc: run.elapsed_ms,
        corrupt_elements: run.corrupt_elements(),
        trace: run.trace,
    })
}

/// Loads the configured weights and images, then runs [`run_sweep_with`].
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    let net = cfg.load_network()?;
    let images = cfg.load_images()?;
    run_sweep_with(cfg, &net, &images, |_| {})
}

/// Sweeps `cfg.t_list` over `images`. `on_cell` sees each `t`'s summary as
/// soon as the cell completes.
///
/// The float prediction is computed once per image. Each `t` gets its own
/// key pair; every image draws encryption randomness from a stream keyed
/// by `(seed, t, image_id)`, so results do not depend on scheduling.
pub fn run_sweep_with(
    cfg: &SweepConfig,
    net: &Network,
    images: &IdxImageSet,
    mut on_cell: impl FnMut(&CellSummary),
) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    if net.spec().name != cfg.model {
        return Err(ExperimentError::Config(format!(
            "network is {}, configuration names {}",
            net.spec().name,
            cfg.model
        )));
    }
    if images.is_empty() {
        return Err(ExperimentError::Config("dataset has no images".into()));
    }
    let calibration: Vec<Vec<f64>> = (0..images.len().min(CALIBRATION_IMAGES))
        .map(|i| images.image_f64(i))
        .collect();
    let q = cfg.quant;
    let scheme = QuantScheme::calibrate(net, &calibration, q.weight_bits, q.input_levels, q.act_levels)?;
    let standard = standard_predictions(net, images, cfg)?;

    let mut report = SweepReport {
        model: cfg.model.clone(),
        seed: cfg.seed,
        moduli: Vec::with_capacity(cfg.t_list.len()),
        rows: Vec::with_capacity(cfg.t_list.len() * images.len()),
    };
    for &t in &cfg.t_list {
        let params = cfg.params_for(t)?;
        let keys = keygen(
            &params,
            &mut ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, &[KEY_STREAM, t])),
        );
        let qnet = quantize_net(net, &scheme, t)?;
        let rows: Vec<SweepRow> = (0..images.len())
            .into_par_iter()
            .map(|i| encrypted_row(cfg, &qnet, &keys, images, i, &standard[i]))
            .collect::<Result<_, _>>()?;
        on_cell(&report::summarize_cell(t, params.q(), &rows));
        report.moduli.push((t, params.q()));
        report.rows.extend(rows);
    }
    Ok(report)
}
