use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spyking_core::bfv::{security_bound_bits, select_q};
use spyking_core::data::{encode_idx_images, encode_idx_labels, fixture_weights, synthetic_dataset, write_weights};
use spyking_core::experiment::{
    emit_report, run_sweep_with, summarize, CellSummary, DatasetSource, OutcomeCategory, QuantOptions, ReportOptions,
    SweepConfig, WeightSource,
};
use spyking_core::nn::{ARCHITECTURES, DEFAULT_ACT_LEVELS, DEFAULT_INPUT_LEVELS, DEFAULT_WEIGHT_BITS};
use spyking_core::snn::DEFAULT_SEQ_LENGTH;

#[derive(Parser)]
#[command(
    name = "spyking",
    version,
    about = "Encrypted DNN/SNN inference sweeps over the BFV plaintext modulus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep t and write per-image, summary and trace CSVs.
    Run(RunArgs),
    /// Write deterministic random weights for an architecture.
    FixtureWeights {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic test split in IDX format.
    SynthDataset {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the ciphertext modulus chosen for a ring degree.
    SelectQ {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        security_bits: u32,
    },
}

#[derive(Clone, Debug)]
enum WeightsArg {
    Path(PathBuf),
    Fixture(u64),
}

impl FromStr for WeightsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("fixture") {
            Some("") => Ok(Self::Fixture(7)),
            Some(rest) => rest
                .strip_prefix(':')
                .and_then(|seed| seed.parse().ok())
                .map(Self::Fixture)
                .ok_or_else(|| format!("expected fixture:SEED, got {s:?}")),
            None => Ok(Self::Path(s.into())),
        }
    }
}

#[derive(Clone, Debug)]
enum DatasetArg {
    Dir(PathBuf),
    Synthetic(u64),
}

impl FromStr for DatasetArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("synthetic") {
            Some("") => Ok(Self::Synthetic(3)),
            Some(rest) => rest
                .strip_prefix(':')
                .and_then(|seed| seed.parse().ok())
                .map(Self::Synthetic)
                .ok_or_else(|| format!("expected synthetic:SEED, got {s:?}")),
            None => Ok(Self::Dir(s.into())),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// lenet5, slenet5, micronet or smicronet.
    #[arg(long)]
    model: String,
    /// Comma-separated plaintext moduli.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50,100,200,500,1000,2000,5000")]
    t_list: Vec<u64>,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    images: usize,
    /// Weight container path, or `fixture[:SEED]` for random weights.
    #[arg(long)]
    weights: WeightsArg,
    /// Directory with t10k IDX files, or `synthetic[:SEED]`.
    #[arg(long)]
    dataset: DatasetArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Evaluate every test image instead of the first `--images`.
    #[arg(long)]
    full_testset: bool,
    /// Use this ciphertext modulus instead of the security-table choice.
    #[arg(long)]
    override_q: Option<u64>,
    #[arg(long, default_value_t = 128)]
    security_bits: u32,
    /// Write zeros in the millisecond columns.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value_t = DEFAULT_WEIGHT_BITS)]
    weight_bits: u32,
    #[arg(long, default_value_t = DEFAULT_INPUT_LEVELS)]
    input_levels: u32,
    #[arg(long, default_value_t = DEFAULT_ACT_LEVELS)]
    act_levels: u32,
    #[arg(long, default_value_t = DEFAULT_SEQ_LENGTH)]
    seq_length: usize,
}

impl RunArgs {
    fn config(&self) -> Result<SweepConfig> {
        if !ARCHITECTURES.contains(&self.model.as_str()) {
            bail!(
                "unknown model {:?}; expected one of {}",
                self.model,
                ARCHITECTURES.join(", ")
            );
        }
        let weights = match &self.weights {
            WeightsArg::Path(p) => WeightSource::File(p.clone()),
            WeightsArg::Fixture(seed) => WeightSource::Fixture { seed: *seed },
        };
        let dataset = match &self.dataset {
            DatasetArg::Dir(d) => DatasetSource::Idx(d.clone()),
            DatasetArg::Synthetic(seed) => {
                if self.full_testset {
                    bail!("--full-testset needs an IDX dataset directory");
                }
                DatasetSource::Synthetic {
                    seed: *seed,
                    count: self.images,
                }
            }
        };
        let mut cfg = SweepConfig::new(&self.model, weights, dataset);
        cfg.t_list = self.t_list.clone();
        cfg.n = self.n;
        cfg.image_count = (!self.full_testset).then_some(self.images);
        cfg.seed = self.seed;
        cfg.security_bits = self.security_bits;
        cfg.override_q = self.override_q;
        cfg.quant = QuantOptions {
            weight_bits: self.weight_bits,
            input_levels: self.input_levels,
            act_levels: self.act_levels,
        };
        cfg.seq_length = self.seq_length;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn log_cell(model: &str, cell: &CellSummary) {
    eprintln!(
        "{model} t={} q={} images={} both_correct={:.1}% std_correct={:.1}% min_nb={:.2} mean_enc_ms={:.0}",
        cell.t,
        cell.q,
        cell.total(),
        cell.percent(OutcomeCategory::BothCorrect),
        cell.percent(OutcomeCategory::BothCorrect) + cell.percent(OutcomeCategory::StandardCorrect),
        cell.min_nb,
        cell.mean_ms_enc
    );
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let net = cfg.load_network().context("loading weights")?;
    let images = cfg.load_images().context("loading dataset")?;
    eprintln!(
        "{}: {} images, t = {:?}, n = {}",
        cfg.model,
        images.len(),
        cfg.t_list,
        cfg.n
    );
    let report = run_sweep_with(&cfg, &net, &images, |cell| log_cell(&cfg.model, cell))?;
    let files = emit_report(
        &report,
        &args.out,
        ReportOptions {
            timing: !args.no_timing,
        },
    )?;
    for cell in summarize(&report) {
        println!(
            "t={:<6} both_correct={:>6.2}%  standard_only={:>6.2}%  encrypted_only={:>6.2}%  wrong_equal={:>6.2}%  wrong_different={:>6.2}%",
            cell.t,
            cell.percent(OutcomeCategory::BothCorrect),
            cell.percent(OutcomeCategory::StandardCorrect),
            cell.percent(OutcomeCategory::EncryptedCorrect),
            cell.percent(OutcomeCategory::BothWrongEqual),
            cell.percent(OutcomeCategory::BothWrongDifferent),
        );
    }
    println!("wrote {}", files.per_image.display());
    println!("wrote {}", files.summary.display());
    println!("wrote {}", files.trace.display());
    Ok(())
}

fn synth(count: usize, seed: u64, out: &PathBuf) -> Result<()> {
    let set = synthetic_dataset(count, seed);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let images = out.join("t10k-images-idx3-ubyte");
    let labels = out.join("t10k-labels-idx1-ubyte");
    fs::write(&images, encode_idx_images(set.rows, set.cols, &set.images))
        .with_context(|| format!("writing {}", images.display()))?;
    fs::write(&labels, encode_idx_labels(&set.labels)).with_context(|| format!("writing {}", labels.display()))?;
    println!("wrote {count} images to {}", out.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SPYKING_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("SPYKING_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring worker pool")?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Run(args) => run(&args),
        Command::FixtureWeights { model, seed, out } => {
            write_weights(&out, &fixture_weights(&model, seed)?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::SynthDataset { count, seed, out } => synth(count, seed, &out),
        Command::SelectQ { n, security_bits } => {
            let bound = security_bound_bits(n, security_bits)?;
            let q = select_q(n, security_bits)?;
            println!(
                "n={n} security={security_bits} bound_bits={bound} q={q} log2_q={:.2}",
                (q as f64).log2()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
