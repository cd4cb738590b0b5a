use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "weightlock",
    version,
    about = "Train, lock and evaluate key-locked neural network models",
    long_about = "Train, lock and evaluate key-locked neural network models.\n\n\
        Exit codes: 0 success, 1 runtime failure, 2 usage error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the text of a built-in architecture (mnist, fashion-mnist, cifar10).
    Preset { name: String },
    /// Train a plaintext model (offline mode) and write it as a DLM1 file.
    Train(TrainArgs),
    /// Lock a plaintext model with a master key and write a DLK1 file.
    Lock(LockArgs),
    /// Verify a locked file and unlock it, optionally comparing against the plaintext model.
    UnlockCheck(UnlockCheckArgs),
    /// Classify a single sample.
    Infer(InferArgs),
    /// Accuracy of a plaintext model, or of a locked model under a key.
    Eval(EvalArgs),
    /// Accuracy of a locked model under many random wrong keys.
    Sweep(SweepArgs),
    /// Single-input latency of plaintext vs. unlock-per-query inference.
    Bench(BenchArgs),
    /// Fine-tune a locked model on a manifest subset, as a keyless adversary would.
    Attack(AttackArgs),
}

/// Key material. Never printed.
#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("key_source").args(["key", "key_file", "key_env"]).multiple(false)))]
pub struct KeyArgs {
    /// Master key as 32 hex characters.
    #[arg(long, value_name = "HEX")]
    pub key: Option<String>,
    /// File holding the raw 16-byte master key.
    #[arg(long, value_name = "PATH")]
    pub key_file: Option<PathBuf>,
    /// Name of an environment variable holding the key as 32 hex characters.
    #[arg(long, value_name = "VAR")]
    pub key_env: Option<String>,
}

impl KeyArgs {
    pub fn is_given(&self) -> bool {
        self.key.is_some() || self.key_file.is_some() || self.key_env.is_some()
    }
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("source").args(["synthetic", "data_dir"]).required(true)))]
pub struct DataArgs {
    /// Use the seeded synthetic stroke dataset sized to the model's input.
    #[arg(long)]
    pub synthetic: bool,
    /// Synthetic samples per class.
    #[arg(long, default_value_t = 100, requires = "synthetic")]
    pub per_class: usize,
    /// Synthetic generator seed.
    #[arg(long, default_value_t = 0, requires = "synthetic")]
    pub data_seed: u64,
    /// Directory with MNIST-layout IDX files (train-*/t10k-*).
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Which IDX split to read from --data-dir.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Architecture description file.
    #[arg(long, value_name = "PATH")]
    pub arch: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f32,
    /// Seed for weight initialization and batch shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the plaintext model.
    #[arg(long, value_name = "PATH")]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LockArgs {
    /// Plaintext model (DLM1).
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub key: KeyArgs,
    /// Where to write the locked model (DLK1).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct UnlockCheckArgs {
    /// Locked model (DLK1).
    #[arg(long, value_name = "PATH")]
    pub locked: PathBuf,
    #[command(flatten)]
    pub key: KeyArgs,
    /// Plaintext model to compare the unlocked parameters against bit for bit.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
}

/// A plaintext model, or a locked model plus key.
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("target").args(["model", "locked"]).required(true)))]
pub struct TargetArgs {
    /// Plaintext model (DLM1).
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Locked model (DLK1); requires a key.
    #[arg(long, value_name = "PATH")]
    pub locked: Option<PathBuf>,
    #[command(flatten)]
    pub key: KeyArgs,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Index of the sample to classify.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Locked model (DLK1).
    #[arg(long, value_name = "PATH")]
    pub locked: PathBuf,
    /// Number of random wrong keys.
    #[arg(long, default_value_t = 100)]
    pub keys: usize,
    /// Seed for drawing the keys.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional true key; random draws equal to it are discarded.
    #[command(flatten)]
    pub key: KeyArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Plaintext model (DLM1).
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Locked model (DLK1).
    #[arg(long, value_name = "PATH")]
    pub locked: PathBuf,
    #[command(flatten)]
    pub key: KeyArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Measured trials per path.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Discarded trials per path before measuring.
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitArg {
    /// Parameters decrypted with the guessed (wrong) key.
    WrongKey,
    /// The locked bytes read directly as floats.
    Raw,
    /// Fresh seeded initialization (control arm).
    Fresh,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("pool").args(["synthetic", "data_dir"]).required(true)))]
pub struct AttackArgs {
    /// Locked model (DLK1).
    #[arg(long, value_name = "PATH")]
    pub locked: PathBuf,
    /// Starting point for retraining.
    #[arg(long, value_enum, default_value_t = InitArg::WrongKey)]
    pub init: InitArg,
    /// The adversary's key guess. Drawn at random from --guess-seed when omitted.
    #[command(flatten)]
    pub key: KeyArgs,
    #[arg(long, default_value_t = 0)]
    pub guess_seed: u64,
    /// Initialization seed for --init fresh.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Share of the training pool available to the adversary, in (0, 1].
    #[arg(long, default_value_t = 0.10, value_parser = parse_fraction)]
    pub fraction: f64,
    /// Seed for the stratified manifest selection.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f32,
    /// Seed for batch shuffling during retraining.
    #[arg(long, default_value_t = 0)]
    pub train_seed: u64,
    /// Synthetic pool and validation sets (pool from --data-seed, validation from --val-seed).
    #[arg(long)]
    pub synthetic: bool,
    /// Synthetic pool samples per class.
    #[arg(long, default_value_t = 100, requires = "synthetic")]
    pub per_class: usize,
    #[arg(long, default_value_t = 0, requires = "synthetic")]
    pub data_seed: u64,
    /// Synthetic validation samples per class.
    #[arg(long, default_value_t = 50, requires = "synthetic")]
    pub val_per_class: usize,
    #[arg(long, default_value_t = 1, requires = "synthetic")]
    pub val_seed: u64,
    /// IDX directory: the pool is the train split, validation the test split.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f > 0.0 && f <= 1.0 {
        Ok(f)
    } else {
        Err(format!("{f} is outside (0, 1]"))
    }
}
