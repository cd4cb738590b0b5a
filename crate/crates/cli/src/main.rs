mod args;
mod keys;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use weightlock::data::{load_idx_dir, synthetic_dataset, Split, SyntheticConfig};
use weightlock::eval::{
    benchmark_latency, emit_report, evaluate, fine_tune_attack, predictions, random_keys,
    wrong_key_sweep, AttackConfig, AttackInit, EvalTarget, Report, ReportFormat,
};
use weightlock::locker::{load_locked, load_model, save_locked, save_model};
use weightlock::nn::{build_model, presets, train, ParamSource, TrainConfig};
use weightlock::{lock_model, unlock_model, ArchitectureDescriptor, Dataset, LockedModel, Model};

use args::{
    AttackArgs, BenchArgs, Cli, Command, DataArgs, EvalArgs, FormatArg, InferArgs, InitArg,
    LockArgs, OutputArgs, SplitArg, SweepArgs, TargetArgs, TrainArgs, UnlockCheckArgs,
};

/// Bad invocation: reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preset { name } => cmd_preset(&name),
        Command::Train(a) => cmd_train(a),
        Command::Lock(a) => cmd_lock(a),
        Command::UnlockCheck(a) => cmd_unlock_check(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Attack(a) => cmd_attack(a),
    }
}

/// A named input file must exist; anything else is a usage error.
fn existing(path: &Path, what: &str) -> Result<(), UsageError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("{what} not found: {}", path.display())))
    }
}

fn read_arch(path: &Path) -> Result<ArchitectureDescriptor> {
    existing(path, "architecture file")?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading architecture file {}", path.display()))?;
    text.parse()
        .map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn read_model(path: &Path) -> Result<Model> {
    existing(path, "model file")?;
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn read_locked(path: &Path) -> Result<LockedModel> {
    existing(path, "locked model file")?;
    load_locked(path).with_context(|| format!("loading locked model {}", path.display()))
}

fn synthetic_for(arch: &ArchitectureDescriptor, per_class: usize, seed: u64) -> Result<Dataset> {
    let (c, h, w) = arch.input_shape();
    if c != 1 || h != w {
        return Err(UsageError(format!(
            "--synthetic produces 1xNxN images; this model expects {c}x{h}x{w}"
        ))
        .into());
    }
    Ok(synthetic_dataset(&SyntheticConfig {
        num_classes: arch.num_classes(),
        per_class,
        image_size: h,
        seed,
    })?)
}

fn idx_split(dir: &Path, split: Split) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(UsageError(format!("data directory not found: {}", dir.display())).into());
    }
    load_idx_dir(dir, split).with_context(|| format!("loading IDX files from {}", dir.display()))
}

fn load_data(d: &DataArgs, arch: &ArchitectureDescriptor) -> Result<Dataset> {
    let data = match &d.data_dir {
        Some(dir) => idx_split(
            dir,
            match d.split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            },
        )?,
        None => synthetic_for(arch, d.per_class, d.data_seed)?,
    };
    data.check_compatible(arch)?;
    Ok(data)
}

fn format_of(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    }
}

fn write_report<R: Report>(report: &R, out: &OutputArgs) -> Result<()> {
    let format = format_of(out.format);
    match &out.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            emit_report(report, format, BufWriter::new(file))?;
        }
        None => emit_report(report, format, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_preset(name: &str) -> Result<()> {
    let arch = presets::by_name(name).ok_or_else(|| {
        UsageError(format!(
            "unknown preset `{name}` (expected mnist, fashion-mnist or cifar10)"
        ))
    })?;
    print!("{}", arch.to_text());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let arch = read_arch(&a.arch)?;
    let data = load_data(&a.data, &arch)?;
    let mut model = build_model(&arch, a.seed);
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: a.seed,
    };
    let report = train(&mut model, &data, &cfg)?;
    save_model(&model, &a.model_out)
        .with_context(|| format!("writing {}", a.model_out.display()))?;
    eprintln!(
        "trained {} parameters for {} epochs on {} samples -> {}",
        model.param_count(),
        a.epochs,
        data.len(),
        a.model_out.display()
    );
    write_report(&report, &a.output)
}

fn cmd_lock(a: LockArgs) -> Result<()> {
    let key = keys::require(&a.key)?;
    let model = read_model(&a.model)?;
    let locked = lock_model(&model, &key)?;
    save_locked(&locked, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "locked {} parameters -> {}",
        locked.param_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_unlock_check(a: UnlockCheckArgs) -> Result<()> {
    let key = keys::require(&a.key)?;
    let locked = read_locked(&a.locked)?;
    let view = unlock_model(&locked, &key)?;
    println!("format version: {}", locked.format_version());
    println!("digest:         {}", hex::encode(locked.digest()));
    println!("parameters:     {}", view.param_count());
    println!("non-finite:     {}", view.non_finite_count());
    if let Some(path) = &a.model {
        let model = read_model(path)?;
        let same = model.arch() == view.arch()
            && model.params().iter().zip(view.tensors()).all(|(p, v)| {
                p.values
                    .iter()
                    .zip(&v.values)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            });
        if !same {
            bail!("unlocked parameters differ from {}", path.display());
        }
        println!("matches {} bit for bit", path.display());
    }
    Ok(())
}

enum Target {
    Plain(Model),
    Locked(LockedModel, weightlock::MasterKey),
}

impl Target {
    fn load(t: &TargetArgs) -> Result<Self> {
        match (&t.model, &t.locked) {
            (Some(path), None) => {
                if t.key.is_given() {
                    return Err(UsageError("a key only applies to --locked models".into()).into());
                }
                Ok(Target::Plain(read_model(path)?))
            }
            (None, Some(path)) => {
                let key = keys::require(&t.key)?;
                Ok(Target::Locked(read_locked(path)?, key))
            }
            _ => Err(UsageError("pass exactly one of --model or --locked".into()).into()),
        }
    }

    fn arch(&self) -> &ArchitectureDescriptor {
        match self {
            Target::Plain(m) => m.arch(),
            Target::Locked(lm, _) => lm.arch(),
        }
    }

    fn as_eval(&self) -> EvalTarget<'_> {
        match self {
            Target::Plain(m) => EvalTarget::Plain(m),
            Target::Locked(lm, key) => EvalTarget::Locked(lm, key),
        }
    }
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let target = Target::load(&a.target)?;
    let data = load_data(&a.data, target.arch())?;
    if a.index >= data.len() {
        return Err(UsageError(format!(
            "--index {} is out of range for {} samples",
            a.index,
            data.len()
        ))
        .into());
    }
    let one = data.select(&[a.index], format!("{}[{}]", data.name(), a.index));
    let prediction = predictions(target.as_eval(), &one)?.remove(0);
    write_report(&prediction, &a.output)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let target = Target::load(&a.target)?;
    let data = load_data(&a.data, target.arch())?;
    write_report(&evaluate(target.as_eval(), &data)?, &a.output)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    if a.keys == 0 {
        return Err(UsageError("--keys must be at least 1".into()).into());
    }
    let true_key = keys::load(&a.key)?;
    let locked = read_locked(&a.locked)?;
    let data = load_data(&a.data, locked.arch())?;
    let report = wrong_key_sweep(&locked, &data, a.keys, a.seed, true_key.as_ref())?;
    write_report(&report, &a.output)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(UsageError("--trials must be at least 1".into()).into());
    }
    let key = keys::require(&a.key)?;
    let model = read_model(&a.model)?;
    let locked = read_locked(&a.locked)?;
    if model.arch() != locked.arch() {
        return Err(UsageError("--model and --locked have different architectures".into()).into());
    }
    let data = load_data(&a.data, locked.arch())?;
    let report = benchmark_latency(&model, &locked, &key, &data, a.trials, a.warmup)?;
    write_report(&report, &a.output)
}

fn attack_data(a: &AttackArgs, arch: &ArchitectureDescriptor) -> Result<(Dataset, Dataset)> {
    let (pool, val) = match &a.data_dir {
        Some(dir) => (idx_split(dir, Split::Train)?, idx_split(dir, Split::Test)?),
        None => (
            synthetic_for(arch, a.per_class, a.data_seed)?,
            synthetic_for(arch, a.val_per_class, a.val_seed)?,
        ),
    };
    pool.check_compatible(arch)?;
    val.check_compatible(arch)?;
    Ok((pool, val))
}

fn cmd_attack(a: AttackArgs) -> Result<()> {
    let locked = read_locked(&a.locked)?;
    let guess = match keys::load(&a.key)? {
        Some(k) => k,
        None => random_keys(1, a.guess_seed, None).remove(0),
    };
    let init = match a.init {
        InitArg::WrongKey => AttackInit::WrongKeyDecrypt,
        InitArg::Raw => AttackInit::RawLocked,
        InitArg::Fresh => AttackInit::Fresh { seed: a.init_seed },
    };
    let (pool, val) = attack_data(&a, locked.arch())?;
    let cfg = AttackConfig {
        fraction: a.fraction,
        split_seed: a.split_seed,
        train: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.lr,
            seed: a.train_seed,
        },
    };
    let curve = fine_tune_attack(&locked, &guess, init, &pool, &val, &cfg)?;
    write_report(&curve, &a.output)
}
