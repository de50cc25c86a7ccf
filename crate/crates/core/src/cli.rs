//! The `pdh` command line: argument parsing and one function per subcommand.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 self-test failure.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::codec::{binarize, read_codes, search_topk, write_codes, CodeBook, CodeEntry, HashCode};
use crate::error::{PdhError, Result};
use crate::eval::evaluate;
use crate::manifest::{sidecar, RunManifest};
use crate::model::{logits, posteriors, read_checkpoint, write_checkpoint, ModelConfig};
use crate::numerics::{Rng, SgdConfig};
use crate::selftest::{run_selftest_with_progress, Level, SelftestOptions};
use crate::synth::BlobSpec;
use crate::trainer::{load_dataset, load_idx, save_dataset, train_with_progress, Augmentation, LabeledDataset, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

pub const DEFAULT_LR: f64 = 1e-4;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPOCHS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "pdh", version, about = "Probabilistic deep hashing: train, encode, search, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gaussian-blob dataset (PDHD) plus its generating parameters.
    Synth(SynthArgs),
    /// Train a hashing network and write a PDHM checkpoint.
    Train(TrainArgs),
    /// Encode a dataset into PDHC hash codes.
    Encode(EncodeArgs),
    /// Top-k Hamming search of query codes against gallery codes.
    Query(QueryArgs),
    /// mAP and precision@k of query codes against gallery codes.
    Eval(EvalArgs),
    /// Run the built-in property checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A PDHD file, or an IDX image file together with `--labels`.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// IDX label file; required when `--data` is an IDX image file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Keep only the first N samples of every class.
    #[arg(long)]
    pub per_class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "mlp-small")]
    pub arch: String,
    #[arg(long, default_value_t = 12)]
    pub bits: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_MOMENTUM)]
    pub momentum: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random integer shift of image samples, in pixels (0 disables).
    #[arg(long, default_value_t = 0)]
    pub shift: usize,
    #[arg(long)]
    pub flip: bool,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out_codes: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub gallery_codes: PathBuf,
    #[arg(long)]
    pub query_codes: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// TSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gallery_codes: PathBuf,
    #[arg(long)]
    pub query_codes: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600,700,800,900,1000")]
    pub k_list: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value = "fast")]
    pub level: Level,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Swap in a posterior with the wrong sign convention.
    #[arg(long, hide = true)]
    pub tamper_sigmoid: bool,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        // a closed downstream pipe (`pdh query ... | head`) is not a failure
        Err(PdhError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Synth(a) => cmd_synth(&a).map(|_| EXIT_OK),
        Command::Train(a) => cmd_train(&a).map(|_| EXIT_OK),
        Command::Encode(a) => cmd_encode(&a).map(|_| EXIT_OK),
        Command::Query(a) => cmd_query(&a).map(|_| EXIT_OK),
        Command::Eval(a) => cmd_eval(&a).map(|_| EXIT_OK),
        Command::Selftest(a) => cmd_selftest(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = BlobSpec::new(a.classes, a.per_class, a.dim, a.spread)?;
    let ds = spec.generate(&mut Rng::new(a.seed))?;
    save_dataset(&a.out, &ds)?;
    std::fs::write(sidecar(&a.out, "world"), spec.describe(a.seed))?;
    RunManifest::new("synth")
        .flag("classes", a.classes)
        .flag("per_class", a.per_class)
        .flag("dim", a.dim)
        .flag("spread", a.spread)
        .seed(a.seed)
        .write_beside(&a.out)?;
    Ok(())
}

fn is_idx_images(path: &Path) -> Result<bool> {
    let mut head = [0u8; 4];
    File::open(path)?.read_exact(&mut head)?;
    Ok(u32::from_be_bytes(head) == crate::trainer::IDX_IMAGES_MAGIC)
}

/// Loads the dataset named by `a` and records it in `manifest`.
fn load_data(a: &DataArgs, manifest: RunManifest) -> Result<(LabeledDataset, RunManifest)> {
    let mut manifest = manifest.input(&a.data)?;
    let ds = if is_idx_images(&a.data)? {
        let labels = a.labels.as_ref().ok_or_else(|| {
            PdhError::InvalidArgument(format!("{} is an IDX image file; pass --labels", a.data.display()))
        })?;
        manifest = manifest.input(labels)?;
        load_idx(&a.data, labels)?
    } else {
        load_dataset(&a.data)?
    };
    match a.per_class {
        Some(0) => Err(PdhError::InvalidArgument("--per-class must be >= 1".into())),
        Some(n) => Ok((ds.take_per_class(n), manifest.flag("per_class", n))),
        None => Ok((ds, manifest)),
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let (ds, manifest) = load_data(&a.data, RunManifest::new("train"))?;
    let mcfg = ModelConfig::preset(&a.arch, ds.shape(), a.bits)?;
    let tcfg = TrainConfig {
        code_bits: a.bits,
        sgd: SgdConfig::new(a.lr, a.momentum)?,
        epochs: a.epochs,
        augmentation: Augmentation { shift_pixels: a.shift, horizontal_flip: a.flip },
        seed: a.seed,
    };
    let report_every = (crate::trainer::steps_per_epoch(&ds)).max(1);
    let quiet = a.quiet;
    let mut window = 0.0;
    let outcome = train_with_progress(&ds, &mcfg, &tcfg, |step, loss| {
        window += loss;
        if (step + 1) % report_every == 0 {
            if !quiet {
                eprintln!("epoch {:>4}  mean loss {:.4}", (step + 1) / report_every, window / report_every as f64);
            }
            window = 0.0;
        }
    })?;

    let mut w = create(&a.out_model)?;
    write_checkpoint(&mut w, &outcome.params)?;
    w.flush()?;
    let mut lw = create(&sidecar(&a.out_model, "loss"))?;
    for (step, loss) in outcome.loss_history.iter().enumerate() {
        writeln!(lw, "{step}\t{loss}")?;
    }
    lw.flush()?;
    manifest
        .flag("arch", &a.arch)
        .flag("bits", a.bits)
        .flag("lr", a.lr)
        .flag("momentum", a.momentum)
        .flag("epochs", a.epochs)
        .flag("shift", a.shift)
        .flag("flip", a.flip)
        .seed(a.seed)
        .write_beside(&a.out_model)?;
    Ok(())
}

/// Codes for every sample of `ds`; ids are sample indices.
pub fn encode_dataset(params: &crate::model::Parameters, ds: &LabeledDataset) -> Result<CodeBook> {
    if ds.is_empty() {
        return Err(PdhError::EmptyBatch);
    }
    if params.config().input != ds.shape() {
        return Err(PdhError::DimensionMismatch(format!(
            "model input {:?} vs data {:?}",
            params.config().input,
            ds.shape()
        )));
    }
    let entries = (0..ds.len())
        .map(|k| {
            let code = binarize(&posteriors(&logits(params, ds.image(k))?));
            Ok(CodeEntry { id: k as u64, label: ds.label(k), code })
        })
        .collect::<Result<Vec<_>>>()?;
    CodeBook::new(params.config().code_bits, entries)
}

pub fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let manifest = RunManifest::new("encode").input(&a.model)?;
    let params = read_checkpoint(&mut std::io::BufReader::new(File::open(&a.model)?))?;
    let (ds, manifest) = load_data(&a.data, manifest)?;
    let book = encode_dataset(&params, &ds)?;
    let mut w = create(&a.out_codes)?;
    write_codes(&mut w, &book)?;
    w.flush()?;
    manifest.write_beside(&a.out_codes)?;
    Ok(())
}

fn load_codes(path: &Path) -> Result<CodeBook> {
    read_codes(&mut std::io::BufReader::new(File::open(path)?))
}

fn load_pair(gallery: &Path, queries: &Path) -> Result<(CodeBook, CodeBook)> {
    let (g, q) = (load_codes(gallery)?, load_codes(queries)?);
    if g.bits() != q.bits() {
        return Err(PdhError::LengthMismatch { left: g.bits(), right: q.bits() });
    }
    Ok((g, q))
}

pub fn cmd_query(a: &QueryArgs) -> Result<()> {
    let (gallery, queries) = load_pair(&a.gallery_codes, &a.query_codes)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "query_id\trank\tid\tdistance\tlabel")?;
    for q in queries.entries() {
        for (rank, nb) in search_topk(&gallery, &q.code, a.k)?.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}\t{}", q.id, rank + 1, nb.id, nb.distance, nb.label)?;
        }
    }
    out.flush()?;
    if let Some(p) = &a.out {
        RunManifest::new("query")
            .flag("k", a.k)
            .input(&a.gallery_codes)?
            .input(&a.query_codes)?
            .write_beside(p)?;
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (gallery, queries) = load_pair(&a.gallery_codes, &a.query_codes)?;
    let qs: Vec<(u16, HashCode)> = queries.entries().iter().map(|e| (e.label, e.code.clone())).collect();
    let report = evaluate(&gallery, &qs, &a.k_list)?;
    std::fs::write(&a.out, report.to_key_value())?;
    let table = report.to_table();
    std::fs::write(sidecar(&a.out, "table"), &table)?;
    print!("{table}");
    let ks: Vec<String> = a.k_list.iter().map(usize::to_string).collect();
    RunManifest::new("eval")
        .flag("k_list", ks.join(","))
        .input(&a.gallery_codes)?
        .input(&a.query_codes)?
        .write_beside(&a.out)?;
    Ok(())
}

fn wrong_sign_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cmd_selftest(a: &SelftestArgs) -> Result<i32> {
    let mut opts = SelftestOptions::new(a.level);
    opts.seed = a.seed;
    if a.tamper_sigmoid {
        opts.sigmoid = wrong_sign_sigmoid;
    }
    let mut out = std::io::stdout().lock();
    let report = run_selftest_with_progress(&opts, |r| {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{tag} {:<22} {:>7.2}s  {}", r.name, r.seconds, r.detail);
    })?;
    let failed = report.results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} properties, {failed} failed", report.results.len());
    Ok(if report.passed() { EXIT_OK } else { EXIT_SELFTEST })
}
