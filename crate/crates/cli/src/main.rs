//! `dsb`: fit, generate, benchmark and synthesize from one config file.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dsb::density::relevance_weights;
use dsb::evalbench::{run_benchmark, BenchVariant};
use dsb::irvae::{model_file_bytes, read_model_file, train, LossVariant, ModelFile};
use dsb::latentgen::{generate, GenConfig, GenVariant};
use dsb::seed_path;
use dsb::synthdata::make_imbalanced;
use dsb::tabular::{apply_encode, fit_encode, load_csv, write_csv, Dataset, Schema};
use serde::Serialize;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dsb", version, about = "Disentangled deep smoothed bootstrap for imbalanced regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON, or TOML with a .toml extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides `rng_seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// fit: loss variant or a generation variant whose model to train.
    /// generate: generation variant. benchmark: comma-separated variant list.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Worker threads for the benchmark.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write `model.dsb` and `trace.json`.
    Fit,
    /// Write `synthetic.csv` with its schema and provenance.
    Generate {
        /// Model file; defaults to `<out>/model.dsb`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the K-fold ablation and write `report.json` and `report.csv`.
    Benchmark,
    /// Write the configured synthetic dataset as `data.csv` and `data.schema.json`.
    Synth,
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<dsb::Error> for CliError {
    fn from(e: dsb::Error) -> Self {
        match e {
            dsb::Error::InvalidArgument(_) | dsb::Error::Incompatible(_) => {
                CliError::usage(e.to_string())
            }
            _ => CliError::runtime(e.to_string()),
        }
    }
}

/// Output files collected in memory and written together at the end, so a
/// failed run leaves nothing behind.
struct Staged {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    fn new(dir: &Path) -> Self {
        Staged {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let io = |p: &Path, e: std::io::Error| CliError::runtime(format!("{}: {e}", p.display()));
        fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        let mut tmps = Vec::new();
        for (name, bytes) in &self.files {
            let tmp = self.dir.join(format!(".{name}.tmp"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for t in &tmps {
                    let _ = fs::remove_file(t);
                }
                return Err(io(&tmp, e));
            }
            tmps.push(tmp);
        }
        let mut written = Vec::new();
        for ((name, _), tmp) in self.files.iter().zip(&tmps) {
            let dst = self.dir.join(name);
            fs::rename(tmp, &dst).map_err(|e| io(&dst, e))?;
            written.push(dst);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    run_config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match (&cfg.data, &cfg.schema) {
        (Some(data), Some(schema)) => {
            let schema = Schema::load(schema)?;
            Ok(load_csv(data, &schema)?)
        }
        (Some(_), None) => Err(CliError::usage("`data` needs a `schema` path")),
        (None, Some(_)) => Err(CliError::usage("`schema` given without `data`")),
        (None, None) => Ok(make_imbalanced(&cfg.synth_spec())?),
    }
}

fn csv_bytes(ds: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(buf)
}

fn loss_variant_arg(s: &str) -> Result<LossVariant, CliError> {
    if let Ok(v) = s.parse::<LossVariant>() {
        return Ok(v);
    }
    match s.parse::<GenVariant>() {
        Ok(g) => g.required_model().ok_or_else(|| {
            CliError::usage(format!("variant {g} does not use a trained model"))
        }),
        Err(_) => Err(CliError::usage(format!("unknown variant `{s}`"))),
    }
}

fn cmd_fit(cfg: &RunConfig, variant: Option<&str>) -> Result<Staged, CliError> {
    let ds = load_dataset(cfg)?;
    let mut tc = cfg.train.clone();
    if let Some(v) = variant {
        tc.loss_variant = loss_variant_arg(v)?;
    }
    tc.rng_seed = seed_path!(cfg.rng_seed, "fit");
    let encoded = fit_encode(&ds);
    let arch = cfg.arch.resolve(encoded.dim());
    let out = train(&encoded, arch, tc)?;

    let mut staged = Staged::new(&cfg.out);
    let file = ModelFile {
        model: out.model,
        run_config: Some(cfg.to_json()),
    };
    staged.add("model.dsb", model_file_bytes(&file)?);
    #[derive(Serialize)]
    struct Trace<'a> {
        loss_variant: LossVariant,
        epochs: &'a [dsb::irvae::EpochTrace],
    }
    staged.add_json(
        "trace.json",
        &WithConfig {
            run_config: cfg,
            body: Trace {
                loss_variant: file.model.train_config.loss_variant,
                epochs: &out.trace,
            },
        },
    );
    Ok(staged)
}

fn cmd_generate(
    cfg: &RunConfig,
    variant: Option<&str>,
    model_path: Option<&Path>,
) -> Result<Staged, CliError> {
    let variant = match variant {
        Some(v) => v.parse::<GenVariant>()?,
        None => cfg.generate.variant,
    };
    let ds = load_dataset(cfg)?;
    let model = match variant.required_model() {
        None => None,
        Some(_) => {
            let path = model_path
                .map(Path::to_path_buf)
                .unwrap_or_else(|| cfg.out.join("model.dsb"));
            Some(read_model_file(&path)?.model)
        }
    };
    let (target, alpha, kde) = match &model {
        Some(m) => (
            apply_encode(&m.encoding, &ds)?.target,
            m.train_config.alpha,
            m.train_config.kde.clone(),
        ),
        None => (fit_encode(&ds).target, cfg.train.alpha, cfg.train.kde.clone()),
    };
    let weights = relevance_weights(&target.to_vec(), alpha, &kde)?;
    let gc = GenConfig {
        m: cfg.generate.m,
        hmult: cfg.generate.hmult,
        rng_seed: seed_path!(cfg.rng_seed, "generate"),
        ..GenConfig::new(variant)
    };
    let batch = generate(model.as_ref(), &ds, &weights, &gc)?;

    let mut staged = Staged::new(&cfg.out);
    staged.add("synthetic.csv", csv_bytes(&batch.rows)?);
    staged.add_json("synthetic.schema.json", &Schema::of(&batch.rows));
    staged.add_json(
        "synthetic.provenance.json",
        &WithConfig {
            run_config: cfg,
            body: batch.provenance_file(),
        },
    );
    Ok(staged)
}

fn cmd_benchmark(
    cfg: &RunConfig,
    variant: Option<&str>,
    threads: Option<usize>,
) -> Result<Staged, CliError> {
    let mut bc = cfg.bench_config();
    if let Some(list) = variant {
        bc.variants = list
            .split(',')
            .map(|s| s.trim().parse::<BenchVariant>())
            .collect::<dsb::Result<_>>()?;
    }
    bc.validate()?;
    let ds = load_dataset(cfg)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker threads: {e}")))?;
    let report = pool.install(|| run_benchmark(&ds, &bc))?;
    if report.failed_cells == report.cells.len() {
        let first = report.cells.iter().find_map(|c| c.error.clone()).unwrap_or_default();
        return Err(CliError::runtime(format!("every benchmark cell failed; first error: {first}")));
    }
    if report.failed_cells > 0 {
        eprintln!(
            "warning: {} of {} cells failed; see report.json",
            report.failed_cells,
            report.cells.len()
        );
    }
    let mut staged = Staged::new(&cfg.out);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    #[derive(Serialize)]
    struct Body<'a> {
        report: &'a dsb::evalbench::BenchReport,
    }
    staged.add_json(
        "report.json",
        &WithConfig {
            run_config: cfg,
            body: Body { report: &report },
        },
    );
    staged.add("report.csv", csv);
    Ok(staged)
}

fn cmd_synth(cfg: &RunConfig) -> Result<Staged, CliError> {
    let spec = cfg.synth_spec();
    let ds = make_imbalanced(&spec)?;
    let mut staged = Staged::new(&cfg.out);
    staged.add("data.csv", csv_bytes(&ds)?);
    staged.add_json("data.schema.json", &Schema::of(&ds));
    #[derive(Serialize)]
    struct Body<'a> {
        synth: &'a dsb::synthdata::SynthSpec,
    }
    staged.add_json(
        "data.json",
        &WithConfig {
            run_config: cfg,
            body: Body { synth: &spec },
        },
    );
    Ok(staged)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let variant = cli.variant.as_deref();
    let staged = match &cli.command {
        Command::Fit => cmd_fit(&cfg, variant)?,
        Command::Generate { model } => cmd_generate(&cfg, variant, model.as_deref())?,
        Command::Benchmark => cmd_benchmark(&cfg, variant, cli.threads)?,
        Command::Synth => cmd_synth(&cfg)?,
    };
    for p in staged.commit()? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
