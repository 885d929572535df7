//! Subcommands of the `evobase` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evobase_core::config::Settings;
use evobase_core::pipeline::{ModelSet, Timeline};
use evobase_core::svm::{DistanceTag, TrainConfig};
use evobase_core::synth::generate_corpus;
use evobase_core::training::{build_datasets, cross_validate, read_corpus, train_model_set, write_corpus, CvReport};
use serde::Serialize;

use crate::engine::{Engine, Source, TimelineSource};
use crate::server::{serve, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "evobase", version, about = "Timelines of how names of places, people and products changed")]
pub struct Cli {
    /// TOML settings file; EVOBASE_* environment variables override it.
    #[arg(long, global = true, env = "EVOBASE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the four models from a labeled corpus.
    Train(TrainArgs),
    /// Cross-validate each dataset of a labeled corpus.
    Crossval(CrossvalArgs),
    /// Build the timeline for an article, a web page or a local file.
    Timeline(TimelineArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Structured,
}

#[derive(Debug, Args)]
pub struct SvmArgs {
    /// Soft-margin penalty.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// KKT tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Consecutive quiet sweeps before stopping.
    #[arg(long, default_value_t = 10)]
    pub max_passes: usize,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// JSONL corpus of articles with positive sentence ranges.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Negatives sampled per positive.
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub svm: SvmArgs,
    /// Directory receiving d0.json, d1.json, d2.json, all.json and cv_report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Folds for the cross-validation report.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Skip cross-validation.
    #[arg(long)]
    pub no_cv: bool,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write the reports as JSON to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    /// Encyclopedia article title.
    #[arg(conflicts_with_all = ["url", "file"], required_unless_present_any = ["url", "file"])]
    pub query: Option<String>,
    /// Web page to extract the main text from
    #[arg(long, conflicts_with = "file")]
    pub url: Option<String>,
    /// Local plain-text file
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Directory holding the four model files.
    #[arg(long, env = "EVOBASE_MODELS")]
    pub models: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "EVOBASE_MODELS")]
    pub models: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Directory with the built UI, served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Per-request compute limit in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 80)]
    pub articles: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SvmArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            c: self.c,
            tol: self.tol,
            max_passes: self.max_passes,
            seed,
        }
    }
}

/// Date stamped into model metadata: `SOURCE_DATE_EPOCH` if set, so that
/// retraining can reproduce files byte for byte, otherwise today.
pub fn training_date() -> anyhow::Result<String> {
    let now = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v.trim().parse().context("SOURCE_DATE_EPOCH is not an integer")?;
            DateTime::<Utc>::from_timestamp(secs, 0).context("SOURCE_DATE_EPOCH out of range")?
        }
        Err(_) => Utc::now(),
    };
    Ok(now.format("%Y-%m-%d").to_string())
}

#[derive(Debug, Serialize)]
struct Skipped {
    tag: DistanceTag,
    reason: String,
}

#[derive(Debug, Serialize)]
struct CvSummary<'a> {
    k: usize,
    seed: u64,
    ratio: f64,
    reports: &'a [CvReport],
    skipped: &'a [Skipped],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn print_report(out: &mut dyn Write, r: &CvReport) -> std::io::Result<()> {
    let folds: Vec<String> = r.fold_accuracies.iter().map(|a| format!("{a:.3}")).collect();
    writeln!(out, "{:<4} k={:<3} mean={:.4}  folds=[{}]", r.tag.as_str(), r.k, r.mean_accuracy, folds.join(" "))
}

fn train(args: &TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let corpus = read_corpus(&args.data.corpus).with_context(|| format!("reading corpus {}", args.data.corpus.display()))?;
    let datasets = build_datasets(&corpus, args.data.ratio, args.data.seed)?;
    let config = args.svm.config(args.data.seed);
    let models = train_model_set(&datasets, &config, &training_date()?)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    models.save_dir(&args.out)?;
    writeln!(out, "wrote 4 models to {} (version {})", args.out.display(), models.version())?;

    if args.no_cv {
        return Ok(());
    }
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for dataset in datasets.iter() {
        match cross_validate(dataset, args.k, &config, args.data.seed) {
            Ok(r) => {
                print_report(out, &r)?;
                reports.push(r);
            }
            Err(e) => {
                writeln!(out, "{:<4} skipped: {e}", dataset.tag.as_str())?;
                skipped.push(Skipped {
                    tag: dataset.tag,
                    reason: e.to_string(),
                });
            }
        }
    }
    write_json(
        &args.out.join("cv_report.json"),
        &CvSummary {
            k: args.k,
            seed: args.data.seed,
            ratio: args.data.ratio,
            reports: &reports,
            skipped: &skipped,
        },
    )
}

fn crossval(args: &CrossvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let corpus = read_corpus(&args.data.corpus).with_context(|| format!("reading corpus {}", args.data.corpus.display()))?;
    let datasets = build_datasets(&corpus, args.data.ratio, args.data.seed)?;
    let config = args.svm.config(args.data.seed);
    let reports = datasets
        .iter()
        .map(|d| cross_validate(d, args.k, &config, args.data.seed).with_context(|| format!("cross-validating {}", d.tag)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    match args.format {
        Format::Table => {
            for r in &reports {
                print_report(out, r)?;
            }
        }
        Format::Structured => {
            serde_json::to_writer_pretty(&mut *out, &reports)?;
            writeln!(out)?;
        }
    }
    if let Some(path) = &args.report {
        write_json(
            path,
            &CvSummary {
                k: args.k,
                seed: args.data.seed,
                ratio: args.data.ratio,
                reports: &reports,
                skipped: &[],
            },
        )?;
    }
    Ok(())
}

/// Human-readable rendering of a timeline.
pub fn render_table(t: &Timeline) -> String {
    let mut s = format!(
        "Timeline for \"{}\" (models {}, {} entries)\n",
        t.query,
        t.model_version,
        t.entries.len()
    );
    if t.entries.is_empty() {
        s.push_str("no evolutions found\n");
        return s;
    }
    s.push_str("YEAR  DIST  SENTENCES  TEXT\n");
    for e in &t.entries {
        let text = e.text.split_whitespace().collect::<Vec<_>>().join(" ");
        s.push_str(&format!(
            "{:<5} d{:<4} {:<10} {}\n",
            e.year,
            e.distance,
            format!("{}-{}", e.first_sentence, e.last_sentence),
            text
        ));
    }
    s
}

fn timeline(args: &TimelineArgs, settings: &Settings, out: &mut dyn Write) -> anyhow::Result<()> {
    let source = match (&args.query, &args.url, &args.file) {
        (Some(q), None, None) => Source::Query(q.clone()),
        (None, Some(u), None) => Source::Url(u.clone()),
        (None, None, Some(f)) => Source::File(f.clone()),
        _ => bail!("give exactly one of QUERY, --url or --file"),
    };
    let models = ModelSet::load_dir(&args.models).with_context(|| format!("loading models from {}", args.models.display()))?;
    let engine = Engine::new(models, settings).context("loading word lists")?;
    let t = engine.timeline(&source)?;
    match args.format {
        Format::Table => out.write_all(render_table(&t).as_bytes())?,
        Format::Structured => {
            serde_json::to_writer_pretty(&mut *out, &t)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let corpus: Vec<_> = generate_corpus(args.articles, args.seed).into_iter().map(|(a, _)| a).collect();
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_corpus(&mut w, &corpus)?;
    w.flush()?;
    let positives: usize = corpus.iter().map(|a| a.positives.len()).sum();
    writeln!(out, "wrote {} articles with {positives} positives to {}", corpus.len(), args.out.display())?;
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let settings = Settings::load(cli.config.as_deref()).context("loading settings")?;
    match cli.command {
        Command::Train(args) => train(&args, out),
        Command::Crossval(args) => crossval(&args, out),
        Command::Timeline(args) => timeline(&args, &settings, out),
        Command::Synth(args) => synth(&args, out),
        Command::Serve(args) => {
            let config = ServiceConfig {
                listen: args.listen,
                model_dir: args.models,
                settings,
                static_dir: args.static_dir,
                timeout: Duration::from_secs(args.timeout_secs),
            };
            tokio::runtime::Runtime::new()?.block_on(serve(config))
        }
    }
}
