//! Command-line entry point. Flags only locate files and override seeds; all
//! experiment state lives in the config file. Exit codes: 0 success, 1 usage
//! error, 2 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::baselines::{run_baseline, BaselineKind};
use crate::config::ExperimentConfig;
use crate::corpus::{clean_account, load_corpus, write_corpus, CorpusError};
use crate::eval::{
    ablation_suite, chunk_size_sweep, featurize_accounts, generate_synthetic_corpus,
    stratified_kfold, topk_sweep, write_embeddings_txt, write_lexicon_tsv, EvalReport, FoldPlan,
    ModelSpec, SyntheticSpec,
};
use crate::features::FeatureGroup;
use crate::seqnet::{hyper_search, train, AccountSequences, LabeledSequence, Model};

#[derive(Debug, Parser)]
#[command(
    name = "factuality",
    version,
    about = "Account-level factuality classification over tweet timelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count (reserved; experiments run single-threaded).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a raw timeline file: drop duplicate and link/media-only tweets.
    Ingest {
        /// Input timeline JSONL.
        #[arg(long)]
        input: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Unused by ingest; accepted for flag uniformity.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Generate a synthetic corpus plus matching lexicons and a ready config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Unused by synth; accepted for flag uniformity.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 10)]
        accounts_per_class: usize,
        #[arg(long, default_value_t = 400)]
        tweets_per_account: usize,
        /// Signal strength in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        strength: f64,
        #[arg(long, default_value_t = 16)]
        embedding_dim: usize,
        #[arg(long, default_value_t = 20)]
        signature_period: usize,
        /// Comma-separated feature groups carrying the signal.
        #[arg(long, value_delimiter = ',')]
        signal_groups: Vec<String>,
    },
    /// Fit one model on the full corpus and write a checkpoint.
    Train(CommonArgs),
    /// Cross-validated evaluation of the chunk model.
    Evaluate(CommonArgs),
    /// Feature-group ablation suite.
    Ablate(CommonArgs),
    /// Sweep the chunk size over the configured grid.
    SweepChunks(CommonArgs),
    /// Sweep the top-k tweet baseline over (metric, k).
    SweepTopk(CommonArgs),
    /// Run one configured baseline.
    Baseline {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the configured baseline kind.
        #[arg(long)]
        kind: Option<String>,
    },
}

/// Parse and run, returning the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            input, out, seed, ..
        } => cmd_ingest(&input, &out, seed.unwrap_or(0)),
        Command::Synth {
            out,
            seed,
            accounts_per_class,
            tweets_per_account,
            strength,
            embedding_dim,
            signature_period,
            signal_groups,
            ..
        } => {
            let mut spec = SyntheticSpec {
                accounts_per_class,
                tweets_per_account,
                strength,
                embedding_dim,
                signature_period,
                seed: seed.unwrap_or(0),
                ..SyntheticSpec::default()
            };
            if !signal_groups.is_empty() {
                spec.signal_groups = signal_groups
                    .iter()
                    .map(|g| {
                        FeatureGroup::parse(g)
                            .with_context(|| format!("unknown feature group {g:?}"))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            cmd_synth(&out, &spec)
        }
        Command::Train(c) => with_config(&c, "train", cmd_train),
        Command::Evaluate(c) => with_config(&c, "evaluate", cmd_evaluate),
        Command::Ablate(c) => with_config(&c, "ablate", cmd_ablate),
        Command::SweepChunks(c) => with_config(&c, "sweep-chunks", cmd_sweep_chunks),
        Command::SweepTopk(c) => with_config(&c, "sweep-topk", cmd_sweep_topk),
        Command::Baseline { common, kind } => with_config(&common, "baseline", |ctx| {
            let kind = match &kind {
                Some(s) => BaselineKind::parse(s)?,
                None => BaselineKind::parse(&ctx.config.baseline.kind)?,
            };
            cmd_baseline(ctx, kind)
        }),
    }
}

struct RunContext<'a> {
    config: &'a ExperimentConfig,
    out: &'a Path,
    seed: u64,
}

fn with_config(
    common: &CommonArgs,
    name: &str,
    body: impl FnOnce(&RunContext) -> Result<()>,
) -> Result<()> {
    let config = ExperimentConfig::load(&common.config)?;
    let seed = common.seed.unwrap_or(config.seed);
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    write_manifest(&common.out, name, Some(&common.config), seed)?;
    body(&RunContext {
        config: &config,
        out: &common.out,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    config_hash: Option<String>,
    timestamp: String,
}

fn write_manifest(out: &Path, command: &str, config: Option<&Path>, seed: u64) -> Result<()> {
    let config_hash = match config {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Some(format!("{:x}", Sha256::digest(&bytes)))
        }
        None => None,
    };
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_hash,
        timestamp: OffsetDateTime::now_utc().format(&Rfc3339)?,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn report_tsv(report: &EvalReport) -> String {
    let mut s = String::from("fold\taccuracy\tmacro_f1\ttest_accounts\n");
    for f in &report.folds {
        s.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{}\n",
            f.fold, f.accuracy, f.macro_f1, f.test_accounts
        ));
    }
    s.push_str(&format!(
        "mean\t{:.6}\t{:.6}\t-\npooled\t{:.6}\t{:.6}\t-\n",
        report.mean_accuracy, report.mean_macro_f1, report.pooled_accuracy, report.pooled_macro_f1
    ));
    s
}

fn load_plan(ctx: &RunContext, accounts: &[crate::corpus::Account]) -> Result<FoldPlan> {
    let pairs: Vec<(String, crate::corpus::AccountLabel)> = accounts
        .iter()
        .map(|a| (a.handle.clone(), a.label))
        .collect();
    Ok(stratified_kfold(
        &pairs,
        ctx.config.experiment.folds,
        ctx.seed,
    )?)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_ingest(input: &Path, out: &Path, seed: u64) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_manifest(out, "ingest", None, seed)?;
    let accounts = load_corpus(input)?;
    let tweets_before: usize = accounts.iter().map(|a| a.tweets.len()).sum();
    let mut cleaned = Vec::new();
    let mut removed_accounts = Vec::new();
    for acc in &accounts {
        match clean_account(acc) {
            Ok(c) => cleaned.push(c),
            Err(CorpusError::EmptyAfterCleaning { handle }) => removed_accounts.push(handle),
            Err(e) => return Err(e.into()),
        }
    }
    let tweets_after: usize = cleaned.iter().map(|a| a.tweets.len()).sum();

    let mut buf = Vec::new();
    write_corpus(&cleaned, &mut buf)?;
    atomic_write(&out.join("cleaned.jsonl"), &buf)?;

    #[derive(Serialize)]
    struct IngestSummary {
        accounts_in: usize,
        accounts_out: usize,
        tweets_before: usize,
        tweets_after: usize,
        removed_accounts: Vec<String>,
    }
    write_json(
        &out.join("summary.json"),
        &IngestSummary {
            accounts_in: accounts.len(),
            accounts_out: cleaned.len(),
            tweets_before,
            tweets_after,
            removed_accounts,
        },
    )
}

fn cmd_synth(out: &Path, spec: &SyntheticSpec) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_manifest(out, "synth", None, spec.seed)?;
    let corpus = generate_synthetic_corpus(spec)?;

    let mut buf = Vec::new();
    write_corpus(&corpus.accounts, &mut buf)?;
    atomic_write(&out.join("corpus.jsonl"), &buf)?;

    let lex = &corpus.lexicons;
    let write_lex = |name: &str, l: &crate::lexicons::CategoryLexicon| -> Result<()> {
        let mut buf = Vec::new();
        write_lexicon_tsv(l, &mut buf)?;
        atomic_write(&out.join(name), &buf)
    };
    write_lex("emotion.tsv", &lex.emotion)?;
    for (i, s) in lex.sentiment.iter().enumerate() {
        write_lex(&format!("sentiment{i}.tsv"), s)?;
    }
    write_lex("morality.tsv", &lex.morality)?;
    let mut buf = Vec::new();
    write_embeddings_txt(&lex.embeddings, &mut buf)?;
    atomic_write(&out.join("embeddings.txt"), &buf)?;

    // ready-to-run config referencing the files just written
    let config = format!(
        r#"seed = {seed}

[corpus]
path = "corpus.jsonl"

[lexicons]
emotion = ["emotion.tsv"]
sentiment = ["sentiment0.tsv", "sentiment1.tsv", "sentiment2.tsv", "sentiment3.tsv"]
morality = "morality.tsv"
embeddings = "embeddings.txt"

[experiment]
chunk_size = {chunk}
folds = 5
"#,
        seed = spec.seed,
        chunk = spec.signature_period,
    );
    atomic_write(&out.join("exp.toml"), config.as_bytes())?;
    write_json(&out.join("spec.json"), spec)
}

fn cmd_train(ctx: &RunContext) -> Result<()> {
    let accounts = load_corpus(&ctx.config.corpus.path)?;
    let lexset = ctx.config.load_lexicons()?;
    let featurized = featurize_accounts(&accounts, &lexset, &ctx.config.feature_config());
    let plan = load_plan(ctx, &accounts)?;

    // fold 0's validation accounts early-stop the final model; everything else trains
    let mut train_chunks: Vec<LabeledSequence<f64>> = Vec::new();
    let mut val_chunks: Vec<LabeledSequence<f64>> = Vec::new();
    for acc in &featurized {
        let (chunks, _) = acc.chunk_sequences(ctx.config.experiment.chunk_size);
        let target = if plan.validation[0].contains(&acc.handle) {
            &mut val_chunks
        } else {
            &mut train_chunks
        };
        for c in chunks {
            target.push(LabeledSequence {
                features: c,
                label: acc.label,
            });
        }
    }
    if train_chunks.is_empty() {
        bail!("corpus produced no training chunks at chunk_size {}", ctx.config.experiment.chunk_size);
    }

    let model = match ctx.config.model_spec(ctx.seed) {
        ModelSpec::Fixed(cfg) => {
            let outcome = train(&train_chunks, &cfg, &val_chunks)?;
            let mut tsv = String::from("epoch\ttrain_loss\tval_loss\tval_macro_f1\n");
            for e in &outcome.history {
                tsv.push_str(&format!(
                    "{}\t{:.6}\t{:.6}\t{:.6}\n",
                    e.epoch, e.train_loss, e.val_loss, e.val_macro_f1
                ));
            }
            atomic_write(&ctx.out.join("history.tsv"), tsv.as_bytes())?;
            Model::new(outcome.params, outcome.stats)
        }
        ModelSpec::Search { space, budget } => {
            let to_account_seqs = |handles: &dyn Fn(&str) -> bool| -> Vec<AccountSequences<f64>> {
                featurized
                    .iter()
                    .filter(|a| handles(&a.handle))
                    .map(|a| AccountSequences {
                        handle: a.handle.clone(),
                        label: a.label,
                        sequences: a.chunk_sequences(ctx.config.experiment.chunk_size).0,
                    })
                    .filter(|a| !a.sequences.is_empty())
                    .collect()
            };
            let val = &plan.validation[0];
            let train_accounts = to_account_seqs(&|h: &str| !val.contains(h));
            let val_accounts = to_account_seqs(&|h: &str| val.contains(h));
            let outcome = hyper_search(&space, budget, &train_accounts, &val_accounts, ctx.seed)?;
            write_json(&ctx.out.join("trials.json"), &outcome.trials)?;
            Model::new(outcome.best_outcome.params, outcome.best_outcome.stats)
        }
    };
    write_json(&ctx.out.join("checkpoint.json"), &model)
}

fn cmd_evaluate(ctx: &RunContext) -> Result<()> {
    let accounts = load_corpus(&ctx.config.corpus.path)?;
    let lexset = ctx.config.load_lexicons()?;
    let plan = load_plan(ctx, &accounts)?;
    let setup = ctx.config.experiment_setup(ctx.seed);
    let outcome = crate::eval::run_experiment(&accounts, &lexset, &setup, &plan)?;
    write_json(&ctx.out.join("report.json"), &outcome.report)?;
    atomic_write(
        &ctx.out.join("report.tsv"),
        report_tsv(&outcome.report).as_bytes(),
    )?;
    if !outcome.trial_logs.is_empty() {
        write_json(&ctx.out.join("trials.json"), &outcome.trial_logs)?;
    }
    Ok(())
}

fn cmd_ablate(ctx: &RunContext) -> Result<()> {
    let accounts = load_corpus(&ctx.config.corpus.path)?;
    let lexset = ctx.config.load_lexicons()?;
    let plan = load_plan(ctx, &accounts)?;
    let setup = ctx.config.experiment_setup(ctx.seed);
    let rows = ablation_suite(&accounts, &lexset, &setup, &plan)?;
    let mut tsv = String::from("removed\tmean_accuracy\tmean_macro_f1\n");
    for r in &rows {
        tsv.push_str(&format!(
            "{}\t{:.6}\t{:.6}\n",
            r.removed.map_or("none", |g| g.as_str()),
            r.mean_accuracy,
            r.mean_macro_f1
        ));
    }
    atomic_write(&ctx.out.join("ablation.tsv"), tsv.as_bytes())?;
    write_json(&ctx.out.join("ablation.json"), &rows)
}

fn cmd_sweep_chunks(ctx: &RunContext) -> Result<()> {
    let accounts = load_corpus(&ctx.config.corpus.path)?;
    let lexset = ctx.config.load_lexicons()?;
    let plan = load_plan(ctx, &accounts)?;
    let setup = ctx.config.experiment_setup(ctx.seed);
    let rows = chunk_size_sweep(
        &accounts,
        &lexset,
        &setup,
        &ctx.config.sweep.chunk_sizes,
        &plan,
    )?;
    let mut tsv = String::from("chunk_size\tmean_accuracy\tmean_macro_f1\tdropped_tweets\n");
    for (s, report) in &rows {
        tsv.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{}\n",
            s, report.mean_accuracy, report.mean_macro_f1, report.metadata.dropped_tweets
        ));
    }
    atomic_write(&ctx.out.join("sweep_chunks.tsv"), tsv.as_bytes())?;
    write_json(&ctx.out.join("sweep_chunks.json"), &rows)
}

fn cmd_sweep_topk(ctx: &RunContext) -> Result<()> {
    let accounts = load_corpus(&ctx.config.corpus.path)?;
    let lexset = ctx.config.load_lexicons()?;
    let plan = load_plan(ctx, &accounts)?;
    let rows = topk_sweep(
        &accounts,
        &lexset,
        &ctx.config.feature_config(),
        &ctx.config.baseline_config(ctx.seed),
        &ctx.config.sweep.topk_metrics,
        &ctx.config.sweep.topk_ks,
        &plan,
    )?;
    let mut tsv = String::from("metric\tk\tmean_accuracy\tmean_macro_f1\n");
    for (metric, k, report) in &rows {
        tsv.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            metric.as_str(),
            k,
            report.mean_accuracy,
            report.mean_macro_f1
        ));
    }
    atomic_write(&ctx.out.join("sweep_topk.tsv"), tsv.as_bytes())?;
    write_json(&ctx.out.join("sweep_topk.json"), &rows)
}

fn cmd_baseline(ctx: &RunContext, kind: BaselineKind) -> Result<()> {
    let accounts = load_corpus(&ctx.config.corpus.path)?;
    let lexset = ctx.config.load_lexicons()?;
    let plan = load_plan(ctx, &accounts)?;
    let report = run_baseline(
        kind,
        &accounts,
        &lexset,
        &ctx.config.feature_config(),
        &ctx.config.baseline_config(ctx.seed),
        &plan,
    )?;
    write_json(&ctx.out.join("baseline.json"), &report)?;
    atomic_write(&ctx.out.join("baseline.tsv"), report_tsv(&report).as_bytes())
}
