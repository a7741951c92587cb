//! Command-line interface for AchGNN.
//!
//! Settings come from built-in defaults, then an optional `--config` JSON
//! file, then command-line flags, each layer overriding the previous one.
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or usage, 3
//! numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use achgnn::diagnostics::{run_diagnostics, sample_pairs, write_pairs_csv, DiagnosticsConfig, DiagnosticsReport};
use achgnn::evaluation::{
    apply_variant, average_reports, evaluate_knn, evaluate_training, rank_candidates, run_ablations, run_fold,
    split_folds, training_pairs, AblationOutcome, AspectSel, EvalMode, EvalOptions, EvalReport, ExperimentConfig,
    FoldSplit, Variant,
};
use achgnn::graph::{generate_synthetic, load_graph, save_graph, HeteroGraph, Severity, SynthConfig};
use achgnn::model::{load_checkpoint, save_checkpoint, Checkpoint};
use achgnn::training::{train, TrainConfig};
use achgnn::{Error, Result};

const CHECKPOINT_FILE: &str = "checkpoint.bin";
const TRAIN_LOG_FILE: &str = "train.log.jsonl";
const EVAL_FILE: &str = "eval.json";
const DIAGNOSTICS_FILE: &str = "diagnostics.json";
const PAIRS_CSV_FILE: &str = "pairs.csv";

#[derive(Parser, Debug)]
#[command(name = "achgnn", version, about = "Aspect-conditioned heterogeneous GNN for paper recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a dataset, then print a summary.
    Ingest {
        manifest: PathBuf,
    },
    /// Train on the labeled pairs (all of them, or one fold's training split).
    Train {
        #[command(flatten)]
        common: Common,
        /// Train on this fold's training split instead of every pair.
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Print the top-k recommendations for one query paper.
    Recommend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Query paper id.
        #[arg(long)]
        query: usize,
        /// Aspect name or index, or "general".
        #[arg(long, default_value = "general")]
        aspect: String,
    },
    /// Cross-validated evaluation against the cosine-kNN baseline.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Retrain with one factor changed and compare against the base model.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// remove-aspect:K, remove-authorship, randomize-authorship,
        /// fanout:P,A or depth:L. May be repeated.
        #[arg(long = "variant", required = true)]
        variants: Vec<String>,
        /// Fold whose split is used.
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Corpus diagnostics over recommendation, citation and random pairs.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// One text per line, `id<TAB>text`, for n-gram overlap.
        #[arg(long)]
        texts: Option<PathBuf>,
        /// Also write per-pair values to pairs.csv.
        #[arg(long)]
        csv: bool,
    },
    /// Generate a planted synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    PerAspect,
    General,
    Both,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerAspect => EvalMode::PerAspect,
            ModeArg::General => EvalMode::General,
            ModeArg::Both => EvalMode::Both,
        }
    }
}

/// Flags shared by the configurable commands. Unset flags leave the config
/// file or default value in place.
#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed; required here or in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for evaluation.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    paper_fanout: Option<usize>,
    #[arg(long)]
    author_fanout: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
}

/// Everything a run needs. Every field has a default, so a config file may
/// name any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    manifest: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    train: TrainConfig,
    eval: EvalOptions,
    k: usize,
    mode: EvalMode,
    folds: usize,
    train_fraction: f64,
    diagnostics: DiagnosticsConfig,
    synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            out: None,
            seed: None,
            train: TrainConfig::default(),
            eval: EvalOptions {
                threads: 1,
                ..EvalOptions::default()
            },
            k: 10,
            mode: EvalMode::Both,
            folds: 5,
            train_fraction: 0.75,
            diagnostics: DiagnosticsConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, overridden by the config file, overridden by flags.
    fn resolve(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let c = common.clone();
        if c.manifest.is_some() {
            cfg.manifest = c.manifest;
        }
        if c.out.is_some() {
            cfg.out = c.out;
        }
        if c.seed.is_some() {
            cfg.seed = c.seed;
        }
        if let Some(t) = c.threads {
            cfg.eval.threads = t;
        }
        if let Some(l) = c.layers {
            cfg.train.set_num_layers(l);
        }
        if let Some(p) = c.paper_fanout {
            cfg.train.fanout.paper_fanout = p;
        }
        if let Some(a) = c.author_fanout {
            cfg.train.fanout.author_fanout = a;
        }
        if let Some(l) = c.lambda {
            cfg.train.lambda = l;
        }
        if let Some(lr) = c.lr {
            cfg.train.learning_rate = lr;
        }
        if let Some(e) = c.epochs {
            cfg.train.num_epochs = e;
        }
        if let Some(b) = c.batch_size {
            cfg.train.batch_size = b;
        }
        if let Some(k) = c.k {
            cfg.k = k;
        }
        if let Some(m) = c.mode {
            cfg.mode = m.into();
        }
        if let Some(f) = c.folds {
            cfg.folds = f;
        }
        let seed = cfg
            .seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or \"seed\" in the config file)".into()))?;
        cfg.train.seed = seed;
        cfg.eval.fanout = cfg.train.fanout;
        if cfg.eval.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn echo(&self) {
        let t = &self.train;
        eprintln!(
            "config: layers={} paper_fanout={} author_fanout={} lambda={} lr={} epochs={} batch_size={} k={} folds={} seed={} threads={}",
            t.fanout.num_layers,
            t.fanout.paper_fanout,
            t.fanout.author_fanout,
            t.lambda,
            t.learning_rate,
            t.num_epochs,
            t.batch_size,
            self.k,
            self.folds,
            self.seed.unwrap_or_default(),
            self.eval.threads,
        );
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    fn manifest(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("a dataset manifest is required (--manifest)".into()))
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self
            .out
            .as_deref()
            .ok_or_else(|| Error::Config("an output directory is required (--out)".into()))?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(dir)
    }

    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            train: self.train.clone(),
            eval: self.eval.clone(),
            k: self.k,
            mode: self.mode,
        }
    }

    fn load_graph(&self) -> Result<HeteroGraph> {
        let (g, issues) = load_graph(self.manifest()?)?;
        for issue in issues {
            log::warn!("{}: {}", issue.location, issue.message);
        }
        Ok(g)
    }

    fn folds(&self, g: &HeteroGraph) -> Result<Vec<FoldSplit>> {
        split_folds(g.aspect_edges(), self.folds, self.train_fraction, self.seed())
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn cmd_ingest(manifest: &Path) -> Result<()> {
    let (g, issues) = load_graph(manifest)?;
    println!("papers: {}", g.num_papers());
    println!("authors: {}", g.num_authors());
    println!("feature_dim: {}", g.feature_dim());
    println!("citation_edges: {}", g.num_citation_edges());
    println!("authorship_edges: {}", g.authorship_edges().len());
    println!("aspect_edges: {}", g.aspect_edges().len());
    println!("aspects: {} ({})", g.num_aspects(), g.aspect_names().join(", "));
    for issue in &issues {
        let tag = match issue.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        println!("{tag}: {}: {}", issue.location, issue.message);
    }
    if issues.iter().any(|i| i.is_error()) {
        return Err(Error::Validation("graph has validation errors".into()));
    }
    Ok(())
}

fn cmd_train(cfg: &RunConfig, fold: Option<usize>) -> Result<()> {
    let g = cfg.load_graph()?;
    let out = cfg.out_dir()?;
    let supervision = match fold {
        Some(f) => cfg
            .folds(&g)?
            .into_iter()
            .nth(f)
            .ok_or_else(|| Error::Config(format!("fold {f} out of range for {} folds", cfg.folds)))?
            .train,
        None => g.aspect_edges().to_vec(),
    };
    let (params, log) = match train(&g, &training_pairs(&supervision), &cfg.train) {
        Err(Error::Divergence { epoch, step, detail }) => {
            let last = match epoch {
                0 => "none".to_string(),
                e => (e - 1).to_string(),
            };
            eprintln!("training diverged; last finite epoch: {last}");
            return Err(Error::Divergence { epoch, step, detail });
        }
        other => other?,
    };
    let ckpt = Checkpoint {
        params,
        fanout: cfg.train.fanout,
        aspect_names: g.aspect_names().to_vec(),
    };
    save_checkpoint(&ckpt, &out.join(CHECKPOINT_FILE))?;
    write_file(&out.join(TRAIN_LOG_FILE), log.to_jsonl())?;
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} epochs: rank {:.6} aspect {:.6} total {:.6}",
            log.epochs.len(),
            last.rank_loss,
            last.aspect_loss,
            last.total_loss
        );
    }
    println!("wrote {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn cmd_recommend(cfg: &RunConfig, checkpoint: &Path, query: usize, aspect: &str) -> Result<()> {
    let g = cfg.load_graph()?;
    let ckpt = load_checkpoint(checkpoint)?;
    if ckpt.aspect_names.len() != g.num_aspects() {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint has {} aspects, graph has {}",
            ckpt.aspect_names.len(),
            g.num_aspects()
        )));
    }
    if query >= g.num_papers() {
        return Err(Error::UnknownNode(format!("query paper {query}")));
    }
    let sel = if aspect.eq_ignore_ascii_case("general") {
        AspectSel::General
    } else {
        AspectSel::Aspect(g.resolve_aspect(aspect)?)
    };
    let candidates: Vec<usize> = (0..g.num_papers()).filter(|&p| p != query).collect();
    let list = rank_candidates(
        &g,
        &ckpt.params,
        query,
        sel,
        &candidates,
        &ckpt.fanout,
        &cfg.eval.policy,
        cfg.eval.general_rule,
    )?;
    for (rank, (paper, score)) in list.entries.iter().take(cfg.k).enumerate() {
        println!("{}\t{}\t{:?}", rank + 1, paper, score);
    }
    Ok(())
}

#[derive(Serialize)]
struct FoldResult {
    fold: usize,
    num_train_pairs: usize,
    num_test_pairs: usize,
    model: EvalReport,
    knn_baseline: EvalReport,
    train_retrieval: EvalReport,
    final_total_loss: Option<f64>,
}

#[derive(Serialize)]
struct EvaluateOutput {
    k: usize,
    folds: Vec<FoldResult>,
    mean_model: Option<EvalReport>,
    mean_knn_baseline: Option<EvalReport>,
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let g = cfg.load_graph()?;
    let out = cfg.out_dir()?;
    let exp = cfg.experiment();
    let mut folds = Vec::new();
    for split in cfg.folds(&g)? {
        info!("fold {}: {} train / {} test pairs", split.fold, split.train.len(), split.test.len());
        let (params, log, model) = run_fold(&g, &split, &exp)?;
        let knn = evaluate_knn(&g, &split, cfg.k, cfg.mode, cfg.eval.threads)?;
        let train_retrieval = evaluate_training(&g, &params, &split.train, cfg.k, cfg.mode, &cfg.eval)?;
        println!("fold {}\n{}", split.fold, model.to_table());
        folds.push(FoldResult {
            fold: split.fold,
            num_train_pairs: split.train.len(),
            num_test_pairs: split.test.len(),
            model,
            knn_baseline: knn,
            train_retrieval,
            final_total_loss: log.epochs.last().map(|e| e.total_loss),
        });
    }
    let models: Vec<EvalReport> = folds.iter().map(|f| f.model.clone()).collect();
    let knns: Vec<EvalReport> = folds.iter().map(|f| f.knn_baseline.clone()).collect();
    let output = EvaluateOutput {
        k: cfg.k,
        mean_model: average_reports(&models),
        mean_knn_baseline: average_reports(&knns),
        folds,
    };
    if let Some(mean) = &output.mean_model {
        println!("mean over folds\n{}", mean.to_table());
    }
    write_json(&out.join(EVAL_FILE), &output)
}

#[derive(Serialize)]
struct AblateOutput {
    fold: usize,
    outcomes: Vec<AblationOutcome>,
}

fn cmd_ablate(cfg: &RunConfig, variants: &[String], fold: usize) -> Result<()> {
    let variants: Vec<Variant> = variants.iter().map(|v| v.parse()).collect::<Result<_>>()?;
    let g = cfg.load_graph()?;
    let out = cfg.out_dir()?;
    let split = cfg
        .folds(&g)?
        .into_iter()
        .nth(fold)
        .ok_or_else(|| Error::Config(format!("fold {fold} out of range for {} folds", cfg.folds)))?;
    let exp = cfg.experiment();
    // Validate every variant before spending time on training, and emit the
    // graphs of the variants that rewrite it.
    for v in &variants {
        let (vg, _, _) = apply_variant(&g, &split, &exp, *v, cfg.seed())?;
        if matches!(v, Variant::RemoveAuthorship | Variant::RandomizeAuthorship) {
            save_graph(&vg, &out.join(format!("variant-{v}").replace(':', "-")))?;
        }
    }
    let outcomes = run_ablations(&exp, &variants, &g, &split, cfg.seed())?;
    for o in &outcomes {
        let general = |r: &EvalReport| r.general.as_ref().map(|m| m.recall_at_k);
        println!(
            "{}: base macro R@{k} {:.4} -> {:.4}; general R@{k} {:?} -> {:?}",
            o.variant,
            o.base.macro_recall(),
            o.ablated.macro_recall(),
            general(&o.base),
            general(&o.ablated),
            k = cfg.k,
        );
    }
    write_json(&out.join(EVAL_FILE), &AblateOutput { fold, outcomes })
}

fn read_texts(path: &Path, num_papers: usize) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut texts = vec![None; num_papers];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, body) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `id<TAB>text`".into()))?;
        let id: usize = id.trim().parse().map_err(|_| parse_err(format!("bad paper id {id:?}")))?;
        let slot = texts
            .get_mut(id)
            .ok_or_else(|| parse_err(format!("paper {id} out of range")))?;
        *slot = Some(body.to_string());
    }
    Ok(texts.into_iter().map(Option::unwrap_or_default).collect())
}

fn cmd_diagnose(cfg: &RunConfig, texts: Option<&Path>, csv: bool) -> Result<()> {
    let g = cfg.load_graph()?;
    let out = cfg.out_dir()?;
    let texts = texts.map(|p| read_texts(p, g.num_papers())).transpose()?;
    let pairs = sample_pairs(&g, &cfg.diagnostics, cfg.seed())?;
    let (report, records): (DiagnosticsReport, _) =
        run_diagnostics(&g, &pairs, texts.as_deref(), cfg.diagnostics.ngram)?;
    println!(
        "bibliographic coupling recall {:.4}, co-citation recall {:.4}{}",
        report.bibliographic_coupling_recall,
        report.co_citation_recall,
        if report.coupling_directed { "" } else { " (undirected citations: modes coincide)" }
    );
    write_json(&out.join(DIAGNOSTICS_FILE), &report)?;
    if csv {
        let path = out.join(PAIRS_CSV_FILE);
        let mut buf = Vec::new();
        write_pairs_csv(&mut buf, &records).map_err(|e| Error::io(&path, e))?;
        write_file(&path, buf)?;
    }
    Ok(())
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    let (g, planted) = generate_synthetic(&cfg.synth, cfg.seed())?;
    let manifest = save_graph(&g, out)?;
    println!(
        "{} papers, {} authors, {} planted pairs; manifest {}",
        g.num_papers(),
        g.num_authors(),
        planted.len(),
        manifest.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { manifest } => cmd_ingest(&manifest),
        Command::Train { common, fold } => {
            let cfg = RunConfig::resolve(&common)?;
            cfg.echo();
            cmd_train(&cfg, fold)
        }
        Command::Recommend {
            common,
            checkpoint,
            query,
            aspect,
        } => {
            let cfg = RunConfig::resolve(&common)?;
            cmd_recommend(&cfg, &checkpoint, query, &aspect)
        }
        Command::Evaluate { common } => {
            let cfg = RunConfig::resolve(&common)?;
            cfg.echo();
            cmd_evaluate(&cfg)
        }
        Command::Ablate {
            common,
            variants,
            fold,
        } => {
            let cfg = RunConfig::resolve(&common)?;
            cfg.echo();
            cmd_ablate(&cfg, &variants, fold)
        }
        Command::Diagnose { common, texts, csv } => {
            let cfg = RunConfig::resolve(&common)?;
            cmd_diagnose(&cfg, texts.as_deref(), csv)
        }
        Command::Synth { common } => {
            let cfg = RunConfig::resolve(&common)?;
            cmd_synth(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common() -> Common {
        Common {
            seed: Some(7),
            ..Common::default()
        }
    }

    #[test]
    fn defaults_apply_without_config() {
        let cfg = RunConfig::resolve(&common()).unwrap();
        assert_eq!(cfg.train.fanout.num_layers, 2);
        assert_eq!(cfg.train.fanout.paper_fanout, 15);
        assert_eq!(cfg.train.fanout.author_fanout, 5);
        assert_eq!(cfg.train.lambda, 0.2);
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.eval.threads, 1);
        assert_eq!(cfg.train.seed, 7);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"k": 5, "train": {"lambda": 0.5, "num_epochs": 3}, "seed": 1}"#).unwrap();
        let cfg = RunConfig::resolve(&Common {
            config: Some(path.clone()),
            lambda: Some(0.1),
            ..Common::default()
        })
        .unwrap();
        assert_eq!((cfg.k, cfg.train.lambda, cfg.train.num_epochs, cfg.train.seed), (5, 0.1, 3, 1));
        let cfg = RunConfig::resolve(&Common {
            config: Some(path),
            seed: Some(9),
            layers: Some(3),
            ..Common::default()
        })
        .unwrap();
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.train.model.hidden_dims.len(), 3);
        assert_eq!(cfg.eval.fanout.num_layers, 3);
    }

    #[test]
    fn seed_is_mandatory() {
        let err = RunConfig::resolve(&Common::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"seed": 1, "lamda": 0.3}"#).unwrap();
        let cfg = RunConfig::resolve(&Common {
            config: Some(path),
            ..Common::default()
        });
        assert!(cfg.is_err());
    }
}
