//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid arguments or config, 2 data or runtime
//! failure (including a failed self-check).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::autodiff::{Matrix, OpKind};
use crate::diagnostics::{run_gradcheck, run_micheck, GradcheckConfig, MiCheckConfig};
use crate::error::{Error, Result};
use crate::eval::{
    link_pred_eval, linear_probe, smoothness_report, LabeledSplit, LinkScorer, MetricsReport, ProbeConfig,
};
use crate::graph::{
    generate_sbm, load_graph, load_labels, node_split, parse_edges, split_edges_holdout, write_edges,
    write_features, write_labels, Graph, SbmConfig,
};
use crate::io::{
    file_digest, load_checkpoint, load_embeddings, write_checkpoint, write_embeddings, write_link_split,
    Checkpoint, InputFile, RunManifest,
};
use crate::losses::LossWeights;
use crate::seed::derive_seed;
use crate::trainer::{train, Pretext, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// File names written by `synth` and `train`.
pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "bsg", version, about = "Graph self-supervised learning with balanced smoothness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a stochastic-block-model graph with block-indicator features.
    Synth(SynthArgs),
    /// Train the encoder and write checkpoint, embeddings, history and manifest.
    Train(Box<TrainArgs>),
    /// Evaluate frozen embeddings (linear probe, link prediction, smoothness).
    Eval(EvalArgs),
    /// Report the smoothness of embeddings over a graph.
    Smoothness(SmoothnessArgs),
    /// Compare every backward rule and the full objective with finite differences.
    Gradcheck(GradcheckArgs),
    /// Monte-Carlo check of the MSE-to-mutual-information identity.
    Micheck(MicheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 100)]
    pub per_block: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub feature_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// λ1=0.0002, λ2=0.001, λ3=0.0009, m=−0.2, p=0.7.
    CoraDefaults,
}

/// Training hyperparameters; each flag overrides the preset and config file.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// `key=value` file with any TrainConfig field.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mask_ratio: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub emb_dim: Option<usize>,
    #[arg(long)]
    pub decoder_hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_pretext)]
    pub pretext: Option<Pretext>,
}

fn parse_pretext(s: &str) -> std::result::Result<Pretext, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl TrainFlags {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(Preset::CoraDefaults) = self.preset {
            cfg = cfg.with_weights(LossWeights::cora_defaults());
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg = cfg
                .apply_text(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(
            mask_ratio,
            lambda1,
            lambda2,
            lambda3,
            margin,
            learning_rate,
            weight_decay,
            epochs,
            hidden,
            emb_dim,
            decoder_hidden,
            seed,
            pretext
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub edges: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Hold out `VAL,TEST` fractions of the edges for link prediction; the
    /// encoder trains on the rest and the split files land in `--out`.
    #[arg(long, value_parser = parse_fraction_pair)]
    pub link_split: Option<(f64, f64)>,
    /// Rerun exactly the run recorded in a manifest.
    #[arg(long, conflicts_with_all = ["edges", "features", "labels", "link_split", "preset", "config"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_fraction_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected VAL,TEST")?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("invalid fraction {x:?}"));
    let (a, b) = (parse(a)?, parse(b)?);
    if !(0.0..1.0).contains(&a) || !(0.0..1.0).contains(&b) || a + b >= 1.0 {
        return Err(format!("fractions {a},{b} must be in [0, 1) with a sum below 1"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HoldoutSet {
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Graph edges, for the smoothness report.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Node labels, for the linear probe.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Seed of the 1:1:8 train/val/test node split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Directory holding link-split files written by `train --link-split`.
    #[arg(long)]
    pub link_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = HoldoutSet::Test)]
    pub holdout: HoldoutSet,
    /// Checkpoint whose edge decoder scores links; without it only the dot
    /// product is reported.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training manifest to echo in the report.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothnessArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct MicheckArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn emit(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = SbmConfig {
        blocks: args.blocks,
        nodes_per_block: args.per_block,
        p_in: args.p_in,
        p_out: args.p_out,
        feature_dim: args.feature_dim,
        feature_noise: args.feature_noise,
        seed: args.seed,
    };
    let graph = generate_sbm(&cfg)?;
    create_dir(&args.out)?;
    write_edges(&args.out.join(EDGES_FILE), &graph.undirected_edges())?;
    write_features(&args.out.join(FEATURES_FILE), graph.features())?;
    write_labels(&args.out.join(LABELS_FILE), graph.labels().expect("SBM graphs are labeled"))?;
    let files: Vec<PathBuf> = [EDGES_FILE, FEATURES_FILE, LABELS_FILE].iter().map(|f| args.out.join(f)).collect();
    emit(
        out,
        &json!({
            "nodes": graph.num_nodes(),
            "edges": graph.num_undirected_edges(),
            "config": cfg,
            "files": files,
        }),
    )?;
    Ok(EXIT_OK)
}

fn input_file(path: &Path) -> Result<InputFile> {
    Ok(InputFile {
        path: path.to_path_buf(),
        sha256: file_digest(path)?,
    })
}

/// Loads the dataset, trains, and writes every artifact of a run.
fn run_training(manifest: &RunManifest, out_dir: &Path) -> Result<Value> {
    let path = |role: &str| manifest.inputs.get(role).map(|f| f.path.as_path());
    let (Some(edges), Some(features)) = (path("edges"), path("features")) else {
        return Err(Error::InvalidArgument("manifest lacks edges or features input".into()));
    };
    let graph = load_graph(edges, features, path("labels"))?;
    let cfg = &manifest.config;

    create_dir(out_dir)?;
    let train_graph: Graph = match manifest.link_split {
        Some((val, test)) => {
            let split = split_edges_holdout(&graph, val, test, derive_seed(cfg.seed, "link-split", 0))?;
            write_link_split(out_dir, &split)?;
            split.train
        }
        None => graph,
    };
    let output = train(&train_graph, cfg)?;
    let emb_path = out_dir.join(EMBEDDINGS_FILE);
    write_embeddings(&emb_path, &output.embeddings)?;
    write_checkpoint(
        &out_dir.join(CHECKPOINT_FILE),
        &Checkpoint {
            params: output.params,
            seed: cfg.seed,
            epochs: cfg.epochs,
            pretext: cfg.pretext,
        },
    )?;
    let history_path = out_dir.join(HISTORY_FILE);
    fs::write(&history_path, output.history.to_jsonl()).map_err(|e| Error::io(&history_path, e))?;
    manifest.save(&out_dir.join(MANIFEST_FILE))?;

    let last = output.history.epochs.last();
    Ok(json!({
        "out": out_dir,
        "embeddings_sha256": file_digest(&emb_path)?,
        "epochs": cfg.epochs,
        "final_losses": last.map(|r| &r.losses),
        "final_delta": last.map(|r| r.delta),
        "config": cfg,
    }))
}

fn cmd_train(args: &TrainArgs, command_line: &str, out: &mut dyn Write) -> Result<i32> {
    let manifest = match &args.manifest {
        Some(path) => {
            let m = RunManifest::load(path)?;
            m.verify_inputs()?;
            m
        }
        None => {
            let mut inputs = BTreeMap::new();
            let edges = args.edges.as_deref().expect("clap enforces --edges");
            let features = args.features.as_deref().expect("clap enforces --features");
            inputs.insert("edges".to_string(), input_file(edges)?);
            inputs.insert("features".to_string(), input_file(features)?);
            if let Some(l) = &args.labels {
                inputs.insert("labels".to_string(), input_file(l)?);
            }
            let config = args.flags.resolve()?;
            RunManifest {
                command: command_line.to_string(),
                seed: config.seed,
                config,
                inputs,
                link_split: args.link_split,
                version: env!("CARGO_PKG_VERSION").to_string(),
            }
        }
    };
    let summary = run_training(&manifest, &args.out)?;
    emit(out, &summary)?;
    Ok(EXIT_OK)
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let z = load_embeddings(&args.embeddings)?;
    let n = z.rows();
    if args.labels.is_none() && args.link_dir.is_none() && args.edges.is_none() {
        return Err(Error::InvalidArgument(
            "nothing to evaluate: pass --labels, --link-dir and/or --edges".into(),
        ));
    }

    let mut echo = json!({
        "embeddings": args.embeddings,
        "split_seed": args.split_seed,
        "holdout": format!("{:?}", args.holdout).to_lowercase(),
    });
    if let Some(m) = &args.manifest {
        echo["train"] = serde_json::to_value(RunManifest::load(m)?).expect("manifest serializes");
    }
    let mut report = MetricsReport::new(echo, args.split_seed);

    if let Some(path) = &args.labels {
        let labels = load_labels(path, n)?;
        let s = node_split(n, args.split_seed)?;
        let split = LabeledSplit {
            labels,
            train: s.train,
            val: s.val,
            test: s.test,
        };
        report = report.with_accuracy(linear_probe(&z, &split, &ProbeConfig::default())?.accuracy);
    }
    if let Some(dir) = &args.link_dir {
        let (pos_name, neg_name) = match args.holdout {
            HoldoutSet::Val => ("val_pos.txt", "val_neg.txt"),
            HoldoutSet::Test => ("test_pos.txt", "test_neg.txt"),
        };
        let pos = parse_edges(&dir.join(pos_name))?;
        let neg = parse_edges(&dir.join(neg_name))?;
        let decoder = match &args.checkpoint {
            Some(c) => {
                let ckpt = load_checkpoint(c)?;
                Some(link_pred_eval(&z, &pos, &neg, LinkScorer::Decoder(&ckpt.params.decoder))?)
            }
            None => None,
        };
        let dot = link_pred_eval(&z, &pos, &neg, LinkScorer::Dot)?;
        report = report.with_link(decoder, dot);
    }
    if let Some(edges) = &args.edges {
        let graph = embedding_graph(edges, &z)?;
        report = report.with_smoothness(smoothness_report(&graph, &z)?);
    }
    emit(out, &report)?;
    Ok(EXIT_OK)
}

/// Graph over the embedding rows; node count comes from the embeddings.
fn embedding_graph(edges: &Path, z: &Matrix) -> Result<Graph> {
    Graph::new(&parse_edges(edges)?, z.clone(), None)
}

fn cmd_smoothness(args: &SmoothnessArgs, out: &mut dyn Write) -> Result<i32> {
    let z = load_embeddings(&args.embeddings)?;
    let graph = embedding_graph(&args.edges, &z)?;
    let s = smoothness_report(&graph, &z)?;
    let log10 = if s.log10_delta.is_finite() {
        json!(s.log10_delta)
    } else {
        json!("-inf")
    };
    emit(out, &json!({ "delta": s.delta, "log10_delta": log10 }))?;
    Ok(EXIT_OK)
}

fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let fault = args
        .inject_fault
        .as_deref()
        .map(|name| OpKind::from_name(name).ok_or_else(|| Error::InvalidArgument(format!("unknown op {name:?}"))))
        .transpose()?;
    let report = run_gradcheck(&GradcheckConfig {
        h: args.h,
        seed: args.seed,
        fault,
    })?;
    emit(out, &report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_RUNTIME })
}

fn cmd_micheck(args: &MicheckArgs, out: &mut dyn Write) -> Result<i32> {
    let report = run_micheck(&MiCheckConfig {
        samples: args.samples,
        seed: args.seed,
        ..MiCheckConfig::default()
    })?;
    emit(out, &report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_RUNTIME })
}

pub fn execute(cli: &Cli, command_line: &str, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Train(a) => cmd_train(a, command_line, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Smoothness(a) => cmd_smoothness(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::Micheck(a) => cmd_micheck(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// go to `err` as text.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let command_line = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli, &command_line, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("bsg").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn preset_and_overrides() {
        let flags = TrainFlags {
            preset: Some(Preset::CoraDefaults),
            lambda1: Some(0.0),
            ..Default::default()
        };
        let cfg = flags.resolve().unwrap();
        assert_eq!((cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.margin, cfg.mask_ratio), (0.0, 0.001, 0.0009, -0.2, 0.7));
    }

    #[test]
    fn usage_errors_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run_capture(&["synth", "--p-in", "1.5", "--out", out]).0, EXIT_VALIDATION);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_VALIDATION);
        assert_eq!(run_capture(&["gradcheck", "--h", "0"]).0, EXIT_VALIDATION);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn link_split_parsing() {
        assert_eq!(parse_fraction_pair("0.05,0.1"), Ok((0.05, 0.1)));
        assert!(parse_fraction_pair("0.5,0.6").is_err());
        assert!(parse_fraction_pair("0.1").is_err());
    }

    #[test]
    fn missing_inputs_are_runtime_errors() {
        let (code, _, err) = run_capture(&["smoothness", "--edges", "/nonexistent/e", "--embeddings", "/nonexistent/z"]);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(err.contains("/nonexistent/z"), "{err}");
    }
}
