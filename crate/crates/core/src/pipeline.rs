//! File-level command implementations shared by the CLI binary and the
//! acceptance suite: each function reads its inputs, writes its outputs,
//! and drops exactly one run manifest alongside them.
//!
//! Output files never embed wall-clock data; timestamps live only in the
//! manifest, so equal seeds give byte-identical outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayesopt::{bo_loop, random_search, toy_scorer, BoConfig, BoIterStats, BoRun};
use crate::executor::{compute_metrics, execute, ExecutionResult, MetricsReport, SynthReport};
use crate::trees::{
    generate_toy_dataset, load_dataset, save_dataset, Dataset, GenConfig, JunctionTree,
    OracleBackend, OracleClient, ReactionTree, TemplateBackend, ToyBackend, Vocabularies,
    DEFAULT_ORACLE_TIMEOUT,
};
use crate::util::parallel_map;
use crate::vae::{train, Model, ModelConfig, PairLimits, TrainReport};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const SAMPLES_FORMAT_VERSION: u32 = 1;
pub const TREE_FILE_FORMAT_VERSION: u32 = 1;

/// How a command failed, mapped to the process exit code by the CLI.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Bad inputs: missing files, schema violations, mismatched models.
    #[error("{0}")]
    Validation(String),
    /// Failures while computing or writing results.
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Runtime(_) => 2,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Runtime(e.to_string())
}

/// Provenance record written next to every command's primary output.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub checkpoint_sha256: Option<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    checkpoint: Option<PathBuf>,
    started_unix_ms: u64,
}

impl ManifestBuilder {
    fn start(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            checkpoint: None,
            started_unix_ms: now_ms(),
        }
    }

    fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    fn output(&mut self, p: &Path) -> &mut Self {
        self.outputs.push(p.to_path_buf());
        self
    }

    fn checkpoint(&mut self, p: &Path) -> &mut Self {
        self.checkpoint = Some(p.to_path_buf());
        self
    }

    /// Writes `<primary_output>.manifest.json`.
    fn finish(self) -> Result<PathBuf, PipelineError> {
        let primary = self.outputs.first().cloned().expect("manifest needs an output");
        let checkpoint_sha256 = match &self.checkpoint {
            Some(p) => Some(sha256_file(p)?),
            None => None,
        };
        let manifest = RunManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            command: self.command,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            checkpoint_sha256,
            started_unix_ms: self.started_unix_ms,
            finished_unix_ms: now_ms(),
        };
        let path = suffixed(&primary, ".manifest.json");
        write_json_pretty(&path, &manifest)?;
        Ok(path)
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| runtime(format!("hashing {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}

fn load_dataset_checked(path: &Path) -> Result<Dataset, PipelineError> {
    load_dataset(path).map_err(validation)
}

fn load_model_checked(path: &Path, vocab: &Vocabularies) -> Result<Model, PipelineError> {
    let model = Model::load(path).map_err(validation)?;
    model.check_vocab(vocab).map_err(validation)?;
    Ok(model)
}

/// Runs `f` against the toy backend or a connected oracle.
fn with_backend<R>(
    vocab: &Vocabularies,
    oracle: Option<&str>,
    f: impl FnOnce(&dyn TemplateBackend) -> Result<R, PipelineError>,
) -> Result<R, PipelineError> {
    match oracle {
        None => f(&ToyBackend { registry: &vocab.templates }),
        Some(endpoint) => {
            let client = OracleClient::connect(endpoint, DEFAULT_ORACLE_TIMEOUT).map_err(runtime)?;
            f(&OracleBackend { client })
        }
    }
}

// ---------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GenDataArgs {
    pub out: PathBuf,
    pub gen: GenConfigArgs,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenConfigArgs {
    pub seed: u64,
    pub trees: usize,
    pub templates: usize,
    pub start_molecules: usize,
    pub max_depth: usize,
    pub frequency_floor: Option<usize>,
}

impl Default for GenConfigArgs {
    fn default() -> Self {
        let g = GenConfig::default();
        Self {
            seed: g.seed,
            trees: g.n_trees,
            templates: g.n_templates,
            start_molecules: g.n_start_molecules,
            max_depth: g.max_depth,
            frequency_floor: g.frequency_floor,
        }
    }
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<(), PipelineError> {
    let config = GenConfig {
        seed: args.gen.seed,
        n_trees: args.gen.trees,
        n_templates: args.gen.templates,
        n_start_molecules: args.gen.start_molecules,
        max_depth: args.gen.max_depth,
        frequency_floor: args.gen.frequency_floor,
    };
    let mut manifest =
        ManifestBuilder::start("gen-data", serde_json::to_value(args).map_err(runtime)?, args.gen.seed);
    let dataset = generate_toy_dataset(&config).map_err(validation)?;
    save_dataset(&dataset, &args.out).map_err(runtime)?;
    manifest.output(&args.out);
    manifest.finish()?;
    Ok(())
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub config: ModelConfig,
    pub use_step_context: bool,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport, PipelineError> {
    let mut manifest =
        ManifestBuilder::start("train", serde_json::to_value(args).map_err(runtime)?, args.config.seed);
    manifest.input(&args.data);
    let dataset = load_dataset_checked(&args.data)?;
    let mut model = Model::new(&dataset.vocabularies, args.config.clone(), args.use_step_context)
        .map_err(validation)?;
    let report = train(&mut model, &dataset).map_err(runtime)?;
    model.save(&args.out).map_err(runtime)?;
    let report_path = suffixed(&args.out, ".report.csv");
    std::fs::write(&report_path, report.to_csv())
        .map_err(|e| runtime(format!("writing {}: {e}", report_path.display())))?;
    manifest.output(&args.out).output(&report_path).checkpoint(&args.out);
    manifest.finish()?;
    Ok(report)
}

// ---------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SampleArgs {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub threads: usize,
    pub oracle: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SamplesFile {
    pub format_version: u32,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleEntry {
    pub junction: JunctionTree,
    pub reaction: ReactionTree,
    pub product: Option<String>,
    pub valid: bool,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<MetricsReport, PipelineError> {
    let mut manifest =
        ManifestBuilder::start("sample", serde_json::to_value(args).map_err(runtime)?, args.seed);
    manifest.input(&args.data).input(&args.checkpoint).checkpoint(&args.checkpoint);
    let dataset = load_dataset_checked(&args.data)?;
    let model = load_model_checked(&args.checkpoint, &dataset.vocabularies)?;

    let limits = PairLimits::default();
    let pairs: Vec<Result<(JunctionTree, ReactionTree), String>> =
        parallel_map(args.n, args.threads, |i| {
            model
                .sample_prior_one(&dataset.vocabularies, args.seed, i as u64, &limits)
                .map_err(|e| e.to_string())
        });
    let pairs: Vec<(JunctionTree, ReactionTree)> =
        pairs.into_iter().collect::<Result<_, _>>().map_err(runtime)?;

    let (entries, report) = with_backend(&dataset.vocabularies, args.oracle.as_deref(), |backend| {
        let mut entries = Vec::with_capacity(pairs.len());
        for (junction, reaction) in &pairs {
            let result = execute(reaction, &dataset.vocabularies, backend).map_err(runtime)?;
            entries.push(SampleEntry {
                junction: junction.clone(),
                reaction: reaction.clone(),
                valid: result.is_valid(),
                product: result.product,
            });
        }
        let trees: Vec<ReactionTree> = pairs.iter().map(|(_, r)| r.clone()).collect();
        let training: Vec<String> =
            dataset.trees.iter().map(|p| p.product.as_str().to_string()).collect();
        let report = compute_metrics(&trees, &training, &dataset.vocabularies, backend, None)
            .map_err(runtime)?;
        Ok((entries, report))
    })?;

    write_json_pretty(&args.out, &SamplesFile { format_version: SAMPLES_FORMAT_VERSION, samples: entries })?;
    let metrics_path = suffixed(&args.out, ".metrics.json");
    write_json_pretty(&metrics_path, &report)?;
    manifest.output(&args.out).output(&metrics_path);
    manifest.finish()?;
    Ok(report)
}

// ---------------------------------------------------------------------
// exec
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ExecArgs {
    pub data: PathBuf,
    pub tree: PathBuf,
    pub out: PathBuf,
    pub oracle: Option<String>,
}

/// Input for `exec`: a single reaction tree.
#[derive(Debug, Serialize, Deserialize)]
pub struct TreeFile {
    pub format_version: u32,
    pub reaction: ReactionTree,
}

pub fn cmd_exec(args: &ExecArgs) -> Result<ExecutionResult, PipelineError> {
    let mut manifest = ManifestBuilder::start("exec", serde_json::to_value(args).map_err(runtime)?, 0);
    manifest.input(&args.data).input(&args.tree);
    let dataset = load_dataset_checked(&args.data)?;
    let text = std::fs::read_to_string(&args.tree)
        .map_err(|e| validation(format!("reading {}: {e}", args.tree.display())))?;
    let tree_file: TreeFile = serde_json::from_str(&text).map_err(validation)?;
    if tree_file.format_version != TREE_FILE_FORMAT_VERSION {
        return Err(validation(format!("unsupported tree file version {}", tree_file.format_version)));
    }

    let result = with_backend(&dataset.vocabularies, args.oracle.as_deref(), |backend| {
        execute(&tree_file.reaction, &dataset.vocabularies, backend).map_err(|e| match e {
            crate::executor::ExecutorError::Structural(s) => validation(s),
            other => runtime(other),
        })
    })?;
    write_json_pretty(&args.out, &result)?;
    manifest.output(&args.out);
    manifest.finish()?;
    Ok(result)
}

// ---------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeArgs {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub bo_iters: usize,
    pub bo_batch: usize,
    pub oracle: Option<String>,
}

/// One line of the BO log.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoLogLine {
    pub iter: usize,
    /// Latent code as base64 of little-endian f32s.
    pub z: String,
    pub product: Option<String>,
    pub score: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoSummary {
    pub iterations: Vec<BoIterStats>,
    pub bo_top10_mean: f64,
    pub random_top10_mean: f64,
    pub bo_valid: usize,
    pub random_valid: usize,
}

pub fn cmd_optimize(args: &OptimizeArgs) -> Result<BoSummary, PipelineError> {
    let mut manifest =
        ManifestBuilder::start("optimize", serde_json::to_value(args).map_err(runtime)?, args.seed);
    manifest.input(&args.data).input(&args.checkpoint).checkpoint(&args.checkpoint);
    let dataset = load_dataset_checked(&args.data)?;
    let model = load_model_checked(&args.checkpoint, &dataset.vocabularies)?;

    let config = BoConfig {
        iterations: args.bo_iters,
        batch_per_iter: args.bo_batch,
        seed: args.seed,
        ..BoConfig::default()
    };
    let limits = PairLimits::default();
    let budget = args.bo_iters * args.bo_batch;

    let (bo, random) = with_backend(&dataset.vocabularies, args.oracle.as_deref(), |backend| {
        let bo = bo_loop(&model, &dataset.vocabularies, &dataset, backend, &toy_scorer, &config, &limits)
            .map_err(runtime)?;
        let random =
            random_search(&model, &dataset.vocabularies, backend, &toy_scorer, budget, args.seed, &limits)
                .map_err(runtime)?;
        Ok((bo, random))
    })?;

    // JSON-lines log, one record per evaluated candidate
    let mut log = String::new();
    for r in &bo.records {
        let line = BoLogLine {
            iter: r.iter,
            z: base64_f32(&r.z),
            product: r.product.clone(),
            score: r.score,
            valid: r.valid,
        };
        log.push_str(&serde_json::to_string(&line).map_err(runtime)?);
        log.push('\n');
    }
    std::fs::write(&args.out, log).map_err(|e| runtime(format!("writing {}: {e}", args.out.display())))?;

    let summary = BoSummary {
        iterations: bo.iters.clone(),
        bo_top10_mean: top_k_mean(&bo, 10),
        random_top10_mean: top_k_mean(&random, 10),
        bo_valid: bo.records.iter().filter(|r| r.valid).count(),
        random_valid: random.records.iter().filter(|r| r.valid).count(),
    };
    let summary_path = suffixed(&args.out, ".summary.json");
    write_json_pretty(&summary_path, &summary)?;

    let hist_path = suffixed(&args.out, ".hist.csv");
    std::fs::write(&hist_path, score_histograms_csv(&random, &bo))
        .map_err(|e| runtime(format!("writing {}: {e}", hist_path.display())))?;

    manifest.output(&args.out).output(&summary_path).output(&hist_path);
    manifest.finish()?;
    Ok(summary)
}

fn base64_f32(z: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(z.len() * 4);
    for v in z {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn top_k_mean(run: &BoRun, k: usize) -> f64 {
    let scores = run.sorted_scores();
    if scores.is_empty() {
        return f64::NEG_INFINITY;
    }
    let k = k.min(scores.len());
    scores[..k].iter().sum::<f64>() / k as f64
}

/// CSV of aligned score histograms: `bin_lo,bin_hi,random,bo`.
fn score_histograms_csv(random: &BoRun, bo: &BoRun) -> String {
    const BINS: usize = 24;
    let all: Vec<f64> = random
        .records
        .iter()
        .chain(bo.records.iter())
        .filter_map(|r| r.score)
        .collect();
    let mut out = String::from("bin_lo,bin_hi,random,bo\n");
    if all.is_empty() {
        return out;
    }
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / BINS as f64).max(1e-9);
    let mut rand_hist = [0usize; BINS];
    let mut bo_hist = [0usize; BINS];
    let bin_of = |v: f64| (((v - lo) / width) as usize).min(BINS - 1);
    for r in &random.records {
        if let Some(s) = r.score {
            rand_hist[bin_of(s)] += 1;
        }
    }
    for r in &bo.records {
        if let Some(s) = r.score {
            bo_hist[bin_of(s)] += 1;
        }
    }
    for b in 0..BINS {
        out.push_str(&format!(
            "{},{},{},{}\n",
            lo + b as f64 * width,
            lo + (b + 1) as f64 * width,
            rand_hist[b],
            bo_hist[b]
        ));
    }
    out
}

// ---------------------------------------------------------------------
// eval-synth
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EvalSynthArgs {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub n: usize,
    pub k_decodes: usize,
    pub seed: u64,
    pub oracle: Option<String>,
}

pub fn cmd_eval_synth(args: &EvalSynthArgs) -> Result<SynthReport, PipelineError> {
    let mut manifest =
        ManifestBuilder::start("eval-synth", serde_json::to_value(args).map_err(runtime)?, args.seed);
    manifest.input(&args.data).input(&args.checkpoint).checkpoint(&args.checkpoint);
    let dataset = load_dataset_checked(&args.data)?;
    let model = load_model_checked(&args.checkpoint, &dataset.vocabularies)?;

    let report = with_backend(&dataset.vocabularies, args.oracle.as_deref(), |backend| {
        model
            .synthesizability_eval(
                &dataset.vocabularies,
                backend,
                args.n,
                args.k_decodes,
                args.seed,
                &PairLimits::default(),
            )
            .map_err(runtime)
    })?;
    write_json_pretty(&args.out, &report)?;
    manifest.output(&args.out);
    manifest.finish()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen_args(dir: &Path, seed: u64, trees: usize) -> GenDataArgs {
        GenDataArgs {
            out: dir.join(format!("d{seed}.json")),
            gen: GenConfigArgs {
                seed,
                trees,
                templates: 4,
                start_molecules: 12,
                max_depth: 2,
                frequency_floor: Some(5),
            },
        }
    }

    fn tiny_train_args(data: &Path, out: &Path) -> TrainArgs {
        TrainArgs {
            data: data.to_path_buf(),
            out: out.to_path_buf(),
            config: ModelConfig {
                latent_dim: 3,
                hidden_dim: 6,
                epochs: 2,
                batch_size: 8,
                seed: 1,
                ..ModelConfig::default()
            },
            use_step_context: false,
        }
    }

    #[test]
    fn gen_data_is_byte_deterministic_and_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let a = gen_args(dir.path(), 1, 10);
        cmd_gen_data(&a).unwrap();
        let first = std::fs::read(&a.out).unwrap();
        std::fs::remove_file(&a.out).unwrap();
        cmd_gen_data(&a).unwrap();
        assert_eq!(first, std::fs::read(&a.out).unwrap());
        let manifest = std::fs::read_to_string(suffixed(&a.out, ".manifest.json")).unwrap();
        let m: RunManifest = serde_json::from_str(&manifest).unwrap();
        assert_eq!(m.command, "gen-data");
        assert_eq!(m.seed, 1);
    }

    #[test]
    fn train_sample_exec_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = gen_args(dir.path(), 2, 12);
        cmd_gen_data(&g).unwrap();
        let ckpt = dir.path().join("m.ckpt");
        let t = tiny_train_args(&g.out, &ckpt);
        let report = cmd_train(&t).unwrap();
        assert_eq!(report.epochs.len(), 2);
        assert!(ckpt.exists());
        assert!(suffixed(&ckpt, ".json").exists());
        assert!(suffixed(&ckpt, ".report.csv").exists());

        let samples = dir.path().join("s.json");
        let s = SampleArgs {
            data: g.out.clone(),
            checkpoint: ckpt.clone(),
            out: samples.clone(),
            n: 12,
            seed: 3,
            threads: 2,
            oracle: None,
        };
        let metrics = cmd_sample(&s).unwrap();
        assert_eq!(metrics.counts.generated, 12);
        assert!(metrics.validity >= 0.0 && metrics.validity <= 100.0);
        let parsed: SamplesFile =
            serde_json::from_str(&std::fs::read_to_string(&samples).unwrap()).unwrap();
        assert_eq!(parsed.samples.len(), 12);

        // execute the first sampled tree through the exec command
        let tree_path = dir.path().join("t.json");
        let tree_file =
            TreeFile { format_version: 1, reaction: parsed.samples[0].reaction.clone() };
        std::fs::write(&tree_path, serde_json::to_string(&tree_file).unwrap()).unwrap();
        let out = dir.path().join("r.json");
        let result = cmd_exec(&ExecArgs {
            data: g.out.clone(),
            tree: tree_path,
            out: out.clone(),
            oracle: None,
        })
        .unwrap();
        assert_eq!(result.is_valid(), parsed.samples[0].valid);
        assert!(out.exists());
    }

    #[test]
    fn checkpoint_reproduces_training_loss_after_reload() {
        let dir = tempfile::tempdir().unwrap();
        let g = gen_args(dir.path(), 9, 10);
        cmd_gen_data(&g).unwrap();
        let ckpt = dir.path().join("m.ckpt");
        let args = tiny_train_args(&g.out, &ckpt);
        cmd_train(&args).unwrap();

        // retrain in-process with the identical config, then compare the
        // reloaded checkpoint's evaluation against the live model's
        let dataset = crate::trees::load_dataset(&g.out).unwrap();
        let mut live = Model::new(&dataset.vocabularies, args.config.clone(), false).unwrap();
        crate::vae::train(&mut live, &dataset).unwrap();
        let loaded = Model::load(&ckpt).unwrap();
        let beta = crate::vae::beta_at(args.config.epochs - 1, args.config.kl_warmup_epochs);
        let a = crate::vae::evaluate(&live, &dataset, beta, 0).unwrap();
        let b = crate::vae::evaluate(&loaded, &dataset, beta, 0).unwrap();
        // only f32 storage rounding separates them
        assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn missing_data_file_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_train(&tiny_train_args(&dir.path().join("nope.json"), &dir.path().join("m.ckpt")))
            .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sample_outputs_are_thread_count_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let g = gen_args(dir.path(), 4, 10);
        cmd_gen_data(&g).unwrap();
        let ckpt = dir.path().join("m.ckpt");
        cmd_train(&tiny_train_args(&g.out, &ckpt)).unwrap();
        let run = |threads: usize, name: &str| {
            let out = dir.path().join(name);
            cmd_sample(&SampleArgs {
                data: g.out.clone(),
                checkpoint: ckpt.clone(),
                out: out.clone(),
                n: 8,
                seed: 5,
                threads,
                oracle: None,
            })
            .unwrap();
            std::fs::read(out).unwrap()
        };
        assert_eq!(run(1, "a.json"), run(4, "b.json"));
    }
}
