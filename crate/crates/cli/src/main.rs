//! `synthtree`: synthetic data generation, training, sampling, tree
//! execution, synthesizability evaluation, and latent-space Bayesian
//! optimization, all seed-reproducible.
//!
//! Exit codes: 0 success, 1 bad flags or invalid inputs, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use synthtree::pipeline::{
    cmd_eval_synth, cmd_exec, cmd_gen_data, cmd_optimize, cmd_sample, cmd_train, EvalSynthArgs,
    ExecArgs, GenConfigArgs, GenDataArgs, OptimizeArgs, SampleArgs, TrainArgs,
};
use synthtree::vae::ModelConfig;

#[derive(Parser)]
#[command(name = "synthtree", version, about = "Generative modeling over synthesis routes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of executable reaction trees.
    GenData(GenDataCli),
    /// Train the paired-tree VAE on a dataset.
    Train(TrainCli),
    /// Decode prior samples and report generation metrics.
    Sample(SampleCli),
    /// Execute one reaction tree from a JSON file.
    Exec(ExecCli),
    /// Run batched Bayesian optimization against the toy scorer.
    Optimize(OptimizeCli),
    /// Run the modal-decode synthesizability protocol.
    EvalSynth(EvalSynthCli),
}

#[derive(Args)]
struct GenDataCli {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of reaction trees to generate.
    #[arg(long, default_value_t = 1000)]
    trees: usize,
    #[arg(long, default_value_t = 20)]
    templates: usize,
    #[arg(long, default_value_t = 60)]
    start_molecules: usize,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    /// Occurrence floor for templates and starting molecules; 0 disables.
    #[arg(long, default_value_t = 5)]
    frequency_floor: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCli {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 50)]
    latent_dim: usize,
    #[arg(long, default_value_t = 200)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    kl_warmup: usize,
    /// Recompute each reactant step's attention context from the
    /// previous hidden state instead of reusing the parent's.
    #[arg(long, default_value_t = false)]
    use_step_context: bool,
}

#[derive(Args)]
struct SampleCli {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of prior samples to decode.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Reaction oracle endpoint (host:port); default is the toy backend.
    #[arg(long)]
    oracle: Option<String>,
}

#[derive(Args)]
struct ExecCli {
    #[arg(long)]
    data: PathBuf,
    /// JSON file holding one reaction tree.
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    oracle: Option<String>,
}

#[derive(Args)]
struct OptimizeCli {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// BO log (JSON lines); the summary and histogram CSV sit next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    bo_iters: usize,
    #[arg(long, default_value_t = 50)]
    bo_batch: usize,
    #[arg(long)]
    oracle: Option<String>,
}

#[derive(Args)]
struct EvalSynthCli {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of prior codes.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k_decodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    oracle: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successes, everything else is a usage
            // error on stderr with exit code 1
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::GenData(a) => cmd_gen_data(&GenDataArgs {
            out: a.out,
            gen: GenConfigArgs {
                seed: a.seed,
                trees: a.trees,
                templates: a.templates,
                start_molecules: a.start_molecules,
                max_depth: a.max_depth,
                frequency_floor: if a.frequency_floor == 0 { None } else { Some(a.frequency_floor) },
            },
        })
        .map(|()| serde_json::json!({"status": "ok"})),
        Command::Train(a) => cmd_train(&TrainArgs {
            data: a.data,
            out: a.out,
            config: ModelConfig {
                latent_dim: a.latent_dim,
                hidden_dim: a.hidden_dim,
                lr: a.lr,
                batch_size: a.batch_size,
                epochs: a.epochs,
                kl_warmup_epochs: a.kl_warmup,
                seed: a.seed,
            },
            use_step_context: a.use_step_context,
        })
        .map(|report| {
            serde_json::json!({
                "status": "ok",
                "epochs": report.epochs.len(),
                "final_loss": report.final_total(),
            })
        }),
        Command::Sample(a) => cmd_sample(&SampleArgs {
            data: a.data,
            checkpoint: a.checkpoint,
            out: a.out,
            n: a.n,
            seed: a.seed,
            threads: a.threads,
            oracle: a.oracle,
        })
        .map(|m| serde_json::to_value(m).expect("metrics serialize")),
        Command::Exec(a) => cmd_exec(&ExecArgs { data: a.data, tree: a.tree, out: a.out, oracle: a.oracle })
            .map(|r| serde_json::to_value(r).expect("result serializes")),
        Command::Optimize(a) => cmd_optimize(&OptimizeArgs {
            data: a.data,
            checkpoint: a.checkpoint,
            out: a.out,
            seed: a.seed,
            bo_iters: a.bo_iters,
            bo_batch: a.bo_batch,
            oracle: a.oracle,
        })
        .map(|s| serde_json::to_value(s).expect("summary serializes")),
        Command::EvalSynth(a) => cmd_eval_synth(&EvalSynthArgs {
            data: a.data,
            checkpoint: a.checkpoint,
            out: a.out,
            n: a.n,
            k_decodes: a.k_decodes,
            seed: a.seed,
            oracle: a.oracle,
        })
        .map(|r| serde_json::to_value(r).expect("report serializes")),
    };

    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
