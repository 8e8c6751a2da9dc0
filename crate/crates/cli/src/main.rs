//! `structformer` command-line tool.

mod evaluate;
mod induce;
mod io;
mod manifest;
mod preprocess;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "structformer",
    version,
    about = "Unsupervised syntactic structure induction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Normalize a corpus and build its vocabulary or BPE model.
    Preprocess(preprocess::Args),
    /// Pretrain a model with masked language modeling.
    Train(train::Args),
    /// Induce constituency and dependency trees with a trained parser.
    Induce(induce::Args),
    /// Unlabeled constituency precision, recall and F1.
    EvalConst(evaluate::ConstArgs),
    /// Unlabeled attachment score.
    EvalDep(evaluate::DepArgs),
    /// Pairwise agreement between induction runs.
    SelfConsistency(evaluate::ConsistencyArgs),
    /// Recall of gold subword constituents.
    SwcRecall(evaluate::SwcArgs),
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Preprocess(a) => preprocess::run(a),
        Command::Train(a) => train::run(a),
        Command::Induce(a) => induce::run(a),
        Command::EvalConst(a) => evaluate::run_const(a),
        Command::EvalDep(a) => evaluate::run_dep(a),
        Command::SelfConsistency(a) => evaluate::run_consistency(a),
        Command::SwcRecall(a) => evaluate::run_swc(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STRUCTFORMER_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}");
            eprintln!(
                "error: {}",
                msg.split_whitespace().collect::<Vec<_>>().join(" ")
            );
            ExitCode::FAILURE
        }
    }
}
