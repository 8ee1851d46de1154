//! `lda`: train, apply and inspect LDA topic models.

mod analyze;
mod args;
mod infer;
mod input;
mod train;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::TrainGibbs(a) => train::train_gibbs(&a, seed),
        Command::TrainVem(a) => train::train_vem(&a, seed),
        Command::InferGibbs(a) => infer::infer_gibbs(&a, seed),
        Command::InferVem(a) => infer::infer_vem(&a),
        Command::Perplexity(a) => infer::perplexity(&a, seed),
        Command::Similar(a) => analyze::similar(&a),
        Command::Tags(a) => analyze::tags(&a),
        Command::TopicRank(a) => analyze::topic_rank(&a),
        Command::WordRank(a) => analyze::word_rank(&a),
        Command::DocQuality(a) => analyze::doc_quality(&a),
        Command::Convert(a) => analyze::convert(&a),
        Command::Est(a) => train::train_vem(&a.into_train_vem(), seed),
        Command::Inf(a) => infer::infer_vem(&a.into_infer_vem()),
    }
}
