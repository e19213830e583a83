//! `ralm`: command-line driver for retrieval-augmented LM evaluation.

mod args;
mod commands;
mod failure;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use failure::Failure;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return Failure::from(e).report();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return Failure::from(e).report(),
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match run(cli.command, name, sub, cli.config.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn run(
    command: Command,
    name: &str,
    matches: &clap::ArgMatches,
    config: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let ctx = settings::Resolver::new(name, matches, config)?;
    match command {
        Command::Ingest(a) => commands::ingest(ctx.resolve(a)?, &ctx),
        Command::Index(a) => commands::index(ctx.resolve(a)?, &ctx),
        Command::Search(a) => commands::search(ctx.resolve(a)?, &ctx),
        Command::LmTrain(a) => commands::lm_train(ctx.resolve(a)?, &ctx),
        Command::EvalPpl(a) => commands::eval_ppl(ctx.resolve(a)?, &ctx),
        Command::Sweep(a) => commands::sweep(ctx.resolve(a)?, &ctx),
        Command::RerankCollect(a) => commands::rerank_collect(ctx.resolve(a)?, &ctx),
        Command::RerankTrain(a) => commands::rerank_train(ctx.resolve(a)?, &ctx),
        Command::Odqa(a) => commands::odqa(ctx.resolve(a)?, &ctx),
        Command::Serve(a) => commands::serve(ctx.resolve(a)?),
        Command::Conformance(a) => commands::conformance(ctx.resolve(a)?),
    }
}
