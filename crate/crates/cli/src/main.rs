use clap::Parser;
use granular_cli::cli::{execute, init_workers, Cli};
use granular_cli::{CliError, RunConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = RunConfig::load(cli.config.as_deref(), &cli.overrides)
        .and_then(|cfg| init_workers(cfg.workers))
        .and_then(|()| execute(&cli));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(CliError::exit_code(&e));
    }
}
