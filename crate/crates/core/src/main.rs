use clap::Parser;
use qtherm::cli::{run_cli, Cli};
use qtherm::parallel;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    parallel::configure_workers(parallel::requested_workers());
    std::process::exit(run_cli(Cli::parse()));
}
