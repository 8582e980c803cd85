use clap::Parser;
use gedanken::cli::{execute, Args, LOG_ENV};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let args = Args::parse();
    std::process::exit(execute(&args));
}
