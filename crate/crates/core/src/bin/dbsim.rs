use clap::Parser;

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    dbsim::cli::main_with(dbsim::cli::Cli::parse())
}
