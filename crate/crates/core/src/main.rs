use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = archaug::cli::Cli::parse();
    if let Err(e) = archaug::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
