use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DDLAB_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = ddlab::cli::Cli::parse();
    if let Err(e) = ddlab::run(cli) {
        log::error!("{e}");
        std::process::exit(e.exit_code());
    }
}
