fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = pdmp_kit::cli::configure_threads() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    std::process::exit(pdmp_kit::cli::main_with_args(std::env::args_os()));
}
