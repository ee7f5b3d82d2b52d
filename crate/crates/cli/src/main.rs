fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CPATH_LOG", "warn")).init();
    std::process::exit(centralpath_cli::run(std::env::args_os()));
}
