use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("ECCM_LOG_LEVEL", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(eccm::cli::run(std::env::args_os()));
}
