fn main() {
    env_logger::init();
    std::process::exit(cryptorates_cli::run(std::env::args_os()));
}
