fn main() {
    std::process::exit(gpushare::cli::run_cli(std::env::args_os()));
}
