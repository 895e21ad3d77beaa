fn main() {
    std::process::exit(nlde::cli::run_cli(std::env::args_os()));
}
