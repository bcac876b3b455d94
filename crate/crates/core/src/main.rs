fn main() {
    std::process::exit(adaptive_binpack::cli::run_cli(std::env::args_os()));
}
