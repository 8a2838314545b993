fn main() {
    std::process::exit(henonlab::harness::cli::run_cli(std::env::args_os()));
}
