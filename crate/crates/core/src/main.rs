fn main() {
    std::process::exit(subclt::cli::run_cli(std::env::args_os()));
}
