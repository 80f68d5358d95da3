fn main() {
    std::process::exit(pdav::cli::run_cli(std::env::args_os()));
}
