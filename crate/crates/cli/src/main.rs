fn main() {
    std::process::exit(dew_cli::run_from_args(std::env::args_os()));
}
