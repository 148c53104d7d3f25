fn main() {
    std::process::exit(raar_core::cli::run_cli(std::env::args_os()));
}
