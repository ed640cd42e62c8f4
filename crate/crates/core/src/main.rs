fn main() {
    std::process::exit(lsi_core::cli::cli_run(std::env::args_os()));
}
