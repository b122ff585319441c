fn main() {
    std::process::exit(langchange::cli::main_with_args(std::env::args_os()));
}
