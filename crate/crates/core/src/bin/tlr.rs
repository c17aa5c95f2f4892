fn main() {
    std::process::exit(tlr_core::cli::main_with_args(std::env::args_os()));
}
