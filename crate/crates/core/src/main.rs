fn main() {
    std::process::exit(ab_homotopy::cli::main_with(std::env::args_os()));
}
