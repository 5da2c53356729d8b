fn main() {
    std::process::exit(fracscheme::harness::cli::main_with_args(std::env::args_os()));
}
