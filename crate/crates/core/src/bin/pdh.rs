fn main() {
    std::process::exit(pdh::cli::main_with_args(std::env::args_os()));
}
