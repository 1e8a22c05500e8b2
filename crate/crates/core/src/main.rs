fn main() {
    std::process::exit(diaghyp::cli::main_with_args(std::env::args_os()));
}
