fn main() {
    std::process::exit(tricast::cli::main_with_args(std::env::args_os()));
}
