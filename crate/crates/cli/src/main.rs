fn main() {
    std::process::exit(ctra_cli::main_with_args(std::env::args_os()));
}
