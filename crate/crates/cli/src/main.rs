fn main() {
    std::process::exit(mai_cli::main_with(std::env::args_os()));
}
