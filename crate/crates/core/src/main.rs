fn main() {
    std::process::exit(dampwave::cli::main_with_args(std::env::args_os()));
}
