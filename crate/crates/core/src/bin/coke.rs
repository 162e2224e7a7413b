fn main() {
    std::process::exit(coke::cli::main_with_args(std::env::args_os()));
}
