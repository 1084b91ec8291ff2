fn main() {
    std::process::exit(fracpen::cli::main_with_args(std::env::args_os()));
}
