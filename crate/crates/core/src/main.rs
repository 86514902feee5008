fn main() {
    std::process::exit(growthwave::cli::main_with_args(std::env::args_os()));
}
