fn main() {
    std::process::exit(gibbsflow::cli::main_with_args(std::env::args_os()));
}
