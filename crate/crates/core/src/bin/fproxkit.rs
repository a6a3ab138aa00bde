fn main() {
    std::process::exit(fproxkit::cli::main_with_args(std::env::args_os()));
}
