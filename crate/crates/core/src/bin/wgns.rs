fn main() {
    std::process::exit(wgns::cli::main_with_args(std::env::args_os()));
}
