fn main() {
    std::process::exit(cad_processor::cli::main_with_args(std::env::args_os()));
}
