fn main() {
    std::process::exit(contrast_xai::cli::main_with_args(std::env::args_os()));
}
