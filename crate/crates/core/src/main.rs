fn main() {
    std::process::exit(codim2_core::cli::run(std::env::args_os()));
}
