fn main() {
    std::process::exit(steklov_core::cli::run_command(std::env::args_os()));
}
