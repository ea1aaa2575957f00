fn main() {
    std::process::exit(slm_cli::run(std::env::args_os()));
}
