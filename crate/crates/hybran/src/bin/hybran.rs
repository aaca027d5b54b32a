fn main() {
    std::process::exit(hybran::cli::run(std::env::args_os()));
}
