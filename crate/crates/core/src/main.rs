fn main() {
    std::process::exit(xilab::cli::run(std::env::args_os()));
}
