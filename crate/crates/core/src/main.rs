fn main() {
    std::process::exit(remix::cli::run(std::env::args_os()));
}
