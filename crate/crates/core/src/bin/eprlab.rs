fn main() {
    std::process::exit(eprlab::cli::run(std::env::args_os()));
}
