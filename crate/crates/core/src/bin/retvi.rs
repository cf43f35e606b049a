fn main() {
    std::process::exit(retvi::cli::run(std::env::args_os()));
}
