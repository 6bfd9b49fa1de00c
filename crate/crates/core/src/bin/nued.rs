fn main() {
    std::process::exit(nued::cli::run(std::env::args_os()));
}
