fn main() {
    std::process::exit(hystkin::cli::run(std::env::args_os()));
}
