fn main() {
    std::process::exit(remp::cli::run(std::env::args_os()));
}
