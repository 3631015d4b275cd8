fn main() {
    std::process::exit(cbmap::cli::run(std::env::args_os()));
}
