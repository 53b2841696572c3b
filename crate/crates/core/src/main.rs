fn main() {
    std::process::exit(hankit::cli::run(std::env::args_os()));
}
