fn main() {
    std::process::exit(palmforge::cli::run(std::env::args_os()));
}
