fn main() {
    std::process::exit(cmlkit::cli::run(std::env::args_os()));
}
