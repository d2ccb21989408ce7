fn main() {
    std::process::exit(sodm::cli::run(std::env::args_os()));
}
