fn main() {
    std::process::exit(rough_domain::cli::run(std::env::args_os()));
}
