fn main() {
    std::process::exit(robust_mca::cli::run(std::env::args_os()));
}
