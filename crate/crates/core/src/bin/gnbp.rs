fn main() {
    std::process::exit(gnbp::cli::run(std::env::args_os()));
}
