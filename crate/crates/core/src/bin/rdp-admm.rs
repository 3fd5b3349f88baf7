fn main() {
    std::process::exit(rdp_admm::cli::run(std::env::args_os()));
}
