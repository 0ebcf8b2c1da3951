fn main() {
    std::process::exit(proofmill::cli::run());
}
