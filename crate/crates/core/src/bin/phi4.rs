fn main() {
    std::process::exit(phi4_core::cli::run());
}
