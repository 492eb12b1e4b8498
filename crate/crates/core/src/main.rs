fn main() {
    std::process::exit(bayesprice::cli::run(std::env::args()));
}
