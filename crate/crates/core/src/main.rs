fn main() {
    std::process::exit(lastbin::cli::run(std::env::args()));
}
