fn main() {
    std::process::exit(plap::cli::run());
}
