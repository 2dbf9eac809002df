fn main() {
    std::process::exit(graspkit::cli::run());
}
