fn main() {
    std::process::exit(painleve2::cli::run());
}
