fn main() {
    std::process::exit(rendergate::cli::run());
}
