fn main() {
    std::process::exit(daic::cli::main());
}
