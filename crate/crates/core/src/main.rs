fn main() {
    std::process::exit(blocklab::cli::main());
}
