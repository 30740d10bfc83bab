fn main() {
    std::process::exit(hgts::cli::main());
}
