fn main() {
    std::process::exit(pnls::cli::main());
}
