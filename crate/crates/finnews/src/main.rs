fn main() {
    std::process::exit(finnews::cli::main());
}
