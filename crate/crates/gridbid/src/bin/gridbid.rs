fn main() {
    std::process::exit(gridbid::cli::main());
}
