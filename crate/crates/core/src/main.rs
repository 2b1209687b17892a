fn main() {
    std::process::exit(active_search::cli::main());
}
