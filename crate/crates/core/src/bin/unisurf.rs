fn main() {
    std::process::exit(unisurf::cli::main());
}
