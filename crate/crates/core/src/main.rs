fn main() {
    std::process::exit(warmstop_core::cli::main());
}
