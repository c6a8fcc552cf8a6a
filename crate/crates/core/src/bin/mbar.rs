fn main() {
    std::process::exit(mbar_kernel::cli::main());
}
