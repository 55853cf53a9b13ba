fn main() {
    gridsec_core::cli::main();
}
