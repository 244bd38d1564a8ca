fn main() {
    std::process::exit(sbcm_cli::main_entry());
}
