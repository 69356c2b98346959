fn main() {
    std::process::exit(hsp::cli::main_exit_code());
}
