fn main() {
    std::process::exit(passnode::cli::main_with(std::env::args_os()));
}
