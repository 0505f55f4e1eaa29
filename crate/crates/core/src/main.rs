fn main() {
    let code = cde::cli::run(std::env::args_os());
    std::process::exit(code);
}
