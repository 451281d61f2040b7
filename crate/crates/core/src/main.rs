fn main() {
    let code = colorcast::cli::run(std::env::args_os());
    std::process::exit(code);
}
