fn main() {
    let code = dftpe::cli::run(std::env::args_os());
    std::process::exit(code);
}
