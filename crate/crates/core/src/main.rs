fn main() {
    let code = mintraj::bench::cli::cli_main(std::env::args_os());
    std::process::exit(code);
}
