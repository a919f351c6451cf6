fn main() {
    std::process::exit(iriskit_cli::run(std::env::args_os()));
}
