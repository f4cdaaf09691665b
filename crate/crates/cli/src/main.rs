fn main() {
    std::process::exit(papc_cli::run(std::env::args_os()));
}
