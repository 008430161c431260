fn main() {
    std::process::exit(simsearch_cli::run(std::env::args_os()));
}
