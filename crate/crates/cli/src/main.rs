fn main() {
    std::process::exit(jkge_cli::run(std::env::args_os()));
}
