fn main() {
    std::process::exit(rectbound_cli::run(std::env::args_os()));
}
