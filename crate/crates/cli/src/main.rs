fn main() {
    std::process::exit(hanoi_cli::run(std::env::args_os()));
}
