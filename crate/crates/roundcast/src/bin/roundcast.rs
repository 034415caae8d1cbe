fn main() {
    std::process::exit(roundcast::cli::run(std::env::args_os()));
}
