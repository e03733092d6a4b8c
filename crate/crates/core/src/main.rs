fn main() {
    std::process::exit(spanqa::cli::run(std::env::args_os()));
}
