fn main() {
    std::process::exit(balflow::cli::run(std::env::args_os()));
}
