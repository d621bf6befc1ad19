fn main() {
    std::process::exit(hybrid_nas::cli::run(std::env::args_os()));
}
