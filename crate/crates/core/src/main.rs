fn main() {
    std::process::exit(lotto::cli::run_from(std::env::args_os()));
}
