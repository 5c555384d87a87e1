fn main() {
    std::process::exit(qumode::cli::run(std::env::args_os()));
}
