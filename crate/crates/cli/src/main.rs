fn main() {
    std::process::exit(rase::cli::run(std::env::args_os()));
}
