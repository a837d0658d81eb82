fn main() {
    std::process::exit(smellvote::cli::run(std::env::args_os()));
}
