fn main() {
    std::process::exit(bwskit_cli::cli::run(std::env::args_os()));
}
