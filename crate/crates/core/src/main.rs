fn main() {
    std::process::exit(mvsk::cli::run(std::env::args_os()));
}
