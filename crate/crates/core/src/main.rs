fn main() {
    std::process::exit(flaky_timeouts::cli::run(std::env::args_os()));
}
