fn main() {
    std::process::exit(factuality::cli::dispatch(std::env::args_os()));
}
