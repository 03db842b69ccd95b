fn main() {
    std::process::exit(halfline::cli::dispatch(std::env::args_os()));
}
