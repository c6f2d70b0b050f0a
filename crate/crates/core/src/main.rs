fn main() {
    std::process::exit(u2x::harness::cli::run(std::env::args_os()));
}
