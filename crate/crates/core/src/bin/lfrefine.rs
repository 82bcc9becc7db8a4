fn main() {
    std::process::exit(lfrefine::cli::run(std::env::args_os()));
}
