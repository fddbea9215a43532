fn main() {
    std::process::exit(wrapcop::cli::run(std::env::args_os()));
}
