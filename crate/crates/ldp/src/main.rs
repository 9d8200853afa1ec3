fn main() {
    std::process::exit(ldp::cli::run(std::env::args_os()));
}
