fn main() {
    std::process::exit(autobid_cli::run(std::env::args_os()));
}
