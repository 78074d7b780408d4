fn main() {
    std::process::exit(irfconc::cli::run(std::env::args_os()));
}
