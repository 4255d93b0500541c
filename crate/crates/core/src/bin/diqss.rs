fn main() {
    std::process::exit(diqss::cli::run(std::env::args_os()));
}
