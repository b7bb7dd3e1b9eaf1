fn main() {
    let status = fusekit::cli::run(std::env::args_os());
    std::process::exit(status.code());
}
