fn main() {
    std::process::exit(kdvctl::run(std::env::args_os()));
}
