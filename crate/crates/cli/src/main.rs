fn main() {
    std::process::exit(resonant::run(std::env::args_os()));
}
