fn main() {
    std::process::exit(thermoctl::run(std::env::args_os()));
}
