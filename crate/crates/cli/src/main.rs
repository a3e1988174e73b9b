fn main() {
    std::process::exit(defectometer::run_from(std::env::args_os()));
}
