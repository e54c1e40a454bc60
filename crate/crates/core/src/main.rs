fn main() {
    std::process::exit(fsmodel::cli::run_from_env());
}
