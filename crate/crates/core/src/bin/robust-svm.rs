fn main() {
    std::process::exit(robust_svm::cli::run(std::env::args_os()));
}
