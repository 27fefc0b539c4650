fn main() {
    std::process::exit(docre::cli::run(std::env::args_os()));
}
