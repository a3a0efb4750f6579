fn main() {
    std::process::exit(momentkit::cli::main_entry());
}
