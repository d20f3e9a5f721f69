fn main() {
    std::process::exit(summakit_cli::main_entry());
}
