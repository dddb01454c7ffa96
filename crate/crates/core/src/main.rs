fn main() {
    std::process::exit(icalign::cli::main_entry());
}
