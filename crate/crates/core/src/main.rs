fn main() -> std::process::ExitCode {
    stprune::cli::main_entry()
}
