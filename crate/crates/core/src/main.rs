fn main() -> std::process::ExitCode {
    codequal::interface::cli::main()
}
