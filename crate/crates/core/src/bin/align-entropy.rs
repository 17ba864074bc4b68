fn main() -> std::process::ExitCode {
    align_entropy::cli::main()
}
