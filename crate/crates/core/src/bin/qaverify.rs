fn main() -> std::process::ExitCode {
    qaverify::cli::main()
}
