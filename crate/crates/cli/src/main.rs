fn main() -> std::process::ExitCode {
    moprompt::cli::main()
}
