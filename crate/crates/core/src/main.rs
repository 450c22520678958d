fn main() -> std::process::ExitCode {
    bioattn::cli::main()
}
