fn main() -> std::process::ExitCode {
    entnav::cli::main()
}
