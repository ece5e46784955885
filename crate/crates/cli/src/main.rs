fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(speech2traj_cli::main_with(std::env::args_os()))
}
