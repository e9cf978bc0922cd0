use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = layerrank_cli::run_command(std::env::args_os(), &mut out);
    let _ = out.flush();
    match result {
        Ok(summary) => {
            if summary.network_calls > 0 {
                eprintln!("{} chat requests sent", summary.network_calls);
            }
            ExitCode::SUCCESS
        }
        Err(layerrank_cli::CliError::Usage(message)) => {
            eprint!("{message}");
            if !message.ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
