use clap::Parser;
use coordgate_lab::cli::{exit_code, run, Args, EXIT_OK};

fn main() {
    let args = Args::parse();
    let code = match run(&args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("coordgate-lab: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}
