use clap::Parser;

fn main() {
    let cli = trvqc_cli::Cli::parse();
    if let Err(e) = trvqc_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
