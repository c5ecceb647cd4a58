use clap::Parser;

fn main() {
    let cli = cglisp_cli::Cli::parse();
    if let Err(e) = cglisp_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
