use clap::Parser;

fn main() {
    let cli = rcm_lab::Cli::parse();
    std::process::exit(rcm_lab::run(cli.command));
}
