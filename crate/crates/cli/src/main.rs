//! `pgbn`: batch front end over the inference library. Every subcommand is
//! deterministic given its seed, worker count, and input files; failures
//! exit nonzero after printing a single `error: ...` line to standard
//! error.

mod args;
mod cmd;
mod io;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's rich help/usage text, then the machine-parsable
            // trailer line.
            let _ = e.print();
            if e.use_stderr() {
                eprintln!("error: invalid command line");
                std::process::exit(2);
            }
            // --help and --version land here; they are not failures.
            std::process::exit(0);
        }
    };
    let workers = cli.common().workers.max(1);
    if let Err(e) =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()
    {
        eprintln!("error: worker pool setup failed: {e}");
        std::process::exit(1);
    }
    let result = match cli.command {
        Command::Train(args) => cmd::train::run(args),
        Command::Eval(args) => cmd::eval::run(args),
        Command::Features(args) => cmd::features::run(args),
        Command::Generate(args) => cmd::generate::run(args),
        Command::Topics(args) => cmd::topics::run(args),
        Command::Diagnose(args) => cmd::diagnose::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", one_line(&e));
        std::process::exit(1);
    }
}

/// Flatten an error chain onto one line: `context: cause: root`.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for (i, cause) in e.chain().enumerate() {
        if i > 0 {
            msg.push_str(": ");
        }
        msg.push_str(&cause.to_string().replace('\n', "; "));
    }
    msg
}
