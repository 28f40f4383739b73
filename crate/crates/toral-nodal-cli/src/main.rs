//! Command-line driver for the toral nodal-set experiments.
//!
//! Exit codes: 0 on success, 1 on validation errors (including bad
//! flags), 2 on numerical failures.

mod commands;
mod marching;
mod phi_source;

use clap::Parser;

use commands::Cli;

fn main() {
    // Die quietly when the output pipe closes (e.g. under `head`).
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Ok(n) = std::env::var("TORAL_NODAL_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are validation errors.
            let _ = e.print();
            std::process::exit(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
