mod augment;
mod eval;
mod pipeline;
mod serve;
mod split;
mod stats;

use std::path::Path;

use crate::cli::{Cli, Command};

pub use augment::augment;
pub use eval::{eval, EvalOutput};
pub use pipeline::{open_workspace, pipeline};
pub use serve::serve;
pub use split::split;
pub use stats::stats;

/// Runs one subcommand, printing its results to stdout.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let text = match cli.command {
        Command::Eval(a) => eval(&a)?,
        Command::Stats(a) => stats(&a)?,
        Command::Split(a) => split(&a)?,
        Command::Augment(a) => augment(&a)?,
        Command::Pipeline(c) => pipeline(&c)?,
        Command::Serve(a) => {
            serve(&a)?;
            String::new()
        }
    };
    print!("{text}");
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}
