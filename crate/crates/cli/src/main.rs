//! `periscope` command-line driver. Each subcommand runs one pipeline stage
//! over an artifact tree rooted at `--workdir`.

mod args;
mod commands;
mod fail;

use std::process::ExitCode;

use anyhow::Result;

use args::{Cli, Command};
use commands::Ctx;

fn run(cli: &Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.workers)
        .build_global()
        .map_err(|e| fail::Failure::input(format!("worker pool: {e}")))?;
    let ctx = Ctx::new(&cli.global);
    match &cli.command {
        Command::Synth(a) => commands::synth(&ctx, a)?,
        Command::Normalize(a) => commands::normalize(&ctx, a)?,
        Command::Partition(a) => commands::partition(&ctx, a)?,
        Command::Extract(a) => commands::extract(&ctx, a)?,
        Command::Score(a) => commands::score(&ctx, a)?,
        Command::Eval(a) => commands::eval(&ctx, a)?,
        Command::Sweep(a) => commands::sweep(&ctx, a)?,
        Command::Transfer(a) => commands::transfer(&ctx, a)?,
        Command::Randomize(a) => commands::randomize(&ctx, a)?,
    }
    // eval only reads; everything else records how its artifacts were made
    if !ctx.dry_run && !matches!(cli.command, Command::Eval(_)) {
        let path = ctx_path(&cli.global.workdir, cli.command.name());
        std::fs::create_dir_all(path.parent().expect("runs dir"))?;
        commands::write_json(&path, &cli.run_config())?;
    }
    Ok(())
}

fn ctx_path(workdir: &std::path::Path, command: &str) -> std::path::PathBuf {
    workdir.join("runs").join(format!("{command}.json"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = Cli::parse_with_config().and_then(|cli| run(&cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (line, code) = fail::render(&err);
            eprintln!("{line}");
            ExitCode::from(code as u8)
        }
    }
}
