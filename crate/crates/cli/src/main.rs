mod config;
mod output;
mod runner;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use config::Analysis;
use runner::{record_early_failure, run_scenario, Failure, RunOptions};

#[derive(Parser)]
#[command(name = "wavepacket", version, about = "Semiclassical wave-packet propagation, Floquet analysis and oracle checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical flow and the analyses listed in the config (default: propagate).
    Propagate(Args),
    /// Flow plus monodromy, stability, Grönwall bound and revivals.
    Floquet(Args),
    /// Semiclassical state against the split-step oracle.
    Compare(Args),
    /// Fit of the oracle error against ħ.
    Scaling(Args),
    /// One run per value of `sweep.parameter`, in parallel.
    Sweep(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in the summary; no stage draws random numbers.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn output_dir(args: &Args, table: Option<&toml::Table>) -> PathBuf {
    args.out
        .clone()
        .or_else(|| {
            let dir = table?.get("output")?.get("dir")?.as_str()?;
            Some(PathBuf::from(dir))
        })
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn analyses_for(command: &Command, declared: Option<&Vec<Analysis>>) -> BTreeSet<Analysis> {
    let mut set: BTreeSet<Analysis> = match declared {
        Some(list) => list.iter().copied().collect(),
        None if matches!(command, Command::Propagate(_) | Command::Sweep(_)) => [Analysis::Propagate].into(),
        None => BTreeSet::new(),
    };
    match command {
        Command::Floquet(_) => {
            set.insert(Analysis::Floquet);
        }
        Command::Compare(_) => {
            set.insert(Analysis::Compare);
        }
        Command::Scaling(_) => {
            set.insert(Analysis::Scaling);
        }
        Command::Propagate(_) | Command::Sweep(_) => {}
    }
    set
}

fn fail_early(dir: &Path, failure: Failure, quiet: bool) -> i32 {
    if !quiet {
        eprintln!("error [{}:{}]: {}", failure.module, failure.guard, failure.message);
    }
    record_early_failure(dir, &failure);
    failure.exit_code
}

fn single(command: &Command, args: &Args) -> i32 {
    let table = match config::read_table(&args.config) {
        Ok(t) => t,
        Err(f) => return fail_early(&output_dir(args, None), f, args.quiet),
    };
    let scenario = match config::parse(table.clone()) {
        Ok(s) => s,
        Err(f) => return fail_early(&output_dir(args, Some(&table)), f, args.quiet),
    };
    let dir = args.out.clone().or_else(|| scenario.config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    if scenario.config.sweep.is_some() && !args.quiet {
        eprintln!("note: the `sweep` section is only used by the sweep subcommand");
    }
    let analyses = analyses_for(command, scenario.config.analyses.as_ref());
    let seed = args.seed.or(scenario.config.seed);
    run_scenario(&scenario, &analyses, &dir, RunOptions { quiet: args.quiet, seed })
}

fn sweep(command: &Command, args: &Args) -> i32 {
    let mut table = match config::read_table(&args.config) {
        Ok(t) => t,
        Err(f) => return fail_early(&output_dir(args, None), f, args.quiet),
    };
    let dir = output_dir(args, Some(&table));
    let plan = match table.remove("sweep") {
        Some(v) => match v.try_into::<config::SweepSection>() {
            Ok(s) => s,
            Err(e) => return fail_early(&dir, Failure::config(format!("sweep: {e}")), args.quiet),
        },
        None => return fail_early(&dir, Failure::config("sweep needs a `sweep` section"), args.quiet),
    };
    if plan.values.is_empty() {
        return fail_early(&dir, Failure::config("sweep.values is empty"), args.quiet);
    }
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail_early(&dir, Failure::output(&dir, e), args.quiet);
    }

    let workers = plan
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, plan.values.len());
    let next = AtomicUsize::new(0);
    let codes = Mutex::new(vec![0; plan.values.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= plan.values.len() {
                    break;
                }
                let run_dir = dir.join(format!("run-{i:03}"));
                let mut t = table.clone();
                let code = match config::set_dotted(&mut t, &plan.parameter, plan.values[i]).and_then(|_| config::parse(t)) {
                    Ok(scenario) => {
                        let analyses = analyses_for(command, scenario.config.analyses.as_ref());
                        let seed = args.seed.or(scenario.config.seed);
                        run_scenario(&scenario, &analyses, &run_dir, RunOptions { quiet: args.quiet, seed })
                    }
                    Err(f) => fail_early(&run_dir, f, args.quiet),
                };
                codes.lock().expect("no worker panics while holding the lock")[i] = code;
            });
        }
    });
    let codes = codes.into_inner().expect("workers finished");

    let runs: Vec<Value> = plan
        .values
        .iter()
        .zip(&codes)
        .enumerate()
        .map(|(i, (v, c))| json!({ "index": i, "value": output::num(*v), "dir": format!("run-{i:03}"), "exit_code": c }))
        .collect();
    let mut summary = Map::new();
    summary.insert("parameter".into(), json!(plan.parameter));
    summary.insert("runs".into(), Value::Array(runs));
    let path = dir.join("sweep.json");
    if let Err(e) = output::write_json(&path, &summary) {
        return fail_early(&dir, Failure::output(&path, e), args.quiet);
    }
    codes.into_iter().max().unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Sweep(args) => sweep(&cli.command, args),
        Command::Propagate(args) | Command::Floquet(args) | Command::Compare(args) | Command::Scaling(args) => {
            single(&cli.command, args)
        }
    };
    ExitCode::from(code as u8)
}
