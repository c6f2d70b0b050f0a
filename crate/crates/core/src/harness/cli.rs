use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::Config;
use super::experiment::{run_experiment, sweep_subchannels, sweep_values};
use super::maps::{mode_map, success_heatmap, GridSpec};
use super::output::{cycles_csv, sweep_csv, utility_csv, OutputSet};
use crate::error::{Error, Result};
use crate::protocol::Framework;
use crate::rl::NetFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameworkArg {
    U2x,
    Cellular,
}

impl From<FrameworkArg> for Framework {
    fn from(f: FrameworkArg) -> Self {
        match f {
            FrameworkArg::U2x => Framework::U2x,
            FrameworkArg::Cellular => Framework::Cellular,
        }
    }
}

/// Cellular Internet-of-UAVs simulator.
#[derive(Debug, Parser)]
#[command(name = "u2x", version)]
struct Cli {
    /// Configuration file (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for layout, learning and channel draws (default: first configured seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    framework: Option<FrameworkArg>,
    /// Training episodes.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Subchannel counts, comma separated (one value outside `sweep`).
    #[arg(long, global = true, value_delimiter = ',')]
    subchannels: Option<Vec<usize>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train, then evaluate the greedy policy for one seed.
    Run,
    /// Both frameworks across subchannel counts and all configured seeds.
    Sweep,
    /// Mode chosen at every grid cell by one link's UAV.
    Modemap(MapArgs),
    /// Valid-transmission probability at every grid cell.
    Heatmap(MapArgs),
    /// Train only; writes the utility series and the weights.
    Train,
    /// Parse and validate the configuration.
    ValidateConfig,
}

#[derive(Debug, clap::Args)]
struct MapArgs {
    /// Task index whose UAV is moved over the grid.
    #[arg(long, default_value_t = 0)]
    link: usize,
    /// Grid cell edge, m.
    #[arg(long, default_value_t = 25.0)]
    cell: f64,
    /// Grid altitude, m.
    #[arg(long, default_value_t = 100.0)]
    altitude: f64,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Run => "run",
        Command::Sweep => "sweep",
        Command::Modemap(_) => "modemap",
        Command::Heatmap(_) => "heatmap",
        Command::Train => "train",
        Command::ValidateConfig => "validate-config",
    }
}

fn effective_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(f) = cli.framework {
        config.experiment.framework = f.into();
    }
    if let Some(e) = cli.episodes {
        config.experiment.episodes = e;
    }
    if let Some(s) = &cli.subchannels {
        if matches!(cli.command, Command::Sweep) {
            config.experiment.subchannels = sweep_values(s);
        } else {
            match s.as_slice() {
                [one] => config.scenario.subchannels = *one,
                _ => return Err(Error::config("--subchannels", "takes a single value outside `sweep`")),
            }
        }
    }
    if let Some(seed) = cli.seed {
        if !matches!(cli.command, Command::Sweep) {
            config.experiment.seeds = vec![seed];
        }
    }
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    framework: Framework,
    subchannels: usize,
    episodes: usize,
    eval_cycles: usize,
    mean_valid: f64,
    mean_realized_valid: f64,
    frame_counts: super::experiment::FrameCounts,
    accounting_holds: bool,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    table: &'a super::experiment::SweepTable,
    relative_gaps: Vec<(usize, f64)>,
}

fn execute(cli: &Cli) -> Result<()> {
    let config = effective_config(cli)?;
    let seed = config.experiment.seeds[0];
    let hash = config.hash();
    let name = command_name(&cli.command);
    let mut out = OutputSet::new(&cli.out);
    let seed_field = match cli.command {
        Command::Sweep => None,
        _ => Some(seed),
    };
    match &cli.command {
        Command::ValidateConfig => {
            println!("config ok ({hash})");
            return Ok(());
        }
        Command::Run => {
            let m = run_experiment(&config, seed)?;
            let e = &m.evaluation;
            out.add("utility.csv", utility_csv(&m.training)?);
            out.add("cycles.csv", cycles_csv(e)?);
            let summary = RunSummary {
                seed,
                framework: m.framework,
                subchannels: m.subchannels,
                episodes: m.training.len(),
                eval_cycles: e.cycles,
                mean_valid: e.mean_valid,
                mean_realized_valid: e.mean_realized_valid,
                frame_counts: e.frame_counts,
                accounting_holds: e.accounting_holds(),
            };
            out.add_json("summary.json", &summary)?;
            println!(
                "seed {seed} {}: mean valid {:.4} (realized {:.4})",
                m.framework, e.mean_valid, e.mean_realized_valid
            );
        }
        Command::Train => {
            let m = run_experiment(&config, seed)?;
            out.add("utility.csv", utility_csv(&m.training)?);
            for (k, a) in m.agents.iter().enumerate() {
                out.add_json(format!("weights/agent_{k}.json"), &NetFile::from_net(&a.net, seed))?;
            }
            if let Some(last) = m.training.last() {
                println!("seed {seed}: final episode utility {:.4}", last.total);
            }
        }
        Command::Sweep => {
            let table = sweep_subchannels(&config)?;
            out.add("sweep.csv", sweep_csv(&table)?);
            let relative_gaps = table
                .subchannel_counts()
                .into_iter()
                .filter_map(|s| table.relative_gap(s).map(|g| (s, g)))
                .collect();
            out.add_json("sweep.json", &SweepSummary { table: &table, relative_gaps })?;
            for p in &table.points {
                println!("{} {}: {:.4} ± {:.4}", p.subchannels, p.framework, p.mean_valid, p.std_error);
            }
        }
        Command::Modemap(a) => {
            let scenario = config.scenario.build(seed)?;
            let grid = mode_map(&scenario, a.link, &GridSpec { cell: a.cell, altitude: a.altitude })?;
            out.add_json("modemap.json", &grid)?;
        }
        Command::Heatmap(a) => {
            let scenario = config.scenario.build(seed)?;
            let framework = config.experiment.framework;
            let grid = success_heatmap(&scenario, a.link, &GridSpec { cell: a.cell, altitude: a.altitude }, framework)?;
            out.add_json("heatmap.json", &grid)?;
        }
    }
    out.finish(name, &hash, seed_field)?;
    Ok(())
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 for usage or configuration errors, 2 for runtime failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() || matches!(e, Error::Domain(_)) {
                1
            } else {
                2
            }
        }
    }
}
