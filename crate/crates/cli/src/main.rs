use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use dili::engine::{self, SimParams};
use dili::io::{
    metrics_report, parse_scenario, read_trace, render_frame, render_svg, replay_frames, write_trace, Overlay,
};
use dili::oracle::{optimal_motion_count, verify_trace, SearchBounds};
use dili::Scenario;

/// Simulate a lattice-module conveyor reconfiguring itself.
#[derive(Parser)]
#[command(name = "dili", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario; metrics go to standard output unless --metrics is given.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Record every delivery and drop in the trace.
        #[arg(long)]
        log_messages: bool,
        /// Overrides the scenario's `max-ticks`.
        #[arg(long)]
        max_ticks: Option<u64>,
        /// Overrides the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a trace and check every invariant.
    Verify { scenario: PathBuf, trace: PathBuf },
    /// Minimum number of motions, by exhaustive search.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        max_states: Option<usize>,
        #[arg(long)]
        max_depth: Option<u32>,
    },
    /// Print one frame per committed maneuver.
    Render {
        scenario: PathBuf,
        trace: PathBuf,
        /// Keep every K-th frame.
        #[arg(long, default_value_t = 1)]
        every: usize,
        #[arg(long, value_enum, default_value_t = Format::Ascii)]
        format: Format,
    },
    /// Run every `.scn` file in DIR over a seed range (inclusive, `A..B`).
    Bench {
        dir: PathBuf,
        #[arg(long, default_value = "1..10")]
        seeds: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ascii,
    Svg,
}

/// Failures that map to exit code 2 rather than 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| Usage(format!("{}: {e}", path.display())).into())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let Some((a, b)) = s.split_once("..") else { return usage(format!("bad seed range `{s}`")) };
    let (Ok(a), Ok(b)) = (a.parse::<u64>(), b.parse::<u64>()) else {
        return usage(format!("bad seed range `{s}`"));
    };
    if a > b {
        return usage(format!("empty seed range `{s}`"));
    }
    Ok((a..=b).collect())
}

fn run_params(s: &Scenario, seed: Option<u64>, max_ticks: Option<u64>, log_messages: bool) -> SimParams {
    let mut p = s.params;
    p.seed = seed.unwrap_or(p.seed);
    p.max_ticks = max_ticks.unwrap_or(p.max_ticks);
    p.log_messages |= log_messages;
    p
}

fn execute(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Run { scenario, trace, metrics, log_messages, max_ticks, seed } => {
            let s = load_scenario(&scenario)?;
            let params = run_params(&s, seed, max_ticks, log_messages);
            let out = engine::run(&s, &params).map_err(|e| Usage(e.to_string()))?;
            if let Some(path) = trace {
                fs::write(&path, write_trace(&out.trace)).with_context(|| format!("writing {}", path.display()))?;
            }
            let report = metrics_report(&out.metrics);
            match metrics {
                Some(path) => fs::write(&path, report).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{report}"),
            }
            Ok(out.metrics.goal_reached)
        }
        Cmd::Verify { scenario, trace } => {
            let s = load_scenario(&scenario)?;
            let text = fs::read_to_string(&trace).map_err(|e| Usage(format!("{}: {e}", trace.display())))?;
            let events = read_trace(&text).map_err(|e| Usage(format!("{}: {e}", trace.display())))?;
            let report = verify_trace(&s, &events);
            print!("{report}");
            Ok(report.passed())
        }
        Cmd::Oracle { scenario, max_states, max_depth } => {
            let s = load_scenario(&scenario)?;
            let d = SearchBounds::default();
            let bounds = SearchBounds {
                max_states: max_states.unwrap_or(d.max_states),
                max_depth: max_depth.unwrap_or(d.max_depth),
            };
            let opt = optimal_motion_count(&s, bounds).map_err(|e| Usage(e.to_string()))?;
            println!("optimal={opt}");
            Ok(true)
        }
        Cmd::Render { scenario, trace, every, format } => {
            if every == 0 {
                return usage("--every must be positive");
            }
            let s = load_scenario(&scenario)?;
            let text = fs::read_to_string(&trace).map_err(|e| Usage(format!("{}: {e}", trace.display())))?;
            let events = read_trace(&text).map_err(|e| Usage(format!("{}: {e}", trace.display())))?;
            let frames = replay_frames(&s, &events);
            for (k, frame) in frames.iter().enumerate().step_by(every) {
                match format {
                    Format::Ascii => print!("frame {k} at={}\n{}\n", frame.at, render_frame(&s, frame)),
                    Format::Svg => {
                        let mut shown = s.clone();
                        shown.grid.output = frame.output;
                        let overlay = Overlay { leader: frame.leader, highlight: Vec::new() };
                        print!("{}", render_svg(&shown, &frame.config, &overlay));
                    }
                }
            }
            Ok(true)
        }
        Cmd::Bench { dir, seeds } => {
            let seeds = parse_seeds(&seeds)?;
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| Usage(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "scn"))
                .collect();
            files.sort();
            if files.is_empty() {
                bail!(Usage(format!("no .scn files in {}", dir.display())));
            }
            let scenarios: Vec<(String, Scenario)> = files
                .iter()
                .map(|p| {
                    let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    load_scenario(p).map(|s| (name, s))
                })
                .collect::<Result<_>>()?;
            let jobs: Vec<(&str, &Scenario, u64)> =
                scenarios.iter().flat_map(|(n, s)| seeds.iter().map(move |&seed| (n.as_str(), s, seed))).collect();
            let mut lines: Vec<((String, u64), String)> = jobs
                .par_iter()
                .map(|&(name, s, seed)| {
                    let params = run_params(s, Some(seed), None, false);
                    let m = engine::run(s, &params).map_err(|e| Usage(format!("{name}: {e}")))?.metrics;
                    let line = format!(
                        "scenario={name} seed={seed} motions={} goal={} maneuvers={} epochs={} simtime_ms={} messages_sent={}",
                        m.motions, m.goal_reached, m.maneuvers, m.epochs, m.simtime_ms, m.messages_sent
                    );
                    Ok(((name.to_string(), seed), line))
                })
                .collect::<Result<_>>()?;
            lines.sort();
            for (_, line) in lines {
                println!("{line}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("dili: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
