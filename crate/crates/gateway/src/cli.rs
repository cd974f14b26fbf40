//! `lapaware` command line. Exit status: 0 success, 1 runtime failure, 2 bad
//! arguments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lapaware_core::scenarios::{self, Scenario};
use lapaware_core::scene::{load_scene, Scene};
use lapaware_core::session::{replay_log, Recorder};
use lapaware_core::sim::{to_log_text, Simulation};
use lapaware_core::tasks::TaskKind;
use log::info;

use crate::report::Report;
use crate::server::{Gateway, LoopOptions};

pub const LOG_DIR_VAR: &str = "LAPAWARE_LOG_DIR";

#[derive(Debug, Parser)]
#[command(name = "lapaware", version, about = "Laparoscopic training simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a live session and serve it over WebSocket.
    Serve {
        /// Scene file, or the name of a bundled scene.
        #[arg(long)]
        scene: String,
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Session log path. Defaults to a file in $LAPAWARE_LOG_DIR when set.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Seed for perception noise.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 60.0, value_parser = parse_rate)]
        tick_rate: f64,
        /// Ticks between state frames.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
        broadcast_every: u64,
        /// Finish the session after this many ticks.
        #[arg(long)]
        max_ticks: Option<u64>,
    },
    /// Re-run a recorded session and check it reproduces byte for byte.
    Replay {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a recorded session from its log alone.
    Score {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a scripted scenario headless and write its log and report.
    Demo {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        /// Output directory. Defaults to $LAPAWARE_LOG_DIR, then the current directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    TaskKind::parse(s).ok_or_else(|| "expected navigation, manipulation, transfer, cutting or suturing".into())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::parse(s).ok_or_else(|| {
        let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_rate(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(r) if r.is_finite() && r > 0.0 => Ok(r),
        _ => Err("expected a positive number".into()),
    }
}

/// A path to a scene file, or one of the bundled scene names.
pub fn resolve_scene(arg: &str) -> Result<Scene> {
    let bundled = match arg {
        "minimal" => Some(scenarios::MINIMAL),
        "cholecystectomy" => Some(scenarios::CHOLECYSTECTOMY),
        "suturing" => Some(scenarios::SUTURING),
        "peg_transfer" => Some(scenarios::PEG_TRANSFER),
        _ => None,
    };
    match bundled {
        Some(text) if !Path::new(arg).exists() => Ok(Scene::from_json(text, None)?),
        _ => Ok(load_scene(arg)?),
    }
}

fn log_dir() -> Option<PathBuf> {
    std::env::var_os(LOG_DIR_VAR).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { scene, task, port, host, record, seed, tick_rate, broadcast_every, max_ticks } => {
            let scene = resolve_scene(&scene)?;
            let mut config = scene.config.clone();
            config.tick_rate = tick_rate;
            if let Some(s) = seed {
                config.seed = s;
            }
            let mut sim = Simulation::new(scene, task, config)?;
            let record = record.or_else(|| {
                let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                log_dir().map(|d| d.join(format!("{}-{stamp}.ndjson", task.name())))
            });
            let mut recorder = match &record {
                Some(p) => {
                    let f = File::create(p).with_context(|| format!("cannot create log {}", p.display()))?;
                    Some(Recorder::new(BufWriter::new(f)))
                }
                None => None,
            };
            let gateway = Gateway::bind(&format!("{host}:{port}"), &sim)?;
            let stop = gateway.stop_flag();
            ctrlc::set_handler(move || stop.stop()).context("cannot install the interrupt handler")?;
            println!("listening on ws://{}", gateway.local_addr());
            io::stdout().flush()?;
            let opts = LoopOptions { tick_rate, broadcast_every, max_ticks };
            let result = gateway.run(&mut sim, &mut recorder, &opts)?;
            if let Some(r) = recorder {
                r.into_inner().flush()?;
            }
            if let Some(p) = &record {
                info!("session log written to {}", p.display());
            }
            let report = Report::new(result, sim.tick(), sim.state_hash());
            print!("{}", report.to_json());
        }
        Command::Replay { scene, log, report } => {
            let scene = resolve_scene(&scene)?;
            let text = std::fs::read_to_string(&log).with_context(|| format!("cannot read {}", log.display()))?;
            let replayed = replay_log(&text, &scene).with_context(|| format!("replay of {} failed", log.display()))?;
            info!("replayed {} ticks, {} lines identical", replayed.ticks, replayed.lines);
            let rep = Report::from_replay(replayed);
            match report {
                Some(p) => rep.write(&p)?,
                None => print!("{}", rep.to_json()),
            }
        }
        Command::Score { log, report } => {
            let text = std::fs::read_to_string(&log).with_context(|| format!("cannot read {}", log.display()))?;
            let rep = Report::from_log(&text).with_context(|| format!("cannot score {}", log.display()))?;
            rep.write(&report)?;
        }
        Command::Demo { scenario, out } => {
            let dir = out.or_else(log_dir).unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let scene = scenario.scene();
            let script = scenario.script(&scene);
            let config = scene.config.clone();
            let mut sim = Simulation::new(scene, scenario.task(), config)?;
            let mut records = vec![sim.start_record()];
            for controls in &script {
                records.extend(sim.step(controls)?);
            }
            let (tail, result) = sim.finish();
            records.extend(tail);
            let log_path = dir.join(format!("{scenario}.ndjson"));
            std::fs::write(&log_path, to_log_text(&records))
                .with_context(|| format!("cannot write {}", log_path.display()))?;
            let report = Report::new(result, sim.tick(), sim.state_hash());
            report.write(&dir.join(format!("{scenario}.report.json")))?;
            println!(
                "{scenario}: success={} errors={} log={}",
                report.success,
                report.error_events.len(),
                log_path.display()
            );
        }
    }
    Ok(())
}
