//! Batch command-line interface: world generation, training, evaluation,
//! the benchmark suite, and scale sweeps. All heavy lifting lives in the
//! library; this binary only parses arguments and wires files together.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use wncs::checkpoint::{load_agent, AgentCheckpoint};
use wncs::config::{AgentKind, ControllerKind, ExperimentConfig};
use wncs::drl::train;
use wncs::eval::{
    default_benchmark_pairs, evaluate, run_benchmark_suite, write_bench_csv, write_bench_sidecar,
    ControllerSpec, SchedulerSpec,
};
use wncs::scheduling::SchedulerKind;
use wncs::world::World;
use wncs::Result;

#[derive(Parser)]
#[command(name = "wncs", version, about = "Wireless networked control: simulation, benchmarks and learned codesign")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a reproducible world file (plant + channel model) from a seed.
    Gen {
        /// Experiment config file; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Dimensions K,M,N,L.
        #[arg(long)]
        dims: Option<String>,
        /// Output world file.
        #[arg(long, default_value = "world.json")]
        out: PathBuf,
    },
    /// Train an agent and write checkpoint plus training log.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// World file; generated from the config when omitted.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Agent kind: gca, td3-control, td3-priority, td3-priority-control.
        #[arg(long)]
        agent: Option<String>,
        /// Benchmark scheduler paired with agents that do not schedule.
        #[arg(long)]
        scheduler: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint (or benchmark-only pairing) and emit a report.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        world: PathBuf,
        /// Agent checkpoint; required when either role is "agent".
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        scheduler: Option<String>,
        /// Controller: zero, standard-lqr, modified-lqr, agent.
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the benchmark suite over (scheduler, controller) pairs.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        world: PathBuf,
        /// Optional checkpoint adding the agent pairing to the table.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train and benchmark across system scales (L,N,M tuples, K = N).
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scales as "L,N,M;L,N,M;...".
        #[arg(long)]
        scales: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, seed, dims, out } => {
            let cfg = assemble_config(config.as_deref(), seed, dims.as_deref(), None, None, None, None, None)?;
            let world = World::generate(&cfg)?;
            world.save(&out)?;
            println!("wrote world file {} (seed {})", out.display(), cfg.seed);
            Ok(())
        }
        Command::Train { config, world, seed, dims, episodes, steps, agent, scheduler, out } => {
            let cfg = assemble_config(
                config.as_deref(),
                seed,
                dims.as_deref(),
                episodes,
                steps,
                agent.as_deref(),
                scheduler.as_deref(),
                None,
            )?;
            let world = match world {
                Some(path) => Arc::new(World::load(&path)?),
                None => Arc::new(World::generate(&cfg)?),
            };
            check_world_dims(&cfg, &world)?;
            std::fs::create_dir_all(&out)?;
            let run = train(&cfg, Arc::clone(&world), Some(&out))?;
            let ckpt_path = out.join("checkpoint.json");
            AgentCheckpoint::capture(
                &run.agent,
                &cfg,
                run.buffer_meta.clone(),
                Some(run.train_rng.clone()),
                run.episodes_completed,
            )
            .save(&ckpt_path)?;
            run.log.write_csv(&out.join("training_log.csv"))?;
            std::fs::write(out.join("config.json"), cfg.to_json())?;
            let last = run.log.episodes.last();
            println!(
                "trained {} for {} episodes; final episode cost {:.3}; checkpoint {}",
                cfg.agent.name(),
                run.episodes_completed,
                last.map_or(f64::NAN, |e| e.cumulative_cost),
                ckpt_path.display()
            );
            Ok(())
        }
        Command::Eval { config, world, checkpoint, scheduler, controller, episodes, steps, seed, out } => {
            let cfg = assemble_config(
                config.as_deref(),
                seed,
                None,
                None,
                None,
                None,
                None,
                controller.as_deref(),
            )?;
            let world = Arc::new(World::load(&world)?);
            check_world_dims(&cfg, &world)?;
            let agent = checkpoint.map(|p| load_agent(&p)).transpose()?.map(|(a, _)| a);
            let (sched_spec, ctrl_spec) = eval_pairing(&cfg, agent.as_ref(), scheduler.as_deref())?;
            let episodes = episodes.unwrap_or(cfg.eval_episodes);
            let steps = steps.unwrap_or(cfg.eval_steps);
            let report = evaluate(
                &world,
                &cfg,
                sched_spec,
                ctrl_spec,
                agent.as_ref(),
                episodes,
                steps,
                cfg.seed,
            )?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("eval_report.json"), serde_json::to_string_pretty(&report)?)?;
            let entry = wncs::eval::BenchEntry {
                scheduler: report.scheduler.clone(),
                controller: report.controller.clone(),
                report: Some(report.clone()),
                note: None,
            };
            write_bench_csv(std::slice::from_ref(&entry), &out.join("eval.csv"))?;
            println!(
                "{} + {}: overall {:.3} ± {:.3} over {} episodes × {} steps",
                report.scheduler, report.controller, report.overall, report.ci_halfwidth, episodes, steps
            );
            Ok(())
        }
        Command::Bench { config, world, checkpoint, episodes, steps, seed, out } => {
            let mut cfg = assemble_config(config.as_deref(), seed, None, None, None, None, None, None)?;
            if let Some(e) = episodes {
                cfg.eval_episodes = e;
            }
            if let Some(s) = steps {
                cfg.eval_steps = s;
            }
            let world = Arc::new(World::load(&world)?);
            check_world_dims(&cfg, &world)?;
            let agent = checkpoint.map(|p| load_agent(&p)).transpose()?.map(|(a, _)| a);
            let mut pairs = default_benchmark_pairs();
            if let Some(agent) = agent.as_ref() {
                pairs.push(agent_pairing(agent, &cfg));
            }
            let entries = run_benchmark_suite(&world, &cfg, &pairs, agent.as_ref())?;
            std::fs::create_dir_all(&out)?;
            write_bench_csv(&entries, &out.join("bench.csv"))?;
            write_bench_sidecar(&entries, &cfg, &out.join("bench.json"))?;
            for e in &entries {
                match &e.report {
                    Some(r) => println!("{:<12} {:<14} overall {:.3}", e.scheduler, e.controller, r.overall),
                    None => println!("{:<12} {:<14} {}", e.scheduler, e.controller, e.note.as_deref().unwrap_or("")),
                }
            }
            Ok(())
        }
        Command::Sweep { config, scales, seed, episodes, steps, out } => {
            let base = assemble_config(config.as_deref(), seed, None, episodes, steps, None, None, None)?;
            std::fs::create_dir_all(&out)?;
            let mut summary = String::from("scale,scheduler,controller,overall,ci_halfwidth\n");
            for (l, n, m) in parse_scales(&scales)? {
                let cfg = ExperimentConfig {
                    state_dim: n,
                    sensors: m,
                    actuators: n,
                    channels: l,
                    ..base.clone()
                };
                cfg.validate()?;
                let tag = format!("{l}-{n}-{m}");
                let scale_dir = out.join(format!("scale_{tag}"));
                std::fs::create_dir_all(&scale_dir)?;
                println!("=== scale (L,N,M) = ({l},{n},{m}) ===");
                let world = Arc::new(World::generate(&cfg)?);
                world.save(&scale_dir.join("world.json"))?;
                let run = train(&cfg, Arc::clone(&world), Some(&scale_dir))?;
                AgentCheckpoint::capture(
                    &run.agent,
                    &cfg,
                    run.buffer_meta.clone(),
                    Some(run.train_rng.clone()),
                    run.episodes_completed,
                )
                .save(&scale_dir.join("checkpoint.json"))?;
                run.log.write_csv(&scale_dir.join("training_log.csv"))?;
                let mut pairs = default_benchmark_pairs();
                pairs.push(agent_pairing(&run.agent, &cfg));
                let entries = run_benchmark_suite(&world, &cfg, &pairs, Some(&run.agent))?;
                write_bench_csv(&entries, &scale_dir.join("bench.csv"))?;
                write_bench_sidecar(&entries, &cfg, &scale_dir.join("bench.json"))?;
                for e in &entries {
                    if let Some(r) = &e.report {
                        summary.push_str(&format!(
                            "{tag},{},{},{},{}\n",
                            e.scheduler, e.controller, r.overall, r.ci_halfwidth
                        ));
                        println!("{:<12} {:<14} overall {:.3}", e.scheduler, e.controller, r.overall);
                    } else {
                        summary.push_str(&format!(
                            "{tag},{},{},not-converge,not-converge\n",
                            e.scheduler, e.controller
                        ));
                        println!("{:<12} {:<14} not converge", e.scheduler, e.controller);
                    }
                }
            }
            std::fs::write(out.join("sweep_summary.csv"), summary)?;
            Ok(())
        }
    }
}

/// Builds the effective configuration: file (when given), then flag
/// overrides.
#[allow(clippy::too_many_arguments)]
fn assemble_config(
    config_path: Option<&Path>,
    seed: Option<u64>,
    dims: Option<&str>,
    episodes: Option<usize>,
    steps: Option<usize>,
    agent: Option<&str>,
    scheduler: Option<&str>,
    controller: Option<&str>,
) -> Result<ExperimentConfig> {
    let mut cfg = match config_path {
        Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dims) = dims {
        let (k, m, n, l) = parse_dims(dims)?;
        cfg.state_dim = k;
        cfg.sensors = m;
        cfg.actuators = n;
        cfg.channels = l;
    }
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    if let Some(s) = steps {
        cfg.steps_per_episode = s;
    }
    if let Some(a) = agent {
        cfg.agent = a.parse::<AgentKind>()?;
    }
    if let Some(s) = scheduler {
        cfg.scheduler = s.parse::<SchedulerKind>()?;
    }
    if let Some(c) = controller {
        cfg.controller = c.parse::<ControllerKind>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_world_dims(cfg: &ExperimentConfig, world: &World) -> Result<()> {
    if world.state_dim() != cfg.state_dim
        || world.sensors() != cfg.sensors
        || world.actuators() != cfg.actuators
        || world.channels() != cfg.channels
    {
        return Err(wncs::Error::Config(format!(
            "world dims (K={}, M={}, N={}, L={}) do not match config (K={}, M={}, N={}, L={})",
            world.state_dim(),
            world.sensors(),
            world.actuators(),
            world.channels(),
            cfg.state_dim,
            cfg.sensors,
            cfg.actuators,
            cfg.channels
        )));
    }
    Ok(())
}

/// "K,M,N,L" into dimensions.
fn parse_dims(s: &str) -> Result<(usize, usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| wncs::Error::Config(format!("dims must be K,M,N,L, got '{s}'")))?;
    if parts.len() != 4 {
        return Err(wncs::Error::Config(format!("dims must have four entries, got '{s}'")));
    }
    Ok((parts[0], parts[1], parts[2], parts[3]))
}

/// "L,N,M;L,N,M" into scale tuples.
fn parse_scales(s: &str) -> Result<Vec<(usize, usize, usize)>> {
    s.split(';')
        .map(|block| {
            let parts: Vec<usize> = block
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| wncs::Error::Config(format!("scale must be L,N,M, got '{block}'")))?;
            if parts.len() != 3 {
                return Err(wncs::Error::Config(format!("scale must have three entries, got '{block}'")));
            }
            Ok((parts[0], parts[1], parts[2]))
        })
        .collect()
}

/// The evaluation pairing implied by config, checkpoint and flags.
fn eval_pairing(
    cfg: &ExperimentConfig,
    agent: Option<&wncs::drl::Td3Agent>,
    scheduler_flag: Option<&str>,
) -> Result<(SchedulerSpec, ControllerSpec)> {
    let sched = match scheduler_flag {
        Some("agent") => match agent {
            Some(a) if a.sched_dim() > 0 => SchedulerSpec::Agent,
            Some(_) => return Err(wncs::Error::Config("this checkpoint has no scheduling head".into())),
            None => return Err(wncs::Error::Config("scheduler 'agent' needs --checkpoint".into())),
        },
        Some(name) => SchedulerSpec::Fixed(name.parse::<SchedulerKind>()?),
        None => match agent {
            // With a checkpoint and no explicit scheduler, let the agent
            // schedule when it can.
            Some(a) if a.sched_dim() > 0 => SchedulerSpec::Agent,
            _ => SchedulerSpec::Fixed(cfg.scheduler),
        },
    };
    let ctrl = match cfg.controller {
        ControllerKind::Agent => match agent {
            Some(a) if a.ctrl_dim() > 0 => ControllerSpec::Agent,
            Some(_) => return Err(wncs::Error::Config("this checkpoint has no control head".into())),
            None => return Err(wncs::Error::Config("controller 'agent' needs --checkpoint".into())),
        },
        kind => ControllerSpec::from_kind(kind),
    };
    Ok((sched, ctrl))
}

/// How a trained agent enters the benchmark table.
fn agent_pairing(agent: &wncs::drl::Td3Agent, cfg: &ExperimentConfig) -> (SchedulerSpec, ControllerSpec) {
    let sched = if agent.sched_dim() > 0 {
        SchedulerSpec::Agent
    } else {
        SchedulerSpec::Fixed(cfg.scheduler)
    };
    let ctrl = if agent.ctrl_dim() > 0 {
        ControllerSpec::Agent
    } else {
        ControllerSpec::StandardLqr
    };
    (sched, ctrl)
}
