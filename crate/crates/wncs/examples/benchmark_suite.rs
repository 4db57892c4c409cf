//! Evaluate every (scheduler, controller) pairing on one world under
//! common random numbers — the comparison table as a library call. Loads
//! the checkpoint written by `train_codesign` when present and appends the
//! agent's row.
//!
//! ```bash
//! cargo run --release --example benchmark_suite
//! ```

use std::path::Path;
use std::sync::Arc;

use wncs::checkpoint::load_agent;
use wncs::config::ExperimentConfig;
use wncs::eval::{default_benchmark_pairs, run_benchmark_suite, write_bench_csv, ControllerSpec, SchedulerSpec};
use wncs::world::World;

fn main() -> wncs::Result<()> {
    let config = ExperimentConfig {
        state_dim: 3,
        sensors: 3,
        actuators: 3,
        channels: 3,
        eval_episodes: 50,
        eval_steps: 100,
        loss_warmup_episodes: 20,
        seed: 3,
        ..ExperimentConfig::default()
    };
    let world_path = Path::new("codesign_world.json");
    let world = if world_path.exists() {
        Arc::new(World::load(world_path)?)
    } else {
        Arc::new(World::generate(&config)?)
    };

    let ckpt_path = Path::new("codesign_checkpoint.json");
    let agent = if ckpt_path.exists() {
        println!("including the trained agent from {}", ckpt_path.display());
        Some(load_agent(ckpt_path)?.0)
    } else {
        println!("no checkpoint found; run the train_codesign example to add the agent row");
        None
    };

    let mut pairs = default_benchmark_pairs();
    if agent.is_some() {
        pairs.push((SchedulerSpec::Agent, ControllerSpec::Agent));
    }

    let entries = run_benchmark_suite(&world, &config, &pairs, agent.as_ref())?;
    println!(
        "\n{:<12} {:<14} {:>12} {:>12} {:>14} {:>14}",
        "scheduler", "controller", "est", "control", "state", "overall"
    );
    for e in &entries {
        match &e.report {
            Some(r) => println!(
                "{:<12} {:<14} {:>12.1} {:>12.1} {:>14.1} {:>14.1}",
                e.scheduler, e.controller, r.est_cost, r.ctrl_cost, r.state_cost, r.overall
            ),
            None => println!(
                "{:<12} {:<14} {}",
                e.scheduler,
                e.controller,
                e.note.as_deref().unwrap_or("no report")
            ),
        }
    }
    write_bench_csv(&entries, Path::new("benchmark_table.csv"))?;
    println!("\nwrote benchmark_table.csv ({} episodes × {} steps, common random numbers)", config.eval_episodes, config.eval_steps);
    Ok(())
}
