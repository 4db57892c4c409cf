//! Train the cascaded codesign agent at desk scale and watch the episode
//! cost fall. Writes the training log and a checkpoint usable by the
//! `benchmark_suite` example and the `wncs eval` command.
//!
//! ```bash
//! cargo run --release --example train_codesign -- [episodes]
//! ```

use std::sync::Arc;

use wncs::checkpoint::AgentCheckpoint;
use wncs::config::ExperimentConfig;
use wncs::drl::train;
use wncs::world::World;

fn main() -> wncs::Result<()> {
    let episodes = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("episodes must be an integer"))
        .unwrap_or(60);

    let config = ExperimentConfig {
        state_dim: 3,
        sensors: 3,
        actuators: 3,
        channels: 3,
        episodes,
        steps_per_episode: 100,
        seed: 3,
        ..ExperimentConfig::default()
    };
    let world = Arc::new(World::generate(&config)?);
    world.save(std::path::Path::new("codesign_world.json"))?;

    println!("training the cascaded codesign agent for {episodes} episodes ...");
    let run = train(&config, Arc::clone(&world), None)?;

    for chunk in run.log.episodes.chunks(10) {
        let mean = chunk.iter().map(|e| e.cumulative_cost).sum::<f64>() / chunk.len() as f64;
        println!(
            "  episodes {:>3}-{:>3}: mean cost {mean:>14.1}",
            chunk.first().unwrap().episode,
            chunk.last().unwrap().episode
        );
    }

    run.log.write_csv(std::path::Path::new("codesign_training_log.csv"))?;
    AgentCheckpoint::capture(&run.agent, &config, run.buffer_meta.clone(), Some(run.train_rng.clone()), episodes)
        .save(std::path::Path::new("codesign_checkpoint.json"))?;
    println!("wrote codesign_world.json, codesign_training_log.csv, codesign_checkpoint.json");
    Ok(())
}
