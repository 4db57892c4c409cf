//! Generate a reproducible world (plant + fading channels) and save it.
//!
//! ```bash
//! cargo run --example generate_world -- [seed]
//! ```

use wncs::config::ExperimentConfig;
use wncs::world::World;

fn main() -> wncs::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(7);

    let config = ExperimentConfig {
        state_dim: 4,
        sensors: 4,
        actuators: 4,
        channels: 4,
        seed,
        ..ExperimentConfig::default()
    };
    let world = World::generate(&config)?;

    let eigs: Vec<f64> = world
        .sys
        .a
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .collect();
    println!("world seed {seed}");
    println!("  state dim {} / {} sensors / {} actuators / {} channels", world.state_dim(), world.sensors(), world.actuators(), world.channels());
    println!("  open-loop eigenvalue magnitudes: {eigs:.4?}");
    println!("  gain ladder: {:?}", world.channel.gains);
    println!("  link budget: {:+.0} dBm over {:+.0} dBm noise, {} bits / {} symbols",
        world.budget.p_max_dbm, world.budget.noise_dbm, world.budget.bits, world.budget.blocklength);

    let path = std::path::Path::new("world.json");
    world.save(path)?;
    println!("saved to {}", path.display());

    // Round-trip check: the file reproduces the world bit for bit.
    let loaded = World::load(path)?;
    assert_eq!(loaded, world);
    println!("reload verified bit-exact");
    Ok(())
}
