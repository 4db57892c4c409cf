//! Roll the uncontrolled plant forward and watch it diverge into
//! saturation. Writes `plant_trace.csv` with one row per slot.
//!
//! ```bash
//! cargo run --example plant_rollout
//! ```

use nalgebra::DVector;
use wncs::plant::{generate_system, step_plant, CovSampler, PlantState, STATE_BOUND};
use wncs::rng::{stream_rng, stream};

fn main() -> wncs::Result<()> {
    let sys = generate_system(3, 3, 3, 1.0, 1.1, 42)?;
    let noise = CovSampler::new(&sys.w)?;
    let mut rng = stream_rng(42, stream::PLANT);

    let mut state = PlantState::zero(3);
    let zero_input = DVector::zeros(3);
    let mut csv = String::from("slot,x0,x1,x2,norm\n");
    let mut saturated_at = None;

    for t in 0..300u64 {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            t,
            state.x[0],
            state.x[1],
            state.x[2],
            state.x.norm()
        ));
        if saturated_at.is_none() && state.x.iter().any(|x| x.abs() >= STATE_BOUND) {
            saturated_at = Some(t);
        }
        state = step_plant(&sys, &state, &zero_input, &noise, &mut rng)?;
    }

    std::fs::write("plant_trace.csv", csv)?;
    println!("open-loop rollout of an unstable plant, 300 slots -> plant_trace.csv");
    match saturated_at {
        Some(t) => println!("first coordinate hit the ±{STATE_BOUND} bound at slot {t}"),
        None => println!("no coordinate reached the bound within the horizon"),
    }
    println!("final state norm: {:.2}", state.x.norm());
    Ok(())
}
