//! Trace the Markov block-fading channels of every link and export the CSI
//! history as `csi_trace.csv` (slot, device, channel, gain), together with
//! the decode-error probability each gain level implies.
//!
//! ```bash
//! cargo run --example channel_trace
//! ```

use wncs::channel::{
    decode_error_prob, default_gain_levels, generate_channel_model, step_channels, ChannelGrid,
    LinkBudget,
};
use wncs::rng::{stream, stream_rng};

fn main() -> wncs::Result<()> {
    let model = generate_channel_model(2, 2, 2, &default_gain_levels(), 11)?;
    let budget = LinkBudget::default();

    println!("decode-error probability per gain level (budget {budget:?}):");
    for &g in &model.gains {
        let gamma = g * 10f64.powf(budget.p_max_dbm / 10.0) / 10f64.powf(budget.noise_dbm / 10.0);
        let eps = decode_error_prob(gamma, &budget)?;
        println!("  gain {g:>8.0e}  snr {gamma:>12.3e}  eps {eps:.6}");
    }

    let mut init_rng = stream_rng(11, stream::INIT);
    let mut grid = ChannelGrid::init(&model, &mut init_rng);
    let mut rng = stream_rng(11, stream::CHANNEL);

    let mut csv = String::from("slot,device,channel,gain\n");
    for slot in 0..200 {
        for device in 0..model.devices() {
            for channel in 0..model.channels {
                csv.push_str(&format!("{slot},{device},{channel},{}\n", grid.gain(device, channel)));
            }
        }
        grid = step_channels(&model, &grid, &mut rng);
    }
    std::fs::write("csi_trace.csv", csv)?;
    println!("wrote 200 slots × {} links -> csi_trace.csv", model.devices() * model.channels);
    Ok(())
}
