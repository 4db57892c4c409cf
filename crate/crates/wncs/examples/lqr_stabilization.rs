//! Solve the discounted Riccati recursion and close the loop: the
//! perfect-communication gain against its packet-loss-aware variant as the
//! loss rate grows.
//!
//! ```bash
//! cargo run --example lqr_stabilization
//! ```

use nalgebra::DVector;
use wncs::lqr::{lqr_control, riccati_modified, riccati_standard, LossRateMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use wncs::plant::generate_system;

fn main() -> wncs::Result<()> {
    let sys = generate_system(3, 3, 3, 1.0, 1.1, 9)?;
    let beta = 0.99;

    let std_gain = riccati_standard(&sys, beta, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let rho_open: f64 = sys.a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
    let closed = &sys.a + &sys.b * &std_gain.k_gain;
    let rho_closed: f64 = closed.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
    println!("spectral radius: open loop {rho_open:.4} -> closed loop {rho_closed:.4}");
    println!("riccati converged in {} iterations", std_gain.iterations_used);

    // Deterministic closed-loop rollout from a unit start.
    let mut x = DVector::from_element(3, 1.0);
    let mut cost = 0.0;
    let mut disc = 1.0;
    for _ in 0..200 {
        let u = lqr_control(&std_gain, &x);
        cost += disc * ((x.transpose() * &sys.q * &x)[(0, 0)] + (u.transpose() * &sys.r * &u)[(0, 0)]);
        x = &sys.a * &x + &sys.b * &u;
        disc *= beta;
    }
    println!("noise-free discounted cost from x0 = 1: {cost:.4}, final |x| = {:.2e}", x.norm());

    // The loss-aware recursion softens the gain as losses grow, and stops
    // converging once the plant cannot be stabilized through the losses.
    println!("\nloss-aware gains:");
    for rate in [0.0, 0.2, 0.4, 0.6, 0.8, 0.95] {
        let loss = LossRateMatrix::new(DVector::from_element(3, rate))?;
        match riccati_modified(&sys, beta, &loss, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            Ok(gain) => {
                let delta = (&gain.k_gain - &std_gain.k_gain).norm();
                println!("  loss {rate:.2}: |K_mod - K_std| = {delta:.4} ({} iterations)", gain.iterations_used);
            }
            Err(e) => println!("  loss {rate:.2}: {e}"),
        }
    }
    Ok(())
}
