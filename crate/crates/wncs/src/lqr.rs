//! Benchmark linear-quadratic controllers: discounted Riccati recursions for
//! perfect-communication and packet-loss-aware gains, plus empirical loss
//! rate estimation to feed the latter.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plant::SystemMatrices;

/// Elementwise convergence tolerance of the Riccati recursion.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap of the Riccati recursion.
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Any iterate entry beyond this magnitude is treated as divergence.
const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqrVariant {
    Standard,
    Modified,
}

/// Converged feedback gain with its Riccati solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrGain {
    /// Feedback matrix; the control law is `u = K x̂` (minus sign included).
    pub k_gain: DMatrix<f64>,
    /// Converged Riccati matrix, symmetric PSD.
    pub s_inf: DMatrix<f64>,
    pub variant: LqrVariant,
    pub iterations_used: usize,
}

/// Diagonal matrix of average control packet loss rates, one per actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRateMatrix {
    rates: DVector<f64>,
}

impl LossRateMatrix {
    pub fn new(rates: DVector<f64>) -> Result<Self> {
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::parameter("loss rates must lie in [0, 1]"));
        }
        Ok(LossRateMatrix { rates })
    }

    pub fn zero(actuators: usize) -> Self {
        LossRateMatrix {
            rates: DVector::zeros(actuators),
        }
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        LossRateMatrix::new(&self.rates * factor)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Shared recursion body. `loss` pre-multiplies the quadratic correction
/// term by `I - E`; with `E = 0` that multiply is an exact no-op, so the
/// modified recursion reproduces the standard one bit for bit.
fn riccati_solve(
    sys: &SystemMatrices,
    beta: f64,
    loss: Option<&LossRateMatrix>,
    tol: f64,
    max_iter: usize,
) -> Result<LqrGain> {
    if !(0.0 < beta && beta <= 1.0) {
        return Err(Error::parameter(format!("discount factor must be in (0, 1], got {beta}")));
    }
    if tol <= 0.0 || max_iter == 0 {
        return Err(Error::parameter("tolerance must be positive and max_iter nonzero"));
    }
    if let Some(e) = loss {
        // The loss diagonal pre-multiplies the K×K correction term, which
        // only typechecks when each actuator drives one state dimension.
        if sys.actuator_count() != sys.state_dim() || e.rates.len() != sys.actuator_count() {
            return Err(Error::Dimension(
                "loss-aware recursion requires N == K with one rate per actuator".into(),
            ));
        }
    }

    let a_t = sys.a.transpose();
    let b_t = sys.b.transpose();
    let mut s = sys.q.clone();
    let mut residual = f64::INFINITY;

    for iter in 1..=max_iter {
        let sb = &s * &sys.b;
        let inner = (&b_t * &sb + &sys.r)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("BᵀSB + R not invertible".into()))?;
        let core = &a_t * &sb * inner * &b_t * &s * &sys.a;
        let correction = match loss {
            Some(e) => {
                let scaled = DMatrix::from_fn(core.nrows(), core.ncols(), |i, j| {
                    (1.0 - e.rates[i]) * core[(i, j)]
                });
                scaled
            }
            None => core,
        };
        let mut s_next = beta * &a_t * &s * &sys.a + &sys.q - beta * beta * correction;
        symmetrize(&mut s_next);

        if s_next.iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_BOUND) {
            return Err(Error::NoConvergence {
                residual: f64::INFINITY,
                iterations: iter,
            });
        }

        residual = (&s_next - &s).abs().max();
        s = s_next;
        if residual < tol {
            let sb = &s * &sys.b;
            let inner = (&b_t * &sb + &sys.r)
                .try_inverse()
                .ok_or_else(|| Error::Numerical("BᵀSB + R not invertible".into()))?;
            let k_gain = -beta * inner * &b_t * &s * &sys.a;
            return Ok(LqrGain {
                k_gain,
                s_inf: s,
                variant: if loss.is_some() {
                    LqrVariant::Modified
                } else {
                    LqrVariant::Standard
                },
                iterations_used: iter,
            });
        }
    }

    Err(Error::NoConvergence {
        residual,
        iterations: max_iter,
    })
}

/// Solves the discounted Riccati recursion designed for perfect
/// communication, starting from the state penalty.
pub fn riccati_standard(
    sys: &SystemMatrices,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LqrGain> {
    riccati_solve(sys, beta, None, tol, max_iter)
}

/// Solves the packet-loss-aware recursion: the control-improvement term is
/// attenuated by `I - E`, where `E` holds average control packet loss rates.
/// Large loss rates can make the recursion diverge for unstable plants; that
/// is reported as non-convergence, not a panic.
pub fn riccati_modified(
    sys: &SystemMatrices,
    beta: f64,
    loss: &LossRateMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<LqrGain> {
    riccati_solve(sys, beta, Some(loss), tol, max_iter)
}

/// The control law: `u_tx = K x̂`.
pub fn lqr_control(gain: &LqrGain, x_pred: &DVector<f64>) -> DVector<f64> {
    &gain.k_gain * x_pred
}

/// Measures per-actuator control packet loss rates empirically: zero-input
/// warmup rollouts under the given scheduler, counting per-slot delivery
/// failures. In [`LossRateMode::IncludeUnscheduled`] a slot without a
/// channel counts as a loss (the rate the plant actually experiences); in
/// [`LossRateMode::ScheduledOnly`] only decode failures of scheduled
/// transmissions count, and an actuator that is never scheduled is assigned
/// rate 1.
pub fn estimate_loss_rates(
    world: &std::sync::Arc<crate::world::World>,
    scheduler_kind: crate::scheduling::SchedulerKind,
    warmup_episodes: usize,
    steps_per_episode: usize,
    mode: crate::config::LossRateMode,
    seed: u64,
) -> Result<LossRateMatrix> {
    use crate::config::LossRateMode;

    if warmup_episodes == 0 || steps_per_episode == 0 {
        return Err(Error::parameter("loss estimation needs at least one episode and one step"));
    }
    let n = world.actuators();
    let m = world.sensors();
    let zero_input = DVector::zeros(n);
    let mut losses = vec![0u64; n];
    let mut samples = vec![0u64; n];

    for episode in 0..warmup_episodes {
        let (mut env, mut state) = crate::env::WncsEnv::reset(std::sync::Arc::clone(world), seed, episode as u64)?;
        let mut scheduler = crate::scheduling::Scheduler::new(scheduler_kind, m, n, world.channels());
        let mut policy_rng = crate::rng::episode_rng(seed, episode as u64, crate::rng::stream::POLICY);
        for _ in 0..steps_per_episode {
            let alloc = scheduler.allocate(&state.grid, &mut policy_rng);
            let step = env.step(&alloc, &zero_input)?;
            for actuator in 0..n {
                let scheduled = alloc.is_scheduled(m + actuator);
                let delivered = step.outcomes.lambda[actuator];
                match mode {
                    LossRateMode::IncludeUnscheduled => {
                        samples[actuator] += 1;
                        if !delivered {
                            losses[actuator] += 1;
                        }
                    }
                    LossRateMode::ScheduledOnly => {
                        if scheduled {
                            samples[actuator] += 1;
                            if !delivered {
                                losses[actuator] += 1;
                            }
                        }
                    }
                }
            }
            scheduler.observe(&step.outcomes);
            state = step.state;
        }
    }

    let rates = DVector::from_fn(n, |i, _| {
        if samples[i] == 0 {
            1.0
        } else {
            (losses[i] as f64 / samples[i] as f64).clamp(0.0, 1.0)
        }
    });
    LossRateMatrix::new(rates)
}
