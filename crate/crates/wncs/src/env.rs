//! The closed-loop environment: state assembly, slot timing, one-step cost.
//!
//! Slot timing follows the one-step transmission delay. The policy at slot t
//! sees the prediction `x̂(t)` built from the previous slot's posterior; its
//! control packet and the sensor packets share the slot's channel outcomes;
//! the measurements received at the slot's end (taken of the state the slot
//! started with) feed the masked Kalman update, whose posterior is then
//! advanced once to form `x̂(t+1)`. The one-step cost charges the decision
//! state of the slot and the control input actually received:
//! `c(t) = x̂(t)ᵀQx̂(t) + Tr(Q P(t)) + u_rx(t)ᵀR u_rx(t)`.
//!
//! Channel fading, plant noise, measurement noise and packet outcomes draw
//! from four separate RNG streams, so the channel trajectory is identical
//! across policies evaluated under the same seed and episode.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use crate::channel::{sample_outcomes, step_channels, Allocation, ChannelGrid};
use crate::error::{Error, Result};
use crate::estimator::{mkf_update, predict_current, EstimatorState};
use crate::plant::{apply_outcomes, measure, step_plant, CovSampler, PacketOutcomes, PlantState, STATE_BOUND};
use crate::rng::{episode_rng, stream};
use crate::world::World;

/// What a policy sees at decision time: the prediction of the current plant
/// state, its error covariance, the previous slot's realized control input,
/// and the current channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpState {
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub u_rx_prev: DVector<f64>,
    pub grid: ChannelGrid,
}

impl MdpState {
    /// Flat encoding for network inputs: `x̂` scaled by the saturation bound,
    /// the covariance as diagonal plus trace (or all K² entries when
    /// `full_covariance` is set), the raw previous control input, and each
    /// link gain mapped from log scale onto [0, 1].
    pub fn flatten(&self, full_covariance: bool, gain_lo: f64, gain_hi: f64) -> DVector<f64> {
        let k = self.x_hat.len();
        let mut out = Vec::with_capacity(flat_state_dim(
            k,
            self.u_rx_prev.len(),
            self.grid.devices(),
            self.grid.channels,
            full_covariance,
        ));
        for x in self.x_hat.iter() {
            out.push(x / STATE_BOUND);
        }
        if full_covariance {
            for x in self.p.iter() {
                out.push(*x);
            }
        } else {
            for i in 0..k {
                out.push(self.p[(i, i)]);
            }
            out.push(self.p.trace());
        }
        for u in self.u_rx_prev.iter() {
            out.push(*u);
        }
        let log_lo = gain_lo.log10();
        let log_hi = gain_hi.log10();
        let span = log_hi - log_lo;
        for dev in 0..self.grid.devices() {
            for ch in 0..self.grid.channels {
                let g = self.grid.gain(dev, ch).log10();
                out.push(if span > 0.0 { (g - log_lo) / span } else { 0.5 });
            }
        }
        DVector::from_vec(out)
    }
}

/// Width of the flat state encoding.
pub fn flat_state_dim(
    state_dim: usize,
    actuators: usize,
    devices: usize,
    channels: usize,
    full_covariance: bool,
) -> usize {
    let cov = if full_covariance { state_dim * state_dim } else { state_dim + 1 };
    state_dim + cov + actuators + devices * channels
}

/// The three cost components of one slot and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// Tr(Q P(t)) — estimation quality.
    pub est_cost: f64,
    /// u_rx(t)ᵀ R u_rx(t) — control effort actually applied.
    pub ctrl_cost: f64,
    /// x̂(t)ᵀ Q x̂(t) — estimated state deviation.
    pub state_cost: f64,
    pub total: f64,
}

/// Everything one step hands back to the policy loop.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: MdpState,
    pub cost: CostBreakdown,
    /// This slot's packet outcomes (feedback the controller is assumed to
    /// receive via CRC and actuator acknowledgements).
    pub outcomes: PacketOutcomes,
}

struct EnvRngs {
    channel: ChaCha8Rng,
    plant: ChaCha8Rng,
    measurement: ChaCha8Rng,
    outcome: ChaCha8Rng,
}

/// One rollout of the closed loop.
pub struct WncsEnv {
    world: Arc<World>,
    plant: PlantState,
    est: EstimatorState,
    u_rx_prev: DVector<f64>,
    grid: ChannelGrid,
    t: u64,
    rngs: EnvRngs,
    w_sampler: CovSampler,
    v_sampler: CovSampler,
}

impl WncsEnv {
    /// Resets to the episode start: zero plant state, zero previous control,
    /// channel states uniform per link, estimator at its zero/W convention.
    /// All randomness derives from `(seed, episode)`.
    pub fn reset(world: Arc<World>, seed: u64, episode: u64) -> Result<(WncsEnv, MdpState)> {
        let mut init_rng = episode_rng(seed, episode, stream::INIT);
        let grid = ChannelGrid::init(&world.channel, &mut init_rng);
        let est = EstimatorState::init(&world.sys);
        let w_sampler = CovSampler::new(&world.sys.w)?;
        let v_sampler = CovSampler::new(&world.sys.v)?;
        let u_rx_prev = DVector::zeros(world.actuators());
        let env = WncsEnv {
            plant: PlantState::zero(world.state_dim()),
            est,
            u_rx_prev: u_rx_prev.clone(),
            grid: grid.clone(),
            t: 0,
            rngs: EnvRngs {
                channel: episode_rng(seed, episode, stream::CHANNEL),
                plant: episode_rng(seed, episode, stream::PLANT),
                measurement: episode_rng(seed, episode, stream::MEASUREMENT),
                outcome: episode_rng(seed, episode, stream::OUTCOME),
            },
            world,
            w_sampler,
            v_sampler,
        };
        let state = env.mdp_state();
        Ok((env, state))
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    /// The current decision state.
    pub fn mdp_state(&self) -> MdpState {
        MdpState {
            x_hat: self.est.x_pred.clone(),
            p: self.est.p_pred.clone(),
            u_rx_prev: self.u_rx_prev.clone(),
            grid: self.grid.clone(),
        }
    }

    /// True plant state — diagnostics only, never part of the policy state.
    pub fn true_state(&self) -> &DVector<f64> {
        &self.plant.x
    }

    /// Posterior covariance trace — diagnostics for rollout traces.
    pub fn posterior_trace(&self) -> f64 {
        self.est.p_est.trace()
    }

    pub fn jitter_events(&self) -> u64 {
        self.est.jitter_events
    }

    /// Norm of the last slot's measurement innovation — diagnostics.
    pub fn innovation_norm(&self) -> f64 {
        self.est.last_innovation_norm
    }

    /// Advances one slot under the given channel allocation and transmitted
    /// control input.
    pub fn step(&mut self, alloc: &Allocation, u_tx: &DVector<f64>) -> Result<StepResult> {
        let world = Arc::clone(&self.world);
        let sys = &world.sys;
        if u_tx.len() != sys.actuator_count() {
            return Err(Error::Dimension(format!(
                "control input has length {}, expected {}",
                u_tx.len(),
                sys.actuator_count()
            )));
        }

        // (1) Packet outcomes for this slot's transmissions.
        let outcomes = sample_outcomes(alloc, &self.grid, &world.budget, &mut self.rngs.outcome)?;

        // (2) Mask the transmitted signals: measurements are taken of the
        // state the slot started with and received at the slot's end.
        let y_tx = measure(sys, &self.plant, &self.v_sampler, &mut self.rngs.measurement)?;
        let (u_rx, y_rx) = apply_outcomes(u_tx, &y_tx, &outcomes)?;

        // (3) One-step cost: the decision state of this slot plus the
        // realized control effort.
        let x_hat = &self.est.x_pred;
        let p = &self.est.p_pred;
        let state_cost = (x_hat.transpose() * &sys.q * x_hat)[(0, 0)];
        let est_cost = (&sys.q * p).trace();
        let ctrl_cost = (u_rx.transpose() * &sys.r * &u_rx)[(0, 0)];
        let cost = CostBreakdown {
            est_cost,
            ctrl_cost,
            state_cost,
            total: est_cost + ctrl_cost + state_cost,
        };

        // (4) Plant transition under the received input.
        self.plant = step_plant(sys, &self.plant, &u_rx, &self.w_sampler, &mut self.rngs.plant)?;

        // (5) Masked Kalman update with this slot's received measurements;
        // its prior runs from the previous slot's control input.
        let mut est = mkf_update(sys, &self.est, &y_rx, &outcomes.psi, &self.u_rx_prev)?;

        // (6) Prediction for the next decision uses this slot's control.
        let (x_pred, p_pred) = predict_current(sys, &est, &u_rx);
        est.x_pred = x_pred;
        est.p_pred = p_pred;
        self.est = est;

        // (7) Channels fade independently of everything above.
        self.grid = step_channels(&world.channel, &self.grid, &mut self.rngs.channel);

        self.u_rx_prev = u_rx;
        self.t += 1;

        Ok(StepResult {
            state: self.mdp_state(),
            cost,
            outcomes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::scheduling::{Scheduler, SchedulerKind};

    fn test_world(seed: u64) -> Arc<World> {
        let cfg = ExperimentConfig {
            state_dim: 2,
            sensors: 2,
            actuators: 2,
            channels: 2,
            seed,
            ..ExperimentConfig::default()
        };
        Arc::new(World::generate(&cfg).unwrap())
    }

    #[test]
    fn reset_matches_conventions() {
        let world = test_world(3);
        let (_, state) = WncsEnv::reset(Arc::clone(&world), 5, 0).unwrap();
        assert!(state.x_hat.iter().all(|x| *x == 0.0));
        assert!(state.u_rx_prev.iter().all(|x| *x == 0.0));
        // P(0) = A W Aᵀ + W.
        let expect = &world.sys.a * &world.sys.w * world.sys.a.transpose() + &world.sys.w;
        assert!(((&state.p - expect).abs()).max() < 1e-12);
        // All gains belong to the ladder.
        for dev in 0..state.grid.devices() {
            for ch in 0..state.grid.channels {
                assert!(world.channel.gains.contains(&state.grid.gain(dev, ch)));
            }
        }
    }

    #[test]
    fn reset_is_deterministic() {
        let world = test_world(3);
        let (_, a) = WncsEnv::reset(Arc::clone(&world), 5, 2).unwrap();
        let (_, b) = WncsEnv::reset(Arc::clone(&world), 5, 2).unwrap();
        assert_eq!(a, b);
        let (_, c) = WncsEnv::reset(world, 5, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn failed_control_packets_cost_nothing() {
        // With every link always failing, u_rx = 0 regardless of u_tx.
        let world = test_world(4);
        let (mut env, _) = WncsEnv::reset(world, 7, 0).unwrap();
        let alloc = Allocation::empty(4, 2); // nobody scheduled => all fail
        let u_tx = DVector::from_vec(vec![5.0, -3.0]);
        for _ in 0..5 {
            let step = env.step(&alloc, &u_tx).unwrap();
            assert_eq!(step.cost.ctrl_cost, 0.0);
            assert!(step.state.u_rx_prev.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn cost_components_recompute_exactly() {
        let world = test_world(5);
        let (mut env, mut state) = WncsEnv::reset(Arc::clone(&world), 9, 0).unwrap();
        let mut sched = Scheduler::new(SchedulerKind::RoundRobin, 2, 2, 2);
        let mut rng = crate::rng::stream_rng(9, crate::rng::stream::POLICY);
        for _ in 0..20 {
            let alloc = sched.allocate(&state.grid, &mut rng);
            let u_tx = DVector::from_vec(vec![0.3, -0.4]);
            // Recompute the cost from the pre-step decision state.
            let expect_state = (state.x_hat.transpose() * &world.sys.q * &state.x_hat)[(0, 0)];
            let expect_est = (&world.sys.q * &state.p).trace();
            let step = env.step(&alloc, &u_tx).unwrap();
            sched.observe(&step.outcomes);
            let u_rx = &step.state.u_rx_prev;
            let expect_ctrl = (u_rx.transpose() * &world.sys.r * u_rx)[(0, 0)];
            assert!((step.cost.state_cost - expect_state).abs() < 1e-12);
            assert!((step.cost.est_cost - expect_est).abs() < 1e-12);
            assert!((step.cost.ctrl_cost - expect_ctrl).abs() < 1e-12);
            assert!(
                (step.cost.total - (step.cost.est_cost + step.cost.ctrl_cost + step.cost.state_cost)).abs()
                    < 1e-12
            );
            state = step.state;
        }
    }

    #[test]
    fn channel_trajectory_is_policy_independent() {
        // Same seed and episode, two very different policies: the gain
        // sequences must coincide slot by slot.
        let world = test_world(6);
        let (mut env_a, state_a) = WncsEnv::reset(Arc::clone(&world), 11, 0).unwrap();
        let (mut env_b, _) = WncsEnv::reset(Arc::clone(&world), 11, 0).unwrap();

        let mut grids_a = Vec::new();
        let mut grids_b = Vec::new();
        let alloc_none = Allocation::empty(4, 2);
        let mut alloc_busy = Allocation::empty(4, 2);
        alloc_busy.set(0, 0);
        alloc_busy.set(3, 1);
        let zero = DVector::zeros(2);
        let big = DVector::from_vec(vec![50.0, -50.0]);
        let mut sa = state_a;
        for _ in 0..25 {
            let ra = env_a.step(&alloc_none, &zero).unwrap();
            grids_a.push(ra.state.grid.clone());
            sa = ra.state;
            let rb = env_b.step(&alloc_busy, &big).unwrap();
            grids_b.push(rb.state.grid.clone());
        }
        let _ = sa;
        assert_eq!(grids_a, grids_b);
    }

    #[test]
    fn deterministic_covariance_recursion_without_successes() {
        // No packets ever arrive: P follows P ← A P Aᵀ + W deterministically
        // and the state cost contribution of x̂ stays zero under zero input.
        let world = test_world(8);
        let (mut env, state) = WncsEnv::reset(Arc::clone(&world), 13, 0).unwrap();
        let alloc = Allocation::empty(4, 2);
        let zero = DVector::zeros(2);
        let mut p_oracle = state.p.clone();
        let mut st = state;
        for _ in 0..10 {
            let step = env.step(&alloc, &zero).unwrap();
            assert_eq!(step.cost.state_cost, 0.0);
            p_oracle = &world.sys.a * &p_oracle * world.sys.a.transpose() + &world.sys.w;
            let diff = (&step.state.p - &p_oracle).abs().max();
            assert!(diff < 1e-9, "covariance recursion diverged: {diff}");
            st = step.state;
        }
        let _ = st;
    }

    #[test]
    fn scalar_hand_trace() {
        // Scalar system with all noise disabled and a perfect channel:
        // every quantity is hand-computable.
        let cfg = ExperimentConfig {
            state_dim: 1,
            sensors: 1,
            actuators: 1,
            channels: 1,
            gain_levels: vec![1e-1],
            seed: 2,
            ..ExperimentConfig::default()
        };
        cfg.validate().unwrap();
        let mut world = World::generate(&cfg).unwrap();
        world.sys.a = DMatrix::from_element(1, 1, 1.05);
        world.sys.b = DMatrix::from_element(1, 1, 1.0);
        world.sys.c = DMatrix::identity(1, 1);
        world.sys.w = DMatrix::zeros(1, 1);
        world.sys.v = DMatrix::zeros(1, 1);
        let world = Arc::new(world);

        let (mut env, s0) = WncsEnv::reset(Arc::clone(&world), 1, 0).unwrap();
        assert_eq!(s0.x_hat[0], 0.0);
        assert_eq!(s0.p[(0, 0)], 0.0); // W = 0 ⇒ P(0) = 0

        // Slot 0: schedule both... only one channel; schedule the sensor.
        let alloc = Allocation::from_pairs(&[(0, 0)], 2, 1).unwrap();
        let u_tx = DVector::from_element(1, 2.0);
        let step = env.step(&alloc, &u_tx).unwrap();
        // Actuator unscheduled: u_rx = 0, ctrl_cost = 0; x(1) = 1.05·0 = 0.
        assert_eq!(step.cost.ctrl_cost, 0.0);
        assert_eq!(step.cost.state_cost, 0.0);
        assert_eq!(step.cost.est_cost, 0.0);
        // Sensor packet on a 1e-1 gain link at default budget: certain
        // success; measurement of x(0) = 0 keeps the posterior at zero.
        assert_eq!(step.state.x_hat[0], 0.0);

        // Now schedule the actuator instead.
        let alloc_c = Allocation::from_pairs(&[(1, 0)], 2, 1).unwrap();
        let step2 = env.step(&alloc_c, &u_tx).unwrap();
        // u_rx = 2 ⇒ ctrl_cost = 4; x(2) = 1.05·x(1) + 2.
        assert_eq!(step2.cost.ctrl_cost, 4.0);
        // Prediction for slot 2: x̂ = 1.05·x̂_est(1) + 1·2 = 2 (posterior was 0).
        assert_eq!(step2.state.x_hat[0], 2.0);
        assert_eq!(env.true_state()[0], 2.0);
    }
}
