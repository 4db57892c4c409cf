//! The training loop: per-episode environment resets, noisy action
//! selection with embedding, replay storage, per-step critic updates,
//! delayed actor updates and Polyak target tracking.
//!
//! Agents that do not own both action roles are trained in closed loop with
//! their paired benchmark: a control-only agent acts under the configured
//! benchmark scheduler, a priority-only agent under the perfect-channel
//! feedback controller.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{AgentKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::lqr::{lqr_control, riccati_standard, LqrGain};
use crate::rng::{episode_rng, stream, stream_global, stream_rng};
use crate::scheduling::Scheduler;
use crate::world::World;

use super::agent::{BatchView, Td3Agent};
use super::buffer::{Experience, ReplayBuffer};

/// Per-episode training diagnostics.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Undiscounted sum of one-step costs over the episode.
    pub cumulative_cost: f64,
    /// Mean of the two critic losses across the episode's updates.
    pub mean_td_loss: f64,
    /// Mean pre-clip actor gradient norm across the episode's actor updates.
    pub actor_grad_norm: f64,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("episode,cumulative_cost,mean_td_loss,actor_grad_norm\n");
        for e in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.episode, e.cumulative_cost, e.mean_td_loss, e.actor_grad_norm
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Mean episode cost over the closed range of episode indices.
    pub fn mean_cost(&self, from: usize, to: usize) -> f64 {
        let slice: Vec<f64> = self
            .episodes
            .iter()
            .filter(|e| e.episode >= from && e.episode <= to)
            .map(|e| e.cumulative_cost)
            .collect();
        slice.iter().sum::<f64>() / slice.len().max(1) as f64
    }
}

/// A completed training run with everything a checkpoint records.
pub struct TrainRun {
    pub agent: Td3Agent,
    pub log: TrainingLog,
    pub buffer_meta: crate::checkpoint::BufferMeta,
    pub train_rng: crate::rng::RngCursor,
    pub episodes_completed: usize,
}

/// Trains an agent on the given world. On numerical divergence the agent
/// state is checkpointed into `diag_dir` (when provided) before the error
/// returns. Deterministic: the log is a pure function of (config, world).
pub fn train(
    config: &ExperimentConfig,
    world: Arc<World>,
    diag_dir: Option<&Path>,
) -> Result<TrainRun> {
    config.validate()?;
    let mut agent = Td3Agent::new(config, config.seed)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut log = TrainingLog::default();

    let needs_scheduler = agent.sched_dim() == 0;
    let needs_controller = agent.ctrl_dim() == 0;
    let paired_gain: Option<LqrGain> = if needs_controller {
        Some(riccati_standard(
            &world.sys,
            config.discount,
            crate::lqr::DEFAULT_TOL,
            crate::lqr::DEFAULT_MAX_ITER,
        )?)
    } else {
        None
    };

    let gain_lo = *world.channel.gains.first().expect("non-empty ladder");
    let gain_hi = *world.channel.gains.last().expect("non-empty ladder");
    let mut train_rng = stream_rng(config.seed, stream_global::TRAINING);
    let mut warmup_rng = stream_rng(config.seed, stream_global::WARMUP);
    let mut global_step: usize = 0;

    let result = (|| -> Result<()> {
        for episode in 0..config.episodes {
            let (mut env, state0) =
                crate::env::WncsEnv::reset(Arc::clone(&world), config.seed, episode as u64)?;
            let mut scheduler = Scheduler::new(
                config.scheduler,
                world.sensors(),
                world.actuators(),
                world.channels(),
            );
            let mut policy_rng = episode_rng(config.seed, episode as u64, stream::POLICY);
            let mut explore_rng = episode_rng(config.seed, episode as u64, stream::EXPLORATION);

            let mut state = state0;
            let mut s_flat = state.flatten(config.full_covariance_state, gain_lo, gain_hi);
            let mut episode_cost = 0.0;
            let mut td_loss_sum = 0.0;
            let mut td_updates = 0usize;
            let mut actor_norm_sum = 0.0;
            let mut actor_updates = 0usize;

            for t in 0..config.steps_per_episode {
                let selection = if global_step < config.warmup_steps {
                    let a = random_action(agent.sched_dim(), agent.ctrl_dim(), &mut warmup_rng);
                    agent.embed(&a, &state.grid)?
                } else {
                    agent.select_action(&s_flat, &state.grid, &mut explore_rng, true)?
                };

                let alloc = match &selection.allocation {
                    Some(alloc) => alloc.clone(),
                    None => scheduler.allocate(&state.grid, &mut policy_rng),
                };
                let u_tx = match &selection.u_tx {
                    Some(u) => u.clone(),
                    None => {
                        let gain = paired_gain.as_ref().expect("paired controller solved");
                        lqr_control(gain, &state.x_hat)
                    }
                };

                let step = env.step(&alloc, &u_tx)?;
                if needs_scheduler {
                    scheduler.observe(&step.outcomes);
                }
                episode_cost += step.cost.total;

                let mask: Vec<bool> = (0..world.actuators())
                    .map(|n| alloc.is_scheduled(world.sensors() + n))
                    .collect();
                let s_next = step
                    .state
                    .flatten(config.full_covariance_state, gain_lo, gain_hi);
                buffer.push(Experience {
                    state: s_flat.clone(),
                    action: selection.a_tilde.clone(),
                    cost: step.cost.total / config.cost_scale,
                    next_state: s_next.clone(),
                    actuator_mask: mask,
                });

                if global_step >= config.warmup_steps && buffer.len() >= config.batch_size {
                    let indices = buffer.sample_indices(config.batch_size, &mut train_rng);
                    let batch = BatchView::gather(&buffer, &indices);
                    let (l1, l2) = agent.critic_update(&batch, &mut train_rng)?;
                    if !l1.is_finite() || !l2.is_finite() {
                        return Err(Error::Diverged {
                            episode,
                            step: t,
                            what: format!("critic losses ({l1}, {l2})"),
                        });
                    }
                    td_loss_sum += 0.5 * (l1 + l2);
                    td_updates += 1;
                    if (global_step + 1) % config.actor_update_every == 0 {
                        let norm = agent.actor_update(&batch)?;
                        if !norm.is_finite() {
                            return Err(Error::Diverged {
                                episode,
                                step: t,
                                what: format!("actor gradient norm {norm}"),
                            });
                        }
                        actor_norm_sum += norm;
                        actor_updates += 1;
                    }
                    if (global_step + 1) % config.target_update_every == 0 {
                        agent.soft_update()?;
                    }
                }

                global_step += 1;
                s_flat = s_next;
                state = step.state;
            }

            log.episodes.push(EpisodeLog {
                episode,
                cumulative_cost: episode_cost,
                mean_td_loss: if td_updates > 0 {
                    td_loss_sum / td_updates as f64
                } else {
                    0.0
                },
                actor_grad_norm: if actor_updates > 0 {
                    actor_norm_sum / actor_updates as f64
                } else {
                    0.0
                },
            });
        }
        Ok(())
    })();

    let buffer_meta = crate::checkpoint::BufferMeta::of(&buffer);
    let train_cursor = crate::rng::RngCursor::capture(&train_rng);

    if let Err(err) = result {
        if let (Some(dir), Error::Diverged { episode, .. }) = (diag_dir, &err) {
            std::fs::create_dir_all(dir).ok();
            let path = dir.join("diverged-checkpoint.json");
            crate::checkpoint::AgentCheckpoint::capture(
                &agent,
                config,
                buffer_meta,
                Some(train_cursor),
                *episode,
            )
            .save(&path)
            .ok();
        }
        return Err(err);
    }

    Ok(TrainRun {
        agent,
        log,
        buffer_meta,
        train_rng: train_cursor,
        episodes_completed: config.episodes,
    })
}

/// Uniform warm-up action: scheduling weights uniform on [0, 1], control
/// entries standard normal.
fn random_action<R: Rng + ?Sized>(sched_dim: usize, ctrl_dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(sched_dim + ctrl_dim, |i, _| {
        if i < sched_dim {
            rng.random_range(0.0..1.0)
        } else {
            rng.sample(StandardNormal)
        }
    })
}

/// Paired benchmark requirement of an agent kind during training.
pub fn training_pairing(kind: AgentKind) -> (&'static str, &'static str) {
    match kind {
        AgentKind::Gca => ("agent", "agent"),
        AgentKind::Td3Control => ("benchmark", "agent"),
        AgentKind::Td3Priority => ("agent", "standard-lqr"),
        AgentKind::Td3PriorityControl => ("agent", "agent"),
    }
}
