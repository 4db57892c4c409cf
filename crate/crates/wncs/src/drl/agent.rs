//! Twin-critic deterministic actor-critic agent over the hybrid
//! scheduling/control action space.
//!
//! Critics estimate the expected discounted sum of negated one-step costs
//! for (state, pre-embedding action) pairs; both are trained on the same
//! minimum-target, and the actor ascends the per-sample minimum critic.
//! Scheduling outputs are embedded into valid channel allocations outside
//! the differentiable path, by max-weight matching of the CSI-weighted
//! scores or by greedy priority mapping.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{Allocation, ChannelGrid};
use crate::config::{AgentKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::nn::{adam_step, clip_global, Activation, AdamState, DenseNet};
use crate::scheduling::{max_weight_matching, priority_mapping, WeightMatrix};

use super::actor::{stack_rows, ActorShape, CodesignActor, SchedHead};
use super::buffer::{Experience, ReplayBuffer};

/// Hyper-parameters consumed per update step.
#[derive(Debug, Clone, Copy)]
pub struct Hyper {
    pub discount: f64,
    pub smoothing: f64,
    pub exploration_std: f64,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub clip_threshold: f64,
    pub batch_size: usize,
    pub actor_update_every: usize,
    pub target_update_every: usize,
    pub partial_gradients: bool,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub actor: CodesignActor,
    pub target_actor: CodesignActor,
    pub critic1: DenseNet,
    pub critic2: DenseNet,
    pub target_critic1: DenseNet,
    pub target_critic2: DenseNet,
    pub adam_actor: AdamState,
    pub adam_critic1: AdamState,
    pub adam_critic2: AdamState,
    pub hyper: Hyper,
    pub kind: AgentKind,
}

/// One decision: the raw (possibly noise-perturbed) actor output, plus the
/// embedded allocation and control input where the agent owns those roles.
#[derive(Debug, Clone)]
pub struct ActionSelection {
    pub a_tilde: DVector<f64>,
    pub allocation: Option<Allocation>,
    pub u_tx: Option<DVector<f64>>,
}

impl Td3Agent {
    /// Builds actor, twin critics and their targets for the configured
    /// agent kind. Targets start as exact copies; the critics draw from
    /// separate streams so their initializations differ.
    pub fn new(config: &ExperimentConfig, init_seed: u64) -> Result<Td3Agent> {
        config.validate()?;
        let state_dim = crate::env::flat_state_dim(
            config.state_dim,
            config.actuators,
            config.devices(),
            config.channels,
            config.full_covariance_state,
        );
        let shape = match config.agent {
            AgentKind::Gca => ActorShape {
                state_dim,
                devices: config.devices(),
                channels: config.channels,
                actuators: config.actuators,
                sched: SchedHead::Weights,
                control: true,
                cascade: config.cascade,
            },
            AgentKind::Td3Control => ActorShape {
                state_dim,
                devices: config.devices(),
                channels: config.channels,
                actuators: config.actuators,
                sched: SchedHead::None,
                control: true,
                cascade: false,
            },
            AgentKind::Td3Priority => ActorShape {
                state_dim,
                devices: config.devices(),
                channels: config.channels,
                actuators: config.actuators,
                sched: SchedHead::Priority,
                control: false,
                cascade: false,
            },
            AgentKind::Td3PriorityControl => ActorShape {
                state_dim,
                devices: config.devices(),
                channels: config.channels,
                actuators: config.actuators,
                sched: SchedHead::Priority,
                control: true,
                cascade: false,
            },
        };

        let mut actor_rng = crate::rng::stream_rng(init_seed, crate::rng::stream_global::ACTOR_INIT);
        let actor = CodesignActor::new(shape, &config.hidden_sizes, config.layer_norm, config.eps_z, &mut actor_rng)?;
        let target_actor = actor.clone();

        let critic_dims: Vec<usize> = std::iter::once(state_dim + shape.action_dim())
            .chain(config.hidden_sizes.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let mut c1_rng = crate::rng::stream_rng(init_seed, crate::rng::stream_global::CRITIC1_INIT);
        let mut c2_rng = crate::rng::stream_rng(init_seed, crate::rng::stream_global::CRITIC2_INIT);
        let critic1 = DenseNet::new(
            &critic_dims,
            Activation::Relu,
            Activation::Identity,
            config.critic_layer_norm,
            config.eps_z,
            &mut c1_rng,
        )?;
        let critic2 = DenseNet::new(
            &critic_dims,
            Activation::Relu,
            Activation::Identity,
            config.critic_layer_norm,
            config.eps_z,
            &mut c2_rng,
        )?;
        let target_critic1 = critic1.clone();
        let target_critic2 = critic2.clone();

        Ok(Td3Agent {
            adam_actor: AdamState::new(actor.param_count(), config.learning_rate),
            adam_critic1: AdamState::new(critic1.param_count(), config.learning_rate),
            adam_critic2: AdamState::new(critic2.param_count(), config.learning_rate),
            actor,
            target_actor,
            critic1,
            critic2,
            target_critic1,
            target_critic2,
            hyper: Hyper {
                discount: config.discount,
                smoothing: config.smoothing,
                exploration_std: config.exploration_std,
                target_noise_std: config.target_noise_std,
                target_noise_clip: config.target_noise_clip,
                clip_threshold: config.clip_threshold,
                batch_size: config.batch_size,
                actor_update_every: config.actor_update_every,
                target_update_every: config.target_update_every,
                partial_gradients: config.partial_gradients && config.agent == AgentKind::Gca,
            },
            kind: config.agent,
        })
    }

    pub fn sched_dim(&self) -> usize {
        self.actor.shape.sched_dim()
    }

    pub fn ctrl_dim(&self) -> usize {
        self.actor.shape.ctrl_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.shape.action_dim()
    }

    /// Embeds a raw action into the environment action: allocation from the
    /// scheduling block (when present) and control input from the control
    /// block (when present).
    pub fn embed(&self, a_tilde: &DVector<f64>, grid: &ChannelGrid) -> Result<ActionSelection> {
        let sched_dim = self.sched_dim();
        let allocation = match self.actor.shape.sched {
            SchedHead::None => None,
            SchedHead::Weights => {
                let weights = DVector::from_iterator(sched_dim, a_tilde.iter().take(sched_dim).copied());
                Some(embed_action(&weights, grid)?)
            }
            SchedHead::Priority => {
                let scores = DVector::from_iterator(sched_dim, a_tilde.iter().take(sched_dim).copied());
                Some(priority_mapping(&scores, grid))
            }
        };
        let u_tx = if self.ctrl_dim() > 0 {
            Some(DVector::from_iterator(
                self.ctrl_dim(),
                a_tilde.iter().skip(sched_dim).take(self.ctrl_dim()).copied(),
            ))
        } else {
            None
        };
        Ok(ActionSelection {
            a_tilde: a_tilde.clone(),
            allocation,
            u_tx,
        })
    }

    /// Runs the actor on one state and embeds the result. With `explore`
    /// set, adds Gaussian noise of std `exploration_std` to every output and
    /// re-clamps the sigmoid-bounded scheduling block to [0, 1].
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        grid: &ChannelGrid,
        rng: &mut R,
        explore: bool,
    ) -> Result<ActionSelection> {
        let s = DMatrix::from_column_slice(state.len(), 1, state.as_slice());
        let (out, _) = self.actor.forward(&s)?;
        let mut a_tilde = DVector::from_column_slice(out.column(0).as_slice());
        if explore {
            for v in a_tilde.iter_mut() {
                let noise: f64 = rng.sample(StandardNormal);
                *v += self.hyper.exploration_std * noise;
            }
            clamp_sched_block(&mut a_tilde, self.sched_dim());
        }
        self.embed(&a_tilde, grid)
    }

    /// TD targets for a batch: `y_i = -c_i + β · min_k Q̂_k(s'_i, π̂(s'_i) + ε')`
    /// with ε' clipped Gaussian smoothing noise, scheduling entries
    /// re-clamped after perturbation.
    pub fn td_target<R: Rng + ?Sized>(
        &self,
        batch: &BatchView,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let (next_actions, _) = self.target_actor.forward(&batch.next_states)?;
        let mut noisy = next_actions;
        for j in 0..noisy.ncols() {
            for i in 0..noisy.nrows() {
                let eps: f64 = rng.sample(StandardNormal);
                let eps = (eps * self.hyper.target_noise_std)
                    .clamp(-self.hyper.target_noise_clip, self.hyper.target_noise_clip);
                noisy[(i, j)] += eps;
                if i < self.sched_dim() {
                    noisy[(i, j)] = noisy[(i, j)].clamp(0.0, 1.0);
                }
            }
        }
        let input = stack_rows(&batch.next_states, &noisy);
        let (q1, _) = self.target_critic1.forward(&input)?;
        let (q2, _) = self.target_critic2.forward(&input)?;
        let b = batch.len();
        Ok(DVector::from_fn(b, |i, _| {
            -batch.costs[i] + self.hyper.discount * q1[(0, i)].min(q2[(0, i)])
        }))
    }

    /// One gradient step on each critic against the shared TD target.
    /// Returns the two mean-squared TD losses.
    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &BatchView, rng: &mut R) -> Result<(f64, f64)> {
        let targets = self.td_target(batch, rng)?;
        let input = stack_rows(&batch.states, &batch.actions);
        let b = batch.len() as f64;

        let mut losses = [0.0f64; 2];
        for (idx, (critic, adam)) in [
            (&mut self.critic1, &mut self.adam_critic1),
            (&mut self.critic2, &mut self.adam_critic2),
        ]
        .into_iter()
        .enumerate()
        {
            let (q, cache) = critic.forward(&input)?;
            let mut grad_out = DMatrix::zeros(1, batch.len());
            let mut loss = 0.0;
            for i in 0..batch.len() {
                let td = targets[i] - q[(0, i)];
                loss += td * td;
                // d/dq of (1/B) Σ (y - q)² is -2 (y - q) / B.
                grad_out[(0, i)] = -2.0 * td / b;
            }
            losses[idx] = loss / b;
            let (grads, _) = critic.backward(&cache, &grad_out)?;
            let mut flat = grads.flatten();
            clip_global(&mut flat, self.hyper.clip_threshold)?;
            let mut params = critic.flatten();
            adam_step(&mut params, &flat, adam)?;
            critic.assign_from_flat(&params)?;
        }
        Ok((losses[0], losses[1]))
    }

    /// Policy-gradient step ascending the per-sample minimum critic at the
    /// actor's own (noise-free) actions. With `partial_gradients` enabled,
    /// critic-to-action gradient components of control entries whose
    /// actuator was not scheduled in the stored slot are zeroed before
    /// backpropagating into the actor. Returns the pre-clip gradient norm.
    pub fn actor_update(&mut self, batch: &BatchView) -> Result<f64> {
        let g_action = self.action_gradient(batch, self.hyper.partial_gradients)?;
        self.apply_actor_gradient(batch, &g_action)
    }

    /// The vanilla update, regardless of the configured masking. Kept
    /// callable so masked and unmasked gradients can be compared directly.
    pub fn actor_update_vanilla(&mut self, batch: &BatchView) -> Result<f64> {
        let g_action = self.action_gradient(batch, false)?;
        self.apply_actor_gradient(batch, &g_action)
    }

    /// Gradient of `-(1/B) Σ_i min_k Q_k(s_i, π(s_i))` with respect to the
    /// actor outputs, optionally masked per stored actuator schedule.
    fn action_gradient(&self, batch: &BatchView, masked: bool) -> Result<DMatrix<f64>> {
        let b = batch.len();
        let (actions, _) = self.actor.forward(&batch.states)?;
        let input = stack_rows(&batch.states, &actions);
        let (q1, cache1) = self.critic1.forward(&input)?;
        let (q2, cache2) = self.critic2.forward(&input)?;

        let scale = -1.0 / b as f64;
        let mut grad1 = DMatrix::zeros(1, b);
        let mut grad2 = DMatrix::zeros(1, b);
        for i in 0..b {
            if q1[(0, i)] <= q2[(0, i)] {
                grad1[(0, i)] = scale;
            } else {
                grad2[(0, i)] = scale;
            }
        }
        let (_, g_in1) = self.critic1.backward(&cache1, &grad1)?;
        let (_, g_in2) = self.critic2.backward(&cache2, &grad2)?;
        let state_dim = batch.states.nrows();
        let action_dim = self.action_dim();
        let mut g_action =
            g_in1.rows(state_dim, action_dim) + g_in2.rows(state_dim, action_dim);

        if masked {
            let sched_dim = self.sched_dim();
            for (i, mask) in batch.actuator_masks.iter().enumerate() {
                for (n, scheduled) in mask.iter().enumerate() {
                    if !scheduled {
                        g_action[(sched_dim + n, i)] = 0.0;
                    }
                }
            }
        }
        Ok(g_action)
    }

    fn apply_actor_gradient(&mut self, batch: &BatchView, g_action: &DMatrix<f64>) -> Result<f64> {
        let (_, cache) = self.actor.forward(&batch.states)?;
        let (grads, _) = self.actor.backward(&cache, g_action)?;
        let mut flat = grads.flatten();
        let norm = clip_global(&mut flat, self.hyper.clip_threshold)?;
        let mut params = self.actor.flatten();
        adam_step(&mut params, &flat, &mut self.adam_actor)?;
        self.actor.assign_from_flat(&params)?;
        Ok(norm)
    }

    /// Raw (unapplied) actor gradient for a batch; test and diagnostic hook.
    pub fn actor_gradient(&self, batch: &BatchView, masked: bool) -> Result<DVector<f64>> {
        let g_action = self.action_gradient(batch, masked)?;
        let (_, cache) = self.actor.forward(&batch.states)?;
        let (grads, _) = self.actor.backward(&cache, &g_action)?;
        Ok(grads.flatten())
    }

    /// Polyak step: `target ← τ·main + (1-τ)·target` for the actor and both
    /// critics.
    pub fn soft_update(&mut self) -> Result<()> {
        let tau = self.hyper.smoothing;
        let blend = |main: &DVector<f64>, target: &DVector<f64>| -> DVector<f64> {
            main * tau + target * (1.0 - tau)
        };
        let t = blend(&self.actor.flatten(), &self.target_actor.flatten());
        self.target_actor.assign_from_flat(&t)?;
        let t = blend(&self.critic1.flatten(), &self.target_critic1.flatten());
        self.target_critic1.assign_from_flat(&t)?;
        let t = blend(&self.critic2.flatten(), &self.target_critic2.flatten());
        self.target_critic2.assign_from_flat(&t)?;
        Ok(())
    }
}

/// Clamps the sigmoid-bounded scheduling block after additive noise.
pub fn clamp_sched_block(action: &mut DVector<f64>, sched_dim: usize) {
    for i in 0..sched_dim {
        action[i] = action[i].clamp(0.0, 1.0);
    }
}

/// CSI-weighted matching embedding: weight each (device, channel) score by
/// the link's current gain and take the exact max-weight matching. The
/// one-device-per-channel constraint holds by construction.
pub fn embed_action(weights: &DVector<f64>, grid: &ChannelGrid) -> Result<Allocation> {
    let devices = grid.devices();
    let channels = grid.channels;
    if weights.len() != devices * channels {
        return Err(Error::Dimension(format!(
            "scheduling block has {} entries, expected {}",
            weights.len(),
            devices * channels
        )));
    }
    let w = DMatrix::from_fn(devices, channels, |d, l| {
        weights[d * channels + l] * grid.gain(d, l)
    });
    Ok(max_weight_matching(&WeightMatrix::new(w)?))
}

/// A batch of transitions in matrix form (columns are samples).
pub struct BatchView {
    pub states: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub costs: Vec<f64>,
    pub next_states: DMatrix<f64>,
    pub actuator_masks: Vec<Vec<bool>>,
}

impl BatchView {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn gather(buffer: &ReplayBuffer, indices: &[usize]) -> BatchView {
        let first = buffer.get(indices[0]);
        let state_dim = first.state.len();
        let action_dim = first.action.len();
        let b = indices.len();
        let mut states = DMatrix::zeros(state_dim, b);
        let mut actions = DMatrix::zeros(action_dim, b);
        let mut next_states = DMatrix::zeros(state_dim, b);
        let mut costs = Vec::with_capacity(b);
        let mut masks = Vec::with_capacity(b);
        for (col, &idx) in indices.iter().enumerate() {
            let e: &Experience = buffer.get(idx);
            states.column_mut(col).copy_from(&e.state);
            actions.column_mut(col).copy_from(&e.action);
            next_states.column_mut(col).copy_from(&e.next_state);
            costs.push(e.cost);
            masks.push(e.actuator_mask.clone());
        }
        BatchView {
            states,
            actions,
            costs,
            next_states,
            actuator_masks: masks,
        }
    }
}
