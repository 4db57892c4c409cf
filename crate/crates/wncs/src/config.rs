//! Experiment configuration with defaults matching the reference setup.
//! Every field maps one-to-one onto a config-file key; omitted keys take
//! their defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::LinkBudget;
use crate::error::Result;
use crate::scheduling::SchedulerKind;

/// Which learner drives the codesign action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// Dual-branch cascaded actor with matching-based action embedding and
    /// partial policy gradients: the full codesign learner.
    Gca,
    /// Actor outputs control inputs only; scheduling comes from a fixed
    /// benchmark policy.
    Td3Control,
    /// Actor outputs per-device priority scores mapped greedily to channels;
    /// control comes from a fixed benchmark controller.
    Td3Priority,
    /// Single actor emitting priority scores and control inputs, without the
    /// cascade or partial gradients.
    Td3PriorityControl,
}

impl AgentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Gca => "gca",
            AgentKind::Td3Control => "td3-control",
            AgentKind::Td3Priority => "td3-priority",
            AgentKind::Td3PriorityControl => "td3-priority-control",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gca" => Ok(AgentKind::Gca),
            "td3-control" => Ok(AgentKind::Td3Control),
            "td3-priority" => Ok(AgentKind::Td3Priority),
            "td3-priority-control" => Ok(AgentKind::Td3PriorityControl),
            other => Err(crate::Error::Config(format!("unknown agent kind '{other}'"))),
        }
    }
}

/// Benchmark controller selection for evaluation pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Zero,
    StandardLqr,
    ModifiedLqr,
    /// A trained agent checkpoint supplies the control inputs.
    Agent,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Zero => "zero",
            ControllerKind::StandardLqr => "standard-lqr",
            ControllerKind::ModifiedLqr => "modified-lqr",
            ControllerKind::Agent => "agent",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(ControllerKind::Zero),
            "standard-lqr" => Ok(ControllerKind::StandardLqr),
            "modified-lqr" => Ok(ControllerKind::ModifiedLqr),
            "agent" => Ok(ControllerKind::Agent),
            other => Err(crate::Error::Config(format!("unknown controller '{other}'"))),
        }
    }
}

/// How control packet loss rates are measured for the loss-aware controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossRateMode {
    /// Slots where the actuator was not scheduled count as losses.
    IncludeUnscheduled,
    /// Only decode failures of scheduled transmissions count.
    ScheduledOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Plant state dimension K.
    pub state_dim: usize,
    /// Sensor count M.
    pub sensors: usize,
    /// Actuator count N.
    pub actuators: usize,
    /// Channel count L.
    pub channels: usize,
    /// Power-gain ladder (H levels, increasing).
    pub gain_levels: Vec<f64>,
    pub link: LinkBudget,

    /// Training episodes E.
    pub episodes: usize,
    /// Slots per episode T.
    pub steps_per_episode: usize,
    /// Discount factor β.
    pub discount: f64,
    /// Target smoothing factor τ.
    pub smoothing: f64,
    /// Mini-batch size B.
    pub batch_size: usize,
    /// Actor update period D₁ (in environment steps).
    pub actor_update_every: usize,
    /// Target update period D₂.
    pub target_update_every: usize,
    /// Exploration noise standard deviation σ_a.
    pub exploration_std: f64,
    /// Adam learning rate for actor and critics.
    pub learning_rate: f64,
    /// Replay buffer capacity.
    pub buffer_capacity: usize,
    /// Hidden layer widths.
    pub hidden_sizes: Vec<usize>,
    /// Global gradient-norm clip threshold.
    pub clip_threshold: f64,
    /// Layer normalization after every hidden affine layer of the actor.
    pub layer_norm: bool,
    /// Layer normalization inside the critics. Value regression prefers
    /// unnormalized hidden layers; the actor-side normalization is what
    /// balances the cross-domain input scales.
    pub critic_layer_norm: bool,
    /// Layer-norm stability constant.
    pub eps_z: f64,
    /// Target-policy smoothing noise std.
    pub target_noise_std: f64,
    /// Target-policy smoothing noise clip.
    pub target_noise_clip: f64,
    /// Uniformly random environment steps before learning starts.
    pub warmup_steps: usize,
    /// Divisor applied to one-step costs before they enter the replay
    /// buffer. Scaling the objective by a constant leaves the optimal
    /// policy unchanged but keeps TD targets inside the range a clipped
    /// critic can track; the default maps a saturation-level state cost
    /// to order one. Logs and reports always carry unscaled costs.
    pub cost_scale: f64,
    /// Feed the full K×K covariance into the state instead of diag + trace.
    pub full_covariance_state: bool,
    /// Cascade the scheduling branch into the control branch (GCA only).
    pub cascade: bool,
    /// Mask control-input gradients of unscheduled actuators (GCA only).
    pub partial_gradients: bool,

    pub agent: AgentKind,
    /// Scheduler paired with the agent during training when the agent does
    /// not schedule, and with benchmark controllers during evaluation.
    pub scheduler: SchedulerKind,
    pub controller: ControllerKind,

    /// Episodes averaged in an evaluation report.
    pub eval_episodes: usize,
    /// Slots per evaluation episode.
    pub eval_steps: usize,

    pub loss_rate_mode: LossRateMode,
    /// Zero-input episodes used to estimate control loss rates.
    pub loss_warmup_episodes: usize,

    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            state_dim: 5,
            sensors: 5,
            actuators: 5,
            channels: 5,
            gain_levels: crate::channel::default_gain_levels(),
            link: LinkBudget::default(),
            episodes: 3_000,
            steps_per_episode: 100,
            discount: 0.99,
            smoothing: 0.005,
            batch_size: 64,
            actor_update_every: 2,
            target_update_every: 2,
            exploration_std: 0.1f64.sqrt(),
            learning_rate: 0.001,
            buffer_capacity: 100_000,
            hidden_sizes: vec![300, 200, 100],
            clip_threshold: 1.0,
            layer_norm: true,
            critic_layer_norm: false,
            eps_z: 1e-5,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            warmup_steps: 1_000,
            cost_scale: crate::plant::STATE_BOUND * crate::plant::STATE_BOUND,
            full_covariance_state: false,
            cascade: true,
            partial_gradients: true,
            agent: AgentKind::Gca,
            scheduler: SchedulerKind::RoundRobin,
            controller: ControllerKind::StandardLqr,
            eval_episodes: 100,
            eval_steps: 100,
            loss_rate_mode: LossRateMode::IncludeUnscheduled,
            loss_warmup_episodes: 50,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn devices(&self) -> usize {
        self.sensors + self.actuators
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.state_dim == 0 || self.sensors == 0 || self.actuators == 0 {
            return Err(Error::Config("state_dim, sensors, actuators must be nonzero".into()));
        }
        if self.channels == 0 || self.channels > self.devices() {
            return Err(Error::Config("channels must satisfy 1 <= L <= M + N".into()));
        }
        if self.gain_levels.is_empty() {
            return Err(Error::Config("gain_levels must be non-empty".into()));
        }
        if !(0.0 < self.discount && self.discount <= 1.0) {
            return Err(Error::Config("discount must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::Config("smoothing must be in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.actor_update_every == 0 || self.target_update_every == 0 {
            return Err(Error::Config("batch_size, D1, D2 must be nonzero".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden_sizes must be non-empty and nonzero".into()));
        }
        if !(self.cost_scale.is_finite() && self.cost_scale > 0.0) {
            return Err(Error::Config("cost_scale must be positive and finite".into()));
        }
        self.link.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)
            .map_err(|e| crate::Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Stable hex digest of the canonical JSON form, stamped into reports so
    /// results can be traced to the exact configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}
