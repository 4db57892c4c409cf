//! Versioned agent checkpoints: all six networks, optimizer state, replay
//! cursor metadata and the training RNG cursor, so a run can be inspected,
//! evaluated, or resumed bit-exactly.
//!
//! Weights are stored row-major per layer. Floats round-trip exactly.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::drl::actor::{ActorShape, CodesignActor, SchedHead};
use crate::drl::{ReplayBuffer, Td3Agent};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, DenseNet, Layer, LayerNormParams};
use crate::rng::RngCursor;
use crate::world::MatrixRepr;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRepr {
    weight: MatrixRepr,
    bias: Vec<f64>,
    norm_scale: Option<Vec<f64>>,
    norm_shift: Option<Vec<f64>>,
    activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetRepr {
    layers: Vec<LayerRepr>,
    eps_z: f64,
}

impl NetRepr {
    fn from_net(net: &DenseNet) -> NetRepr {
        NetRepr {
            layers: net
                .layers
                .iter()
                .map(|l| LayerRepr {
                    weight: MatrixRepr::from_matrix(&l.weight),
                    bias: l.bias.iter().copied().collect(),
                    norm_scale: l.norm.as_ref().map(|n| n.scale.iter().copied().collect()),
                    norm_shift: l.norm.as_ref().map(|n| n.shift.iter().copied().collect()),
                    activation: l.activation,
                })
                .collect(),
            eps_z: net.eps_z,
        }
    }

    fn to_net(&self) -> Result<DenseNet> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let weight = l.weight.to_matrix()?;
            let norm = match (&l.norm_scale, &l.norm_shift) {
                (Some(scale), Some(shift)) => Some(LayerNormParams {
                    scale: DVector::from_vec(scale.clone()),
                    shift: DVector::from_vec(shift.clone()),
                }),
                (None, None) => None,
                _ => return Err(Error::Config("norm scale/shift must appear together".into())),
            };
            layers.push(Layer {
                bias: DVector::from_vec(l.bias.clone()),
                weight,
                norm,
                activation: l.activation,
            });
        }
        Ok(DenseNet {
            layers,
            eps_z: self.eps_z,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ActorRepr {
    state_dim: usize,
    devices: usize,
    channels: usize,
    actuators: usize,
    sched: SchedHead,
    control: bool,
    cascade: bool,
    trunk: NetRepr,
    sched_head: Option<NetRepr>,
    ctrl_head: Option<NetRepr>,
}

impl ActorRepr {
    fn from_actor(actor: &CodesignActor) -> ActorRepr {
        ActorRepr {
            state_dim: actor.shape.state_dim,
            devices: actor.shape.devices,
            channels: actor.shape.channels,
            actuators: actor.shape.actuators,
            sched: actor.shape.sched,
            control: actor.shape.control,
            cascade: actor.shape.cascade,
            trunk: NetRepr::from_net(&actor.trunk),
            sched_head: actor.sched_head.as_ref().map(NetRepr::from_net),
            ctrl_head: actor.ctrl_head.as_ref().map(NetRepr::from_net),
        }
    }

    fn to_actor(&self) -> Result<CodesignActor> {
        Ok(CodesignActor {
            shape: ActorShape {
                state_dim: self.state_dim,
                devices: self.devices,
                channels: self.channels,
                actuators: self.actuators,
                sched: self.sched,
                control: self.control,
                cascade: self.cascade,
            },
            trunk: self.trunk.to_net()?,
            sched_head: self.sched_head.as_ref().map(NetRepr::to_net).transpose()?,
            ctrl_head: self.ctrl_head.as_ref().map(NetRepr::to_net).transpose()?,
        })
    }
}

/// Replay-buffer cursor metadata (contents are not persisted).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BufferMeta {
    pub capacity: usize,
    pub len: usize,
    pub cursor: usize,
    pub total_inserted: u64,
}

impl BufferMeta {
    pub fn of(buffer: &ReplayBuffer) -> BufferMeta {
        BufferMeta {
            capacity: buffer.capacity(),
            len: buffer.len(),
            cursor: buffer.cursor(),
            total_inserted: buffer.total_inserted(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub tool_version: String,
    actor: ActorRepr,
    target_actor: ActorRepr,
    critic1: NetRepr,
    critic2: NetRepr,
    target_critic1: NetRepr,
    target_critic2: NetRepr,
    adam_actor: AdamState,
    adam_critic1: AdamState,
    adam_critic2: AdamState,
    pub buffer_meta: BufferMeta,
    pub train_rng: Option<RngCursor>,
    pub episodes_completed: usize,
}

impl AgentCheckpoint {
    pub fn capture(
        agent: &Td3Agent,
        config: &ExperimentConfig,
        buffer_meta: BufferMeta,
        train_rng: Option<RngCursor>,
        episodes_completed: usize,
    ) -> AgentCheckpoint {
        AgentCheckpoint {
            version: CHECKPOINT_FORMAT_VERSION,
            config: config.clone(),
            config_hash: config.hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            actor: ActorRepr::from_actor(&agent.actor),
            target_actor: ActorRepr::from_actor(&agent.target_actor),
            critic1: NetRepr::from_net(&agent.critic1),
            critic2: NetRepr::from_net(&agent.critic2),
            target_critic1: NetRepr::from_net(&agent.target_critic1),
            target_critic2: NetRepr::from_net(&agent.target_critic2),
            adam_actor: agent.adam_actor.clone(),
            adam_critic1: agent.adam_critic1.clone(),
            adam_critic2: agent.adam_critic2.clone(),
            buffer_meta,
            train_rng,
            episodes_completed,
        }
    }

    pub fn restore(&self) -> Result<Td3Agent> {
        if self.version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {} (expected {})",
                self.version, CHECKPOINT_FORMAT_VERSION
            )));
        }
        // Rebuild the skeleton from the config, then overwrite every
        // parameter tensor and optimizer state from the stored values.
        let mut agent = Td3Agent::new(&self.config, self.config.seed)?;
        agent.actor = self.actor.to_actor()?;
        agent.target_actor = self.target_actor.to_actor()?;
        agent.critic1 = self.critic1.to_net()?;
        agent.critic2 = self.critic2.to_net()?;
        agent.target_critic1 = self.target_critic1.to_net()?;
        agent.target_critic2 = self.target_critic2.to_net()?;
        agent.adam_actor = self.adam_actor.clone();
        agent.adam_critic1 = self.adam_critic1.clone();
        agent.adam_critic2 = self.adam_critic2.clone();
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<AgentCheckpoint> {
        let json = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }
}

/// Convenience wrapper for paths that only need the networks persisted.
pub fn save_agent(agent: &Td3Agent, config: &ExperimentConfig, path: &Path) -> Result<()> {
    AgentCheckpoint::capture(agent, config, BufferMeta::default(), None, 0).save(path)
}

/// Loads a checkpoint and restores the agent.
pub fn load_agent(path: &Path) -> Result<(Td3Agent, AgentCheckpoint)> {
    let ckpt = AgentCheckpoint::load(path)?;
    let agent = ckpt.restore()?;
    Ok((agent, ckpt))
}
