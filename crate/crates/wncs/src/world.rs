//! Reproducible world files: the plant, the channel model and the link
//! budget serialized together in a versioned, human-diffable format so an
//! experiment replays bit-for-bit.
//!
//! Matrices are stored row-major with explicit dimensions. Floating-point
//! values round-trip exactly through the JSON encoder.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, LinkBudget};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::plant::SystemMatrices;

pub const WORLD_FORMAT_VERSION: u32 = 1;

/// A fully specified environment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub sys: SystemMatrices,
    pub channel: ChannelModel,
    pub budget: LinkBudget,
    /// Seed the world was generated from (provenance only).
    pub seed: u64,
}

impl World {
    /// Generates plant and channels from one seed. The channel seed is
    /// decorrelated from the plant seed so neighbouring world seeds do not
    /// share components.
    pub fn generate(config: &ExperimentConfig) -> Result<World> {
        config.validate()?;
        let sys = crate::plant::generate_system(
            config.state_dim,
            config.sensors,
            config.actuators,
            1.0,
            1.1,
            config.seed,
        )?;
        let channel = crate::channel::generate_channel_model(
            config.sensors,
            config.actuators,
            config.channels,
            &config.gain_levels,
            config.seed ^ 0x9e37_79b9_7f4a_7c15,
        )?;
        Ok(World {
            sys,
            channel,
            budget: config.link,
            seed: config.seed,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.sys.state_dim()
    }

    pub fn sensors(&self) -> usize {
        self.channel.sensors
    }

    pub fn actuators(&self) -> usize {
        self.channel.actuators
    }

    pub fn channels(&self) -> usize {
        self.channel.channels
    }

    pub fn devices(&self) -> usize {
        self.channel.devices()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let repr = WorldRepr::from(self);
        let json = serde_json::to_string_pretty(&repr)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<World> {
        let json = std::fs::read_to_string(path)?;
        let repr: WorldRepr = serde_json::from_str(&json)?;
        repr.into_world()
    }
}

/// Row-major matrix with explicit dimensions, the on-disk form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixRepr {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "matrix payload has {} entries for a {}×{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WorldRepr {
    version: u32,
    seed: u64,
    state_dim: usize,
    sensors: usize,
    actuators: usize,
    channels: usize,
    budget: LinkBudget,
    a: MatrixRepr,
    b: MatrixRepr,
    c: MatrixRepr,
    w: MatrixRepr,
    v: MatrixRepr,
    q: MatrixRepr,
    r: MatrixRepr,
    gain_levels: Vec<f64>,
    /// One H×H row-stochastic matrix per link, device-major.
    transitions: Vec<MatrixRepr>,
}

impl From<&World> for WorldRepr {
    fn from(world: &World) -> Self {
        WorldRepr {
            version: WORLD_FORMAT_VERSION,
            seed: world.seed,
            state_dim: world.state_dim(),
            sensors: world.sensors(),
            actuators: world.actuators(),
            channels: world.channels(),
            budget: world.budget,
            a: MatrixRepr::from_matrix(&world.sys.a),
            b: MatrixRepr::from_matrix(&world.sys.b),
            c: MatrixRepr::from_matrix(&world.sys.c),
            w: MatrixRepr::from_matrix(&world.sys.w),
            v: MatrixRepr::from_matrix(&world.sys.v),
            q: MatrixRepr::from_matrix(&world.sys.q),
            r: MatrixRepr::from_matrix(&world.sys.r),
            gain_levels: world.channel.gains.clone(),
            transitions: world.channel.transitions.iter().map(MatrixRepr::from_matrix).collect(),
        }
    }
}

impl WorldRepr {
    fn into_world(self) -> Result<World> {
        if self.version != WORLD_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported world file version {} (expected {})",
                self.version, WORLD_FORMAT_VERSION
            )));
        }
        let sys = SystemMatrices {
            a: self.a.to_matrix()?,
            b: self.b.to_matrix()?,
            c: self.c.to_matrix()?,
            w: self.w.to_matrix()?,
            v: self.v.to_matrix()?,
            q: self.q.to_matrix()?,
            r: self.r.to_matrix()?,
        };
        sys.validate()?;
        let channel = ChannelModel {
            gains: self.gain_levels,
            transitions: self
                .transitions
                .iter()
                .map(MatrixRepr::to_matrix)
                .collect::<Result<Vec<_>>>()?,
            sensors: self.sensors,
            actuators: self.actuators,
            channels: self.channels,
        };
        channel.validate()?;
        Ok(World {
            sys,
            channel,
            budget: self.budget,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            state_dim: 3,
            sensors: 3,
            actuators: 3,
            channels: 3,
            seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = World::generate(&small_config()).unwrap();
        let b = World::generate(&small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn save_load_round_trips_bit_exactly() {
        let world = World::generate(&small_config()).unwrap();
        let dir = std::env::temp_dir().join("wncs-world-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("world.json");
        world.save(&path).unwrap();
        let loaded = World::load(&path).unwrap();
        assert_eq!(world, loaded);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let world = World::generate(&small_config()).unwrap();
        let mut repr = WorldRepr::from(&world);
        repr.version = 99;
        let json = serde_json::to_string(&repr).unwrap();
        let parsed: WorldRepr = serde_json::from_str(&json).unwrap();
        assert!(parsed.into_world().is_err());
    }

    #[test]
    fn matrix_repr_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let repr = MatrixRepr::from_matrix(&m);
        assert_eq!(repr.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(repr.to_matrix().unwrap(), m);
    }
}
