//! The codesign actor: a shared trunk feeding a scheduling head and/or a
//! control head. In the cascaded configuration the scheduling output is
//! concatenated into the control branch input, so control decisions are
//! computed in full view of the communication decision.
//!
//! Output layout is always the scheduling block first (sigmoid range) and
//! the control block second (unbounded).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, ForwardCache, NetGrads};

/// What the scheduling block of the action means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedHead {
    /// No scheduling output; an external policy assigns channels.
    None,
    /// A weight per (device, channel) pair, embedded by max-weight matching
    /// against the CSI.
    Weights,
    /// One priority score per device, embedded by the greedy priority map.
    Priority,
}

/// Architecture description, fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActorShape {
    pub state_dim: usize,
    pub devices: usize,
    pub channels: usize,
    pub actuators: usize,
    pub sched: SchedHead,
    pub control: bool,
    pub cascade: bool,
}

impl ActorShape {
    pub fn sched_dim(&self) -> usize {
        match self.sched {
            SchedHead::None => 0,
            SchedHead::Weights => self.devices * self.channels,
            SchedHead::Priority => self.devices,
        }
    }

    pub fn ctrl_dim(&self) -> usize {
        if self.control {
            self.actuators
        } else {
            0
        }
    }

    pub fn action_dim(&self) -> usize {
        self.sched_dim() + self.ctrl_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodesignActor {
    pub shape: ActorShape,
    pub trunk: DenseNet,
    pub sched_head: Option<DenseNet>,
    pub ctrl_head: Option<DenseNet>,
}

/// Intermediate values of one actor forward pass.
pub struct ActorCache {
    trunk: ForwardCache,
    trunk_out: DMatrix<f64>,
    sched: Option<(ForwardCache, DMatrix<f64>)>,
    ctrl: Option<ForwardCache>,
    batch: usize,
}

/// Parameter gradients mirroring the actor structure.
#[derive(Debug, Clone)]
pub struct ActorGrads {
    pub trunk: NetGrads,
    pub sched: Option<NetGrads>,
    pub ctrl: Option<NetGrads>,
}

impl ActorGrads {
    pub fn flatten(&self) -> DVector<f64> {
        let mut out: Vec<f64> = self.trunk.flatten().iter().copied().collect();
        if let Some(s) = &self.sched {
            out.extend(s.flatten().iter());
        }
        if let Some(c) = &self.ctrl {
            out.extend(c.flatten().iter());
        }
        DVector::from_vec(out)
    }
}

impl CodesignActor {
    /// Splits the hidden ladder between a shared trunk and per-branch
    /// hidden layers: with widths `[h1, ..., hk]` the trunk carries
    /// `h1..h(k-1)` and each head gets one hidden layer of width `hk`.
    /// Scheduling outputs are sigmoid-bounded; control outputs are linear.
    pub fn new<R: Rng + ?Sized>(
        shape: ActorShape,
        hidden: &[usize],
        layer_norm: bool,
        eps_z: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if shape.sched_dim() == 0 && shape.ctrl_dim() == 0 {
            return Err(Error::parameter("actor needs at least one output head"));
        }
        if hidden.len() < 2 {
            return Err(Error::parameter("actor needs at least two hidden layer widths"));
        }
        if shape.cascade && (shape.sched_dim() == 0 || shape.ctrl_dim() == 0) {
            return Err(Error::parameter("the cascade requires both heads"));
        }

        let mut trunk_dims = vec![shape.state_dim];
        trunk_dims.extend_from_slice(&hidden[..hidden.len() - 1]);
        let branch_hidden = hidden[hidden.len() - 1];
        let trunk = DenseNet::hidden_stack(&trunk_dims, Activation::Relu, layer_norm, eps_z, rng)?;
        let trunk_out = *trunk_dims.last().expect("non-empty");

        let sched_head = if shape.sched_dim() > 0 {
            Some(DenseNet::new(
                &[trunk_out, branch_hidden, shape.sched_dim()],
                Activation::Relu,
                Activation::Sigmoid,
                layer_norm,
                eps_z,
                rng,
            )?)
        } else {
            None
        };
        let ctrl_head = if shape.ctrl_dim() > 0 {
            let in_dim = trunk_out + if shape.cascade { shape.sched_dim() } else { 0 };
            Some(DenseNet::new(
                &[in_dim, branch_hidden, shape.ctrl_dim()],
                Activation::Relu,
                Activation::Identity,
                layer_norm,
                eps_z,
                rng,
            )?)
        } else {
            None
        };

        Ok(CodesignActor {
            shape,
            trunk,
            sched_head,
            ctrl_head,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.shape.action_dim()
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count()
            + self.sched_head.as_ref().map_or(0, DenseNet::param_count)
            + self.ctrl_head.as_ref().map_or(0, DenseNet::param_count)
    }

    /// Deterministic forward pass; rows are the scheduling block followed by
    /// the control block, columns are batch samples.
    pub fn forward(&self, state: &DMatrix<f64>) -> Result<(DMatrix<f64>, ActorCache)> {
        let batch = state.ncols();
        let (trunk_out, trunk_cache) = self.trunk.forward(state)?;

        let sched = match &self.sched_head {
            Some(head) => {
                let (out, cache) = head.forward(&trunk_out)?;
                Some((cache, out))
            }
            None => None,
        };

        let ctrl = match &self.ctrl_head {
            Some(head) => {
                let input = if self.shape.cascade {
                    let sched_out = &sched.as_ref().expect("cascade implies sched head").1;
                    stack_rows(&trunk_out, sched_out)
                } else {
                    trunk_out.clone()
                };
                let (out, cache) = head.forward(&input)?;
                Some((cache, out))
            }
            None => None,
        };

        let output = match (&sched, &ctrl) {
            (Some((_, s)), Some((_, c))) => stack_rows(s, c),
            (Some((_, s)), None) => s.clone(),
            (None, Some((_, c))) => c.clone(),
            (None, None) => unreachable!("at least one head exists"),
        };

        Ok((
            output,
            ActorCache {
                trunk: trunk_cache,
                trunk_out,
                sched: sched.map(|(cache, out)| (cache, out)),
                ctrl: ctrl.map(|(cache, _)| cache),
                batch,
            },
        ))
    }

    /// Reverse-mode pass through heads, cascade and trunk. `grad_output`
    /// follows the forward output layout.
    pub fn backward(
        &self,
        cache: &ActorCache,
        grad_output: &DMatrix<f64>,
    ) -> Result<(ActorGrads, DMatrix<f64>)> {
        let sched_dim = self.shape.sched_dim();
        let ctrl_dim = self.shape.ctrl_dim();
        if grad_output.nrows() != sched_dim + ctrl_dim || grad_output.ncols() != cache.batch {
            return Err(Error::contract("actor grad_output shape mismatch"));
        }
        let trunk_width = cache.trunk_out.nrows();

        let mut g_trunk = DMatrix::zeros(trunk_width, cache.batch);
        let mut g_sched_total = if sched_dim > 0 {
            grad_output.rows(0, sched_dim).into_owned()
        } else {
            DMatrix::zeros(0, cache.batch)
        };

        let ctrl_grads = match (&self.ctrl_head, &cache.ctrl) {
            (Some(head), Some(ctrl_cache)) => {
                let g_ctrl = grad_output.rows(sched_dim, ctrl_dim).into_owned();
                let (grads, g_in) = head.backward(ctrl_cache, &g_ctrl)?;
                g_trunk += g_in.rows(0, trunk_width);
                if self.shape.cascade {
                    g_sched_total += g_in.rows(trunk_width, sched_dim);
                }
                Some(grads)
            }
            _ => None,
        };

        let sched_grads = match (&self.sched_head, &cache.sched) {
            (Some(head), Some((sched_cache, _))) => {
                let (grads, g_in) = head.backward(sched_cache, &g_sched_total)?;
                g_trunk += g_in;
                Some(grads)
            }
            _ => None,
        };

        let (trunk_grads, g_input) = self.trunk.backward(&cache.trunk, &g_trunk)?;

        Ok((
            ActorGrads {
                trunk: trunk_grads,
                sched: sched_grads,
                ctrl: ctrl_grads,
            },
            g_input,
        ))
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut out: Vec<f64> = self.trunk.flatten().iter().copied().collect();
        if let Some(s) = &self.sched_head {
            out.extend(s.flatten().iter());
        }
        if let Some(c) = &self.ctrl_head {
            out.extend(c.flatten().iter());
        }
        DVector::from_vec(out)
    }

    pub fn assign_from_flat(&mut self, flat: &DVector<f64>) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension("actor flat parameter length mismatch".into()));
        }
        let mut offset = 0;
        let take = |net: &mut DenseNet, flat: &DVector<f64>, offset: &mut usize| -> Result<()> {
            let n = net.param_count();
            let slice = DVector::from_iterator(n, flat.iter().skip(*offset).take(n).copied());
            net.assign_from_flat(&slice)?;
            *offset += n;
            Ok(())
        };
        take(&mut self.trunk, flat, &mut offset)?;
        if let Some(s) = &mut self.sched_head {
            take(s, flat, &mut offset)?;
        }
        if let Some(c) = &mut self.ctrl_head {
            take(c, flat, &mut offset)?;
        }
        Ok(())
    }
}

/// Vertical concatenation (rows of `a` above rows of `b`).
pub fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}
