//! Evaluation pipelines: frozen-policy rollouts under common random
//! numbers, per-component cost reports with confidence intervals, and the
//! benchmark suite over (scheduler, controller) pairs.
//!
//! Common random numbers: environment noise streams are keyed by
//! `(seed, episode)` only, so every policy pair sees identical channel
//! fades, plant noise, measurement noise and packet-outcome draws. Episode
//! rollouts run in parallel; results are reduced in episode order, so
//! reports do not depend on thread scheduling.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ControllerKind, ExperimentConfig, LossRateMode};
use crate::drl::Td3Agent;
use crate::env::WncsEnv;
use crate::error::{Error, Result};
use crate::lqr::{lqr_control, riccati_modified, riccati_standard, LqrGain};
use crate::rng::{episode_rng, stream};
use crate::scheduling::{Scheduler, SchedulerKind};
use crate::world::World;

/// Scheduling role of an evaluation pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerSpec {
    Fixed(SchedulerKind),
    /// The agent's scheduling head drives the allocation.
    Agent,
}

impl SchedulerSpec {
    pub fn name(&self) -> String {
        match self {
            SchedulerSpec::Fixed(kind) => kind.name().to_string(),
            SchedulerSpec::Agent => "agent".to_string(),
        }
    }
}

/// Control role of an evaluation pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerSpec {
    Zero,
    StandardLqr,
    ModifiedLqr,
    /// The agent's control head drives the input.
    Agent,
}

impl ControllerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::Zero => "zero",
            ControllerSpec::StandardLqr => "standard-lqr",
            ControllerSpec::ModifiedLqr => "modified-lqr",
            ControllerSpec::Agent => "agent",
        }
    }

    pub fn from_kind(kind: ControllerKind) -> ControllerSpec {
        match kind {
            ControllerKind::Zero => ControllerSpec::Zero,
            ControllerKind::StandardLqr => ControllerSpec::StandardLqr,
            ControllerKind::ModifiedLqr => ControllerSpec::ModifiedLqr,
            ControllerKind::Agent => ControllerSpec::Agent,
        }
    }
}

/// Averaged evaluation results. Table-facing numbers are per-episode sums
/// averaged over episodes; per-slot means are the same data divided by the
/// slot count, carried alongside so either reading of "average cost" is
/// available explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheduler: String,
    pub controller: String,
    pub episodes: usize,
    pub steps: usize,
    pub seed: u64,
    pub discount: f64,

    /// Mean per-episode sum of Tr(Q P(t)).
    pub est_cost: f64,
    /// Mean per-episode sum of control effort.
    pub ctrl_cost: f64,
    /// Mean per-episode sum of estimated-state deviation.
    pub state_cost: f64,
    /// Mean per-episode undiscounted total.
    pub overall: f64,
    /// 95% confidence half-width of `overall`.
    pub ci_halfwidth: f64,
    /// Mean per-episode discounted total.
    pub discounted_overall: f64,

    pub est_cost_per_slot: f64,
    pub ctrl_cost_per_slot: f64,
    pub state_cost_per_slot: f64,
    pub overall_per_slot: f64,

    pub per_episode_overall: Vec<f64>,
    pub per_episode_discounted: Vec<f64>,

    /// The solved feedback gain when an LQR controller was evaluated, so
    /// the experiment file fully determines the control law.
    pub gain: Option<GainRepr>,

    pub config_hash: String,
    pub tool_version: String,
}

/// Serialized form of a converged LQR gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRepr {
    pub variant: String,
    pub iterations_used: usize,
    pub k_gain: crate::world::MatrixRepr,
    pub s_inf: crate::world::MatrixRepr,
}

impl GainRepr {
    fn of(gain: &LqrGain) -> GainRepr {
        GainRepr {
            variant: match gain.variant {
                crate::lqr::LqrVariant::Standard => "standard".to_string(),
                crate::lqr::LqrVariant::Modified => "modified".to_string(),
            },
            iterations_used: gain.iterations_used,
            k_gain: crate::world::MatrixRepr::from_matrix(&gain.k_gain),
            s_inf: crate::world::MatrixRepr::from_matrix(&gain.s_inf),
        }
    }
}

struct EpisodeTotals {
    est: f64,
    ctrl: f64,
    state: f64,
    overall: f64,
    discounted: f64,
}

/// Evaluates one (scheduler, controller) pairing with exploration disabled.
/// `agent` must be provided when either role is [`SchedulerSpec::Agent`] /
/// [`ControllerSpec::Agent`]. The loss-aware controller estimates its loss
/// rates first, under the paired scheduler; a diverging gain solve surfaces
/// as [`Error::NoConvergence`].
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    world: &Arc<World>,
    config: &ExperimentConfig,
    scheduler_spec: SchedulerSpec,
    controller_spec: ControllerSpec,
    agent: Option<&Td3Agent>,
    episodes: usize,
    steps: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 || steps == 0 {
        return Err(Error::parameter("evaluation needs at least one episode and one step"));
    }
    let agent_needed = matches!(scheduler_spec, SchedulerSpec::Agent)
        || matches!(controller_spec, ControllerSpec::Agent);
    if agent_needed && agent.is_none() {
        return Err(Error::contract("an agent checkpoint is required for agent-driven roles"));
    }

    let gain: Option<LqrGain> = match controller_spec {
        ControllerSpec::StandardLqr => Some(riccati_standard(
            &world.sys,
            config.discount,
            crate::lqr::DEFAULT_TOL,
            crate::lqr::DEFAULT_MAX_ITER,
        )?),
        ControllerSpec::ModifiedLqr => {
            let loss = match scheduler_spec {
                SchedulerSpec::Fixed(kind) => crate::lqr::estimate_loss_rates(
                    world,
                    kind,
                    config.loss_warmup_episodes,
                    steps,
                    config.loss_rate_mode,
                    seed ^ 0x517c_c1b7_2722_0a95,
                )?,
                SchedulerSpec::Agent => estimate_loss_rates_with_agent(
                    world,
                    agent.expect("checked above"),
                    config,
                    config.loss_warmup_episodes,
                    steps,
                    config.loss_rate_mode,
                    seed ^ 0x517c_c1b7_2722_0a95,
                )?,
            };
            Some(riccati_modified(
                &world.sys,
                config.discount,
                &loss,
                crate::lqr::DEFAULT_TOL,
                crate::lqr::DEFAULT_MAX_ITER,
            )?)
        }
        _ => None,
    };

    let totals: Vec<EpisodeTotals> = (0..episodes)
        .into_par_iter()
        .map(|episode| {
            run_episode(
                world,
                config,
                scheduler_spec,
                controller_spec,
                agent,
                gain.as_ref(),
                steps,
                seed,
                episode as u64,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let n = episodes as f64;
    let mean = |f: fn(&EpisodeTotals) -> f64| totals.iter().map(f).sum::<f64>() / n;
    let overall_mean = mean(|t| t.overall);
    let variance = totals
        .iter()
        .map(|t| (t.overall - overall_mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let ci = if episodes > 1 {
        1.96 * (variance / n).sqrt()
    } else {
        0.0
    };
    let slots = steps as f64;

    Ok(EvalReport {
        scheduler: scheduler_spec.name(),
        controller: controller_spec.name().to_string(),
        episodes,
        steps,
        seed,
        discount: config.discount,
        est_cost: mean(|t| t.est),
        ctrl_cost: mean(|t| t.ctrl),
        state_cost: mean(|t| t.state),
        overall: overall_mean,
        ci_halfwidth: ci,
        discounted_overall: mean(|t| t.discounted),
        est_cost_per_slot: mean(|t| t.est) / slots,
        ctrl_cost_per_slot: mean(|t| t.ctrl) / slots,
        state_cost_per_slot: mean(|t| t.state) / slots,
        overall_per_slot: overall_mean / slots,
        per_episode_overall: totals.iter().map(|t| t.overall).collect(),
        per_episode_discounted: totals.iter().map(|t| t.discounted).collect(),
        gain: gain.as_ref().map(GainRepr::of),
        config_hash: config.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_episode(
    world: &Arc<World>,
    config: &ExperimentConfig,
    scheduler_spec: SchedulerSpec,
    controller_spec: ControllerSpec,
    agent: Option<&Td3Agent>,
    gain: Option<&LqrGain>,
    steps: usize,
    seed: u64,
    episode: u64,
) -> Result<EpisodeTotals> {
    let (mut env, mut state) = WncsEnv::reset(Arc::clone(world), seed, episode)?;
    let mut scheduler = match scheduler_spec {
        SchedulerSpec::Fixed(kind) => Some(Scheduler::new(
            kind,
            world.sensors(),
            world.actuators(),
            world.channels(),
        )),
        SchedulerSpec::Agent => None,
    };
    let mut policy_rng = episode_rng(seed, episode, stream::POLICY);
    let gain_lo = *world.channel.gains.first().expect("non-empty ladder");
    let gain_hi = *world.channel.gains.last().expect("non-empty ladder");

    let mut totals = EpisodeTotals {
        est: 0.0,
        ctrl: 0.0,
        state: 0.0,
        overall: 0.0,
        discounted: 0.0,
    };
    let mut disc = 1.0;

    for _ in 0..steps {
        let selection = if let Some(agent) = agent {
            let s_flat = state.flatten(config.full_covariance_state, gain_lo, gain_hi);
            Some(agent.select_action(&s_flat, &state.grid, &mut policy_rng, false)?)
        } else {
            None
        };

        let alloc = match (&mut scheduler, &selection) {
            (Some(sched), _) => sched.allocate(&state.grid, &mut policy_rng),
            (None, Some(sel)) => sel
                .allocation
                .clone()
                .ok_or_else(|| Error::contract("agent has no scheduling head"))?,
            (None, None) => unreachable!("agent presence checked in evaluate"),
        };
        let u_tx = match controller_spec {
            ControllerSpec::Zero => DVector::zeros(world.actuators()),
            ControllerSpec::StandardLqr | ControllerSpec::ModifiedLqr => {
                lqr_control(gain.expect("gain solved"), &state.x_hat)
            }
            ControllerSpec::Agent => selection
                .as_ref()
                .and_then(|s| s.u_tx.clone())
                .ok_or_else(|| Error::contract("agent has no control head"))?,
        };

        let step = env.step(&alloc, &u_tx)?;
        if let Some(sched) = &mut scheduler {
            sched.observe(&step.outcomes);
        }
        totals.est += step.cost.est_cost;
        totals.ctrl += step.cost.ctrl_cost;
        totals.state += step.cost.state_cost;
        totals.overall += step.cost.total;
        totals.discounted += disc * step.cost.total;
        disc *= config.discount;
        state = step.state;
    }
    Ok(totals)
}

/// Loss-rate estimation mirroring [`crate::lqr::estimate_loss_rates`] with
/// the agent's scheduling head in place of a benchmark policy (zero control
/// input, exploration off).
#[allow(clippy::too_many_arguments)]
pub fn estimate_loss_rates_with_agent(
    world: &Arc<World>,
    agent: &Td3Agent,
    config: &ExperimentConfig,
    warmup_episodes: usize,
    steps: usize,
    mode: LossRateMode,
    seed: u64,
) -> Result<crate::lqr::LossRateMatrix> {
    if warmup_episodes == 0 || steps == 0 {
        return Err(Error::parameter("loss estimation needs at least one episode and one step"));
    }
    let n = world.actuators();
    let m = world.sensors();
    let zero = DVector::zeros(n);
    let gain_lo = *world.channel.gains.first().expect("non-empty ladder");
    let gain_hi = *world.channel.gains.last().expect("non-empty ladder");
    let mut losses = vec![0u64; n];
    let mut samples = vec![0u64; n];
    for episode in 0..warmup_episodes {
        let (mut env, mut state) = WncsEnv::reset(Arc::clone(world), seed, episode as u64)?;
        let mut rng = episode_rng(seed, episode as u64, stream::POLICY);
        for _ in 0..steps {
            let s_flat = state.flatten(config.full_covariance_state, gain_lo, gain_hi);
            let sel = agent.select_action(&s_flat, &state.grid, &mut rng, false)?;
            let alloc = sel
                .allocation
                .ok_or_else(|| Error::contract("agent has no scheduling head"))?;
            let step = env.step(&alloc, &zero)?;
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
    crate::lqr::LossRateMatrix::new(rates)
}

/// One row of the benchmark table: either a report, or a note explaining
/// why the pairing produced none (a diverging loss-aware gain solve is
/// reported, not aborted on).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchEntry {
    pub scheduler: String,
    pub controller: String,
    pub report: Option<EvalReport>,
    pub note: Option<String>,
}

/// Evaluates every configured pairing under common random numbers.
pub fn run_benchmark_suite(
    world: &Arc<World>,
    config: &ExperimentConfig,
    pairs: &[(SchedulerSpec, ControllerSpec)],
    agent: Option<&Td3Agent>,
) -> Result<Vec<BenchEntry>> {
    let mut entries = Vec::with_capacity(pairs.len());
    for &(sched, ctrl) in pairs {
        match evaluate(
            world,
            config,
            sched,
            ctrl,
            agent,
            config.eval_episodes,
            config.eval_steps,
            config.seed,
        ) {
            Ok(report) => entries.push(BenchEntry {
                scheduler: sched.name(),
                controller: ctrl.name().to_string(),
                report: Some(report),
                note: None,
            }),
            Err(Error::NoConvergence { residual, iterations }) => entries.push(BenchEntry {
                scheduler: sched.name(),
                controller: ctrl.name().to_string(),
                report: None,
                note: Some(format!(
                    "not converge (residual {residual:.3e} after {iterations} iterations)"
                )),
            }),
            Err(other) => return Err(other),
        }
    }
    Ok(entries)
}

/// The default benchmark grid: every fixed scheduler crossed with the zero,
/// perfect-communication and loss-aware controllers.
pub fn default_benchmark_pairs() -> Vec<(SchedulerSpec, ControllerSpec)> {
    let mut pairs = Vec::new();
    for kind in SchedulerKind::ALL {
        for ctrl in [
            ControllerSpec::ModifiedLqr,
            ControllerSpec::StandardLqr,
            ControllerSpec::Zero,
        ] {
            pairs.push((SchedulerSpec::Fixed(kind), ctrl));
        }
    }
    pairs
}

/// Writes the benchmark table: one row per pairing with the four cost
/// columns, the half-width, and the run coordinates.
pub fn write_bench_csv(entries: &[BenchEntry], path: &Path) -> Result<()> {
    let mut out =
        String::from("scheduler,controller,est_cost,ctrl_cost,state_cost,overall,ci_halfwidth,episodes,steps,seed\n");
    for e in entries {
        match &e.report {
            Some(r) => out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.scheduler,
                e.controller,
                r.est_cost,
                r.ctrl_cost,
                r.state_cost,
                r.overall,
                r.ci_halfwidth,
                r.episodes,
                r.steps,
                r.seed
            )),
            None => out.push_str(&format!(
                "{},{},not-converge,not-converge,not-converge,not-converge,not-converge,,,\n",
                e.scheduler, e.controller
            )),
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// JSON sidecar with the full reports, notes and provenance.
pub fn write_bench_sidecar(
    entries: &[BenchEntry],
    config: &ExperimentConfig,
    path: &Path,
) -> Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        config_hash: String,
        tool_version: &'a str,
        config: &'a ExperimentConfig,
        entries: &'a [BenchEntry],
    }
    let sidecar = Sidecar {
        config_hash: config.hash(),
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        entries,
    };
    std::fs::write(path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}
