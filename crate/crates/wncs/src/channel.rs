//! Finite-state Markov block-fading channels, the short-packet decode-error
//! model, channel allocation, and packet-outcome sampling.
//!
//! Every (device, channel) link carries its own H-state Markov chain over a
//! shared ladder of power-gain levels. Gains hold for one slot and transition
//! independently between slots. Device columns are ordered sensors first,
//! then actuators.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};
use crate::plant::PacketOutcomes;

/// Gain ladder used throughout the experiments: ten decades from 1e-10 to 1e-1.
pub fn default_gain_levels() -> Vec<f64> {
    (0..10).map(|i| 10f64.powi(i - 10)).collect()
}

/// Per-link Markov chains over a shared set of power-gain levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    /// Strictly increasing, strictly positive gain levels (length H).
    pub gains: Vec<f64>,
    /// Row-stochastic H×H transition matrix per link, indexed
    /// `device * channels + channel` with devices sensor-major.
    pub transitions: Vec<DMatrix<f64>>,
    pub sensors: usize,
    pub actuators: usize,
    pub channels: usize,
}

impl ChannelModel {
    pub fn devices(&self) -> usize {
        self.sensors + self.actuators
    }

    pub fn states(&self) -> usize {
        self.gains.len()
    }

    pub fn transition(&self, device: usize, channel: usize) -> &DMatrix<f64> {
        &self.transitions[device * self.channels + channel]
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::parameter("gain ladder must be non-empty"));
        }
        if self.gains[0] <= 0.0 || self.gains.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parameter(
                "gain levels must be strictly positive and strictly increasing",
            ));
        }
        if self.channels == 0 || self.channels > self.devices() {
            return Err(Error::parameter(
                "channel count must satisfy 1 <= L <= M + N",
            ));
        }
        if self.transitions.len() != self.devices() * self.channels {
            return Err(Error::Dimension("one transition matrix per link required".into()));
        }
        let h = self.states();
        for t in &self.transitions {
            if t.shape() != (h, h) {
                return Err(Error::Dimension("transition matrices must be H×H".into()));
            }
            for row in t.row_iter() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 || row.iter().any(|p| *p < 0.0) {
                    return Err(Error::Numerical("transition rows must be stochastic".into()));
                }
            }
        }
        Ok(())
    }
}

/// Current power gain of every link. Mirrors the model's link layout and
/// caches gain values alongside the ladder indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid {
    state_idx: Vec<usize>,
    gain: Vec<f64>,
    pub sensors: usize,
    pub actuators: usize,
    pub channels: usize,
}

impl ChannelGrid {
    /// Uniformly random initial state per link (the episode reset rule).
    pub fn init<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> Self {
        let links = model.devices() * model.channels;
        let state_idx: Vec<usize> = (0..links).map(|_| rng.random_range(0..model.states())).collect();
        let gain = state_idx.iter().map(|&s| model.gains[s]).collect();
        ChannelGrid {
            state_idx,
            gain,
            sensors: model.sensors,
            actuators: model.actuators,
            channels: model.channels,
        }
    }

    pub fn devices(&self) -> usize {
        self.sensors + self.actuators
    }

    pub fn state(&self, device: usize, channel: usize) -> usize {
        self.state_idx[device * self.channels + channel]
    }

    pub fn gain(&self, device: usize, channel: usize) -> f64 {
        self.gain[device * self.channels + channel]
    }

    /// Gains of one device across all channels.
    pub fn device_gains(&self, device: usize) -> &[f64] {
        &self.gain[device * self.channels..(device + 1) * self.channels]
    }

    /// The CSI matrix, channels × devices.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.channels, self.devices(), |l, d| self.gain(d, l))
    }
}

/// Binary device-to-channel assignment, devices sensor-major in rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    d: DMatrix<u8>,
}

impl Allocation {
    pub fn empty(devices: usize, channels: usize) -> Self {
        Allocation {
            d: DMatrix::zeros(devices, channels),
        }
    }

    pub fn from_pairs(pairs: &[(usize, usize)], devices: usize, channels: usize) -> Result<Self> {
        let mut alloc = Allocation::empty(devices, channels);
        for &(dev, ch) in pairs {
            if dev >= devices || ch >= channels {
                return Err(Error::parameter(format!("pair ({dev}, {ch}) out of range")));
            }
            alloc.d[(dev, ch)] = 1;
        }
        if !validate_allocation(&alloc) {
            return Err(Error::contract("assignment violates one-device-per-channel"));
        }
        Ok(alloc)
    }

    pub fn devices(&self) -> usize {
        self.d.nrows()
    }

    pub fn channels(&self) -> usize {
        self.d.ncols()
    }

    pub fn entry(&self, device: usize, channel: usize) -> bool {
        self.d[(device, channel)] == 1
    }

    pub fn set(&mut self, device: usize, channel: usize) {
        self.d[(device, channel)] = 1;
    }

    pub fn channel_of(&self, device: usize) -> Option<usize> {
        (0..self.channels()).find(|&l| self.entry(device, l))
    }

    pub fn device_on(&self, channel: usize) -> Option<usize> {
        (0..self.devices()).find(|&dev| self.entry(dev, channel))
    }

    pub fn is_scheduled(&self, device: usize) -> bool {
        self.channel_of(device).is_some()
    }

    pub fn scheduled_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.devices())
            .filter_map(|dev| self.channel_of(dev).map(|l| (dev, l)))
            .collect()
    }

    /// Row of the assignment matrix as a binary vector over channels.
    pub fn device_row(&self, device: usize) -> DVector<f64> {
        DVector::from_fn(self.channels(), |l, _| f64::from(self.d[(device, l)]))
    }
}

/// True iff every device holds at most one channel and every channel serves
/// at most one device.
pub fn validate_allocation(alloc: &Allocation) -> bool {
    let rows_ok = (0..alloc.devices())
        .all(|dev| (0..alloc.channels()).map(|l| alloc.d[(dev, l)] as u32).sum::<u32>() <= 1);
    let cols_ok = (0..alloc.channels())
        .all(|l| (0..alloc.devices()).map(|dev| alloc.d[(dev, l)] as u32).sum::<u32>() <= 1);
    rows_ok && cols_ok
}

/// Transmission budget of the short-packet links.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkBudget {
    /// Transmit power in dBm.
    pub p_max_dbm: f64,
    /// Receiver noise power in dBm.
    pub noise_dbm: f64,
    /// Payload bits per packet.
    pub bits: u32,
    /// Packet length in symbols.
    pub blocklength: u32,
}

impl Default for LinkBudget {
    /// 23 dBm transmit power, -60 dBm noise, code rate 2 over 200 symbols.
    fn default() -> Self {
        LinkBudget {
            p_max_dbm: 23.0,
            noise_dbm: -60.0,
            bits: 400,
            blocklength: 200,
        }
    }
}

impl LinkBudget {
    pub fn code_rate(&self) -> f64 {
        f64::from(self.bits) / f64::from(self.blocklength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits < 1 || self.blocklength < 1 {
            return Err(Error::parameter("payload and blocklength must be at least 1"));
        }
        Ok(())
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Generates per-link Markov chains with rows normalized from i.i.d.
/// uniform(0,1) draws; such chains are irreducible and aperiodic almost
/// surely. Reproducible from the seed.
pub fn generate_channel_model(
    sensors: usize,
    actuators: usize,
    channels: usize,
    gain_levels: &[f64],
    rng_seed: u64,
) -> Result<ChannelModel> {
    let h = gain_levels.len();
    if h == 0 {
        return Err(Error::parameter("at least one gain level required"));
    }
    let mut rng = crate::rng::stream_rng(rng_seed, 0);
    let links = (sensors + actuators) * channels;
    let mut transitions = Vec::with_capacity(links);
    for _ in 0..links {
        let mut t = DMatrix::from_fn(h, h, |_, _| rng.random_range(0.0..1.0));
        for mut row in t.row_iter_mut() {
            let sum: f64 = row.iter().sum();
            row /= sum;
        }
        transitions.push(t);
    }
    let model = ChannelModel {
        gains: gain_levels.to_vec(),
        transitions,
        sensors,
        actuators,
        channels,
    };
    model.validate()?;
    Ok(model)
}

/// Advances every link one slot according to its own chain.
pub fn step_channels<R: Rng + ?Sized>(
    model: &ChannelModel,
    grid: &ChannelGrid,
    rng: &mut R,
) -> ChannelGrid {
    let mut next = grid.clone();
    for dev in 0..model.devices() {
        for ch in 0..model.channels {
            let link = dev * model.channels + ch;
            let row = model.transitions[link].row(grid.state_idx[link]);
            let u: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut state = model.states() - 1;
            for (j, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = j;
                    break;
                }
            }
            next.state_idx[link] = state;
            next.gain[link] = model.gains[state];
        }
    }
    next
}

/// Receiving SNR of one device: `(dᵀ g) · P_max / σ²` with powers converted
/// from dBm to linear milliwatts. Zero when the device holds no channel.
pub fn snr(allocation_row: &DVector<f64>, gains: &DVector<f64>, budget: &LinkBudget) -> f64 {
    allocation_row.dot(gains) * dbm_to_mw(budget.p_max_dbm) / dbm_to_mw(budget.noise_dbm)
}

/// Short-packet decoding failure probability.
///
/// `ε(γ) = Q((C(γ) - b/l) / sqrt(V(γ)/l))` with capacity `C(γ) = log2(1+γ)`
/// and dispersion `V(γ) = (1 - (1+γ)⁻²)(log2 e)²`. At `γ = 0` the dispersion
/// vanishes while the capacity sits below the code rate, so the probability
/// is pinned to 1.
pub fn decode_error_prob(gamma: f64, budget: &LinkBudget) -> Result<f64> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::parameter(format!("SNR must be finite and non-negative, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let rate = budget.code_rate();
    let capacity = (1.0 + gamma).log2();
    let log2_e = std::f64::consts::LOG2_E;
    let dispersion = (1.0 - (1.0 + gamma).powi(-2)) * log2_e * log2_e;
    let scaled = dispersion / f64::from(budget.blocklength);
    if scaled < 1e-300 {
        // Vanishing dispersion: decoding is all-or-nothing at the capacity.
        return Ok(if capacity < rate { 1.0 } else { 0.0 });
    }
    let arg = (capacity - rate) / scaled.sqrt();
    Ok(q_function(arg).clamp(0.0, 1.0))
}

/// Standard Gaussian tail probability via the complementary error function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Draws this slot's packet outcomes. One uniform draw is consumed per
/// device whether or not it is scheduled, so the outcome stream stays
/// aligned across policies under common random numbers; unscheduled devices
/// always report failure.
pub fn sample_outcomes<R: Rng + ?Sized>(
    alloc: &Allocation,
    grid: &ChannelGrid,
    budget: &LinkBudget,
    rng: &mut R,
) -> Result<PacketOutcomes> {
    if !validate_allocation(alloc) {
        return Err(Error::contract("invalid allocation passed to outcome sampling"));
    }
    if alloc.devices() != grid.devices() || alloc.channels() != grid.channels {
        return Err(Error::Dimension("allocation and grid shapes differ".into()));
    }
    let mut flags = Vec::with_capacity(grid.devices());
    for dev in 0..grid.devices() {
        let u: f64 = rng.random_range(0.0..1.0);
        let success = match alloc.channel_of(dev) {
            Some(ch) => {
                let gamma = grid.gain(dev, ch) * dbm_to_mw(budget.p_max_dbm) / dbm_to_mw(budget.noise_dbm);
                let eps = decode_error_prob(gamma, budget)?;
                u < 1.0 - eps
            }
            None => false,
        };
        flags.push(success);
    }
    let lambda = flags.split_off(grid.sensors);
    Ok(PacketOutcomes { psi: flags, lambda })
}

/// Exact number of nonempty valid assignments of L channels to M+N devices:
/// `Σ_{l=1..L} C(L,l) · (M+N)!/(M+N-l)!`.
pub fn count_discrete_actions(sensors: usize, actuators: usize, channels: usize) -> Result<BigUint> {
    let devices = sensors + actuators;
    if channels == 0 || channels > devices {
        return Err(Error::parameter("channel count must satisfy 1 <= L <= M + N"));
    }
    let mut total = BigUint::from(0u32);
    for l in 1..=channels {
        let choose = binomial(channels, l);
        let mut falling = BigUint::from(1u32);
        for i in 0..l {
            falling *= BigUint::from((devices - i) as u64);
        }
        total += choose * falling;
    }
    Ok(total)
}

fn binomial(n: usize, k: usize) -> BigUint {
    let mut result = BigUint::from(1u32);
    for i in 0..k {
        result = result * BigUint::from((n - i) as u64) / BigUint::from((i + 1) as u64);
    }
    result
}
