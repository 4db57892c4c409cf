//! Channel scheduling: exact max-weight bipartite matching and the
//! benchmark policies (round-robin, persistent, AoI-greedy, CSI-greedy,
//! random, priority mapping).
//!
//! All tie-breaking is deterministic: lowest device index first, then lowest
//! channel index, so repeated runs with equal inputs produce identical
//! allocations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::{Allocation, ChannelGrid};
use crate::error::{Error, Result};
use crate::plant::PacketOutcomes;

/// Non-negative device-to-channel utilities, devices in rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::parameter("weights must be finite and non-negative"));
        }
        Ok(WeightMatrix { w })
    }

    /// Device-major view of the CSI grid (the transpose of the
    /// channels × devices gain matrix).
    pub fn from_grid(grid: &ChannelGrid) -> Self {
        let w = DMatrix::from_fn(grid.devices(), grid.channels, |d, l| grid.gain(d, l));
        WeightMatrix { w }
    }

    pub fn devices(&self) -> usize {
        self.w.nrows()
    }

    pub fn channels(&self) -> usize {
        self.w.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.w
    }
}

/// Exact minimum-cost assignment of rows to columns on a square matrix via
/// the O(n³) potential (Hungarian) method. Returns the column of each row.
fn hungarian_min(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    // Column n acts as the virtual start of each augmenting search.
    let mut row_potential = vec![0.0f64; n];
    let mut col_potential = vec![0.0f64; n + 1];
    let mut assigned_row: Vec<Option<usize>> = vec![None; n + 1];
    let mut predecessor = vec![n; n + 1];

    for row in 0..n {
        assigned_row[n] = Some(row);
        let mut j0 = n;
        let mut min_reduced = vec![f64::INFINITY; n + 1];
        let mut visited = vec![false; n + 1];

        loop {
            visited[j0] = true;
            let i0 = assigned_row[j0].expect("visited column always has a row");
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if visited[j] {
                    continue;
                }
                let reduced = cost[(i0, j)] - row_potential[i0] - col_potential[j];
                if reduced < min_reduced[j] {
                    min_reduced[j] = reduced;
                    predecessor[j] = j0;
                }
                if min_reduced[j] < delta {
                    delta = min_reduced[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    if let Some(i) = assigned_row[j] {
                        row_potential[i] += delta;
                    }
                    col_potential[j] -= delta;
                } else {
                    min_reduced[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0].is_none() {
                break;
            }
        }

        // Augment along the alternating path back to the virtual column.
        while j0 != n {
            let j1 = predecessor[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
        }
    }

    let mut col_of_row = vec![usize::MAX; n];
    for (j, row) in assigned_row.iter().enumerate().take(n) {
        if let Some(i) = row {
            col_of_row[*i] = j;
        }
    }
    col_of_row
}

/// Maximum-total-weight assignment of devices to channels under the
/// one-device-per-channel constraint. The rectangular problem is squared
/// with zero-weight dummies; matched pairs of zero weight are dropped, so
/// only links with strictly positive utility are scheduled.
pub fn max_weight_matching(weights: &WeightMatrix) -> Allocation {
    let devices = weights.devices();
    let channels = weights.channels();
    let n = devices.max(channels);
    let cost = DMatrix::from_fn(n, n, |i, j| {
        if i < devices && j < channels {
            -weights.w[(i, j)]
        } else {
            0.0
        }
    });
    let col_of_row = hungarian_min(&cost);
    let mut alloc = Allocation::empty(devices, channels);
    for dev in 0..devices {
        let ch = col_of_row[dev];
        if ch < channels && weights.w[(dev, ch)] > 0.0 {
            alloc.set(dev, ch);
        }
    }
    alloc
}

/// Slots since each device's last successful delivery, device-major
/// (sensors first, then actuators).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AoiVector(pub Vec<u64>);

impl AoiVector {
    pub fn zeros(devices: usize) -> Self {
        AoiVector(vec![0; devices])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Success flags in device-major order.
pub fn device_flags(outcomes: &PacketOutcomes) -> Vec<bool> {
    let mut flags = outcomes.psi.clone();
    flags.extend_from_slice(&outcomes.lambda);
    flags
}

/// Ages reset to zero on success and grow by one slot otherwise.
pub fn update_aoi(aoi: &AoiVector, outcomes: &PacketOutcomes) -> AoiVector {
    let flags = device_flags(outcomes);
    AoiVector(
        aoi.0
            .iter()
            .zip(flags)
            .map(|(&age, ok)| if ok { 0 } else { age + 1 })
            .collect(),
    )
}

/// Mutable state shared by the stateful policies.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    /// Round-robin position in the device list.
    pub cursor: usize,
    /// Persistent policy: device holding each channel, once initialized.
    pub held: Option<Vec<Option<usize>>>,
    /// Outcomes of the previous slot, consumed by the persistent policy.
    pub last_outcomes: Option<PacketOutcomes>,
    pub aoi: AoiVector,
}

impl SchedulerState {
    pub fn new(devices: usize) -> Self {
        SchedulerState {
            cursor: 0,
            held: None,
            last_outcomes: None,
            aoi: AoiVector::zeros(devices),
        }
    }
}

/// Assigns the L channels to L consecutive devices starting at the cursor,
/// wrapping around the device list; the cursor advances by one each slot.
pub fn round_robin(
    state: &SchedulerState,
    sensors: usize,
    actuators: usize,
    channels: usize,
) -> (Allocation, SchedulerState) {
    let devices = sensors + actuators;
    let mut alloc = Allocation::empty(devices, channels);
    for l in 0..channels.min(devices) {
        alloc.set((state.cursor + l) % devices, l);
    }
    let mut next = state.clone();
    next.cursor = (state.cursor + 1) % devices;
    (alloc, next)
}

/// Devices keep their channel until they deliver; released channels are
/// redrawn uniformly among the devices left without a channel. The first
/// call (or the first after a reset) draws the initial holders uniformly.
pub fn persistent<R: Rng + ?Sized>(
    state: &SchedulerState,
    devices: usize,
    channels: usize,
    rng: &mut R,
) -> (Allocation, SchedulerState) {
    let mut held: Vec<Option<usize>> = match (&state.held, &state.last_outcomes) {
        (Some(held), Some(outcomes)) => {
            let flags = device_flags(outcomes);
            let mut held = held.clone();
            for slot in held.iter_mut() {
                if let Some(dev) = *slot {
                    if flags[dev] {
                        *slot = None;
                    }
                }
            }
            held
        }
        (Some(held), None) => held.clone(),
        (None, _) => vec![None; channels],
    };

    let mut unscheduled: Vec<usize> =
        (0..devices).filter(|d| !held.contains(&Some(*d))).collect();
    for slot in held.iter_mut() {
        if slot.is_none() {
            let pick = rng.random_range(0..unscheduled.len());
            *slot = Some(unscheduled.swap_remove(pick));
        }
    }

    let mut alloc = Allocation::empty(devices, channels);
    for (ch, dev) in held.iter().enumerate() {
        if let Some(dev) = dev {
            alloc.set(*dev, ch);
        }
    }
    let mut next = state.clone();
    next.held = Some(held);
    next.last_outcomes = None;
    (alloc, next)
}

/// Greedy allocation in a fixed device ranking: each ranked device takes its
/// best-gain remaining channel until all channels are spoken for.
fn greedy_by_rank(order: &[usize], grid: &ChannelGrid) -> Allocation {
    let devices = grid.devices();
    let channels = grid.channels;
    let mut alloc = Allocation::empty(devices, channels);
    let mut taken = vec![false; channels];
    let mut assigned = 0;
    for &dev in order {
        if assigned == channels {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for ch in 0..channels {
            if taken[ch] {
                continue;
            }
            let g = grid.gain(dev, ch);
            let better = match best {
                None => true,
                Some((_, bg)) => g > bg,
            };
            if better {
                best = Some((ch, g));
            }
        }
        if let Some((ch, _)) = best {
            alloc.set(dev, ch);
            taken[ch] = true;
            assigned += 1;
        }
    }
    alloc
}

/// Devices ranked by descending age of information (ties by device index)
/// greedily pick their best remaining channel.
pub fn aoi_greedy(state: &SchedulerState, grid: &ChannelGrid) -> Allocation {
    let mut order: Vec<usize> = (0..state.aoi.len()).collect();
    order.sort_by(|&a, &b| state.aoi.0[b].cmp(&state.aoi.0[a]).then(a.cmp(&b)));
    greedy_by_rank(&order, grid)
}

/// One-to-one matching maximizing the total selected CSI.
pub fn csi_greedy(grid: &ChannelGrid) -> Allocation {
    max_weight_matching(&WeightMatrix::from_grid(grid))
}

/// L devices drawn uniformly without replacement, assigned to the channels
/// by a uniform bijection.
pub fn random_schedule<R: Rng + ?Sized>(
    sensors: usize,
    actuators: usize,
    channels: usize,
    rng: &mut R,
) -> Allocation {
    let devices = sensors + actuators;
    let mut pool: Vec<usize> = (0..devices).collect();
    for i in 0..channels {
        let j = rng.random_range(i..devices);
        pool.swap(i, j);
    }
    let mut chans: Vec<usize> = (0..channels).collect();
    for i in (1..channels).rev() {
        let j = rng.random_range(0..=i);
        chans.swap(i, j);
    }
    let mut alloc = Allocation::empty(devices, channels);
    for i in 0..channels {
        alloc.set(pool[i], chans[i]);
    }
    alloc
}

/// Devices ranked by descending score (ties by device index) greedily pick
/// their best-gain remaining channel. Scores typically come from a learned
/// priority head.
pub fn priority_mapping(scores: &DVector<f64>, grid: &ChannelGrid) -> Allocation {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    greedy_by_rank(&order, grid)
}

/// The benchmark scheduling policies behind one interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    RoundRobin,
    Persistent,
    AoiGreedy,
    CsiGreedy,
    Random,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [
        SchedulerKind::RoundRobin,
        SchedulerKind::Persistent,
        SchedulerKind::AoiGreedy,
        SchedulerKind::CsiGreedy,
        SchedulerKind::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::RoundRobin => "round-robin",
            SchedulerKind::Persistent => "persistent",
            SchedulerKind::AoiGreedy => "aoi-greedy",
            SchedulerKind::CsiGreedy => "csi-greedy",
            SchedulerKind::Random => "random",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round-robin" => Ok(SchedulerKind::RoundRobin),
            "persistent" => Ok(SchedulerKind::Persistent),
            "aoi-greedy" => Ok(SchedulerKind::AoiGreedy),
            "csi-greedy" => Ok(SchedulerKind::CsiGreedy),
            "random" => Ok(SchedulerKind::Random),
            other => Err(Error::Config(format!("unknown scheduler '{other}'"))),
        }
    }
}

/// A policy plus its per-rollout state. One instance per rollout; reset at
/// every episode start.
#[derive(Debug, Clone)]
pub struct Scheduler {
    pub kind: SchedulerKind,
    pub state: SchedulerState,
    sensors: usize,
    actuators: usize,
    channels: usize,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, sensors: usize, actuators: usize, channels: usize) -> Self {
        Scheduler {
            kind,
            state: SchedulerState::new(sensors + actuators),
            sensors,
            actuators,
            channels,
        }
    }

    /// Fresh episode: cursor rewound, ages zeroed, persistent holdings
    /// cleared so the next allocation redraws them.
    pub fn reset(&mut self) {
        self.state = SchedulerState::new(self.sensors + self.actuators);
    }

    pub fn allocate<R: Rng + ?Sized>(&mut self, grid: &ChannelGrid, rng: &mut R) -> Allocation {
        let (alloc, next) = match self.kind {
            SchedulerKind::RoundRobin => {
                round_robin(&self.state, self.sensors, self.actuators, self.channels)
            }
            SchedulerKind::Persistent => persistent(
                &self.state,
                self.sensors + self.actuators,
                self.channels,
                rng,
            ),
            SchedulerKind::AoiGreedy => {
                let alloc = aoi_greedy(&self.state, grid);
                (alloc, self.state.clone())
            }
            SchedulerKind::CsiGreedy => (csi_greedy(grid), self.state.clone()),
            SchedulerKind::Random => (
                random_schedule(self.sensors, self.actuators, self.channels, rng),
                self.state.clone(),
            ),
        };
        self.state = next;
        alloc
    }

    /// Feeds back the slot's packet outcomes (ages, persistent holdings).
    pub fn observe(&mut self, outcomes: &PacketOutcomes) {
        self.state.aoi = update_aoi(&self.state.aoi, outcomes);
        self.state.last_outcomes = Some(outcomes.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel_model, validate_allocation, ChannelGrid};
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    /// Exhaustive search over all partial injective assignments.
    fn brute_force_best(w: &DMatrix<f64>) -> f64 {
        fn recurse(w: &DMatrix<f64>, ch: usize, used: &mut Vec<bool>, acc: f64) -> f64 {
            if ch == w.ncols() {
                return acc;
            }
            let mut best = recurse(w, ch + 1, used, acc);
            for dev in 0..w.nrows() {
                if !used[dev] {
                    used[dev] = true;
                    best = best.max(recurse(w, ch + 1, used, acc + w[(dev, ch)]));
                    used[dev] = false;
                }
            }
            best
        }
        recurse(w, 0, &mut vec![false; w.nrows()], 0.0)
    }

    fn total_weight(alloc: &Allocation, w: &DMatrix<f64>) -> f64 {
        alloc
            .scheduled_pairs()
            .iter()
            .map(|&(d, l)| w[(d, l)])
            .sum()
    }

    fn grid_from_gains(gains: &[f64], sensors: usize, actuators: usize, channels: usize, seed: u64) -> (ChannelGrid, crate::channel::ChannelModel) {
        let model = generate_channel_model(sensors, actuators, channels, gains, seed).unwrap();
        let mut rng = stream_rng(seed, 3);
        let grid = ChannelGrid::init(&model, &mut rng);
        (grid, model)
    }

    #[test]
    fn matching_trivial_and_small() {
        let w = WeightMatrix::new(DMatrix::from_element(1, 1, 5.0)).unwrap();
        let alloc = max_weight_matching(&w);
        assert_eq!(alloc.scheduled_pairs(), vec![(0, 0)]);

        let w2 = WeightMatrix::new(DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 2.0, 4.0])).unwrap();
        let alloc2 = max_weight_matching(&w2);
        assert_eq!(alloc2.scheduled_pairs(), vec![(0, 0), (1, 1)]);
        assert_eq!(total_weight(&alloc2, w2.as_matrix()), 7.0);
    }

    #[test]
    fn matching_equals_brute_force() {
        let mut rng = stream_rng(101, 0);
        for trial in 0..300 {
            let devices = rng.random_range(1..=6usize);
            let channels = rng.random_range(1..=4usize.min(devices));
            let w = DMatrix::from_fn(devices, channels, |_, _| rng.random_range(0.0..10.0));
            let alloc = max_weight_matching(&WeightMatrix::new(w.clone()).unwrap());
            assert!(validate_allocation(&alloc), "trial {trial}");
            let got = total_weight(&alloc, &w);
            let best = brute_force_best(&w);
            assert!(
                (got - best).abs() < 1e-9,
                "trial {trial}: matcher {got} vs brute force {best}"
            );
        }
    }

    #[test]
    fn matching_is_scale_equivariant() {
        let mut rng = stream_rng(55, 0);
        for _ in 0..50 {
            let w = DMatrix::from_fn(5, 3, |_, _| rng.random_range(0.0..1.0));
            let scale = rng.random_range(1e-6..1e6);
            let base = max_weight_matching(&WeightMatrix::new(w.clone()).unwrap());
            let scaled = max_weight_matching(&WeightMatrix::new(w * scale).unwrap());
            assert_eq!(base, scaled);
        }
    }

    #[test]
    fn matching_breaks_ties_by_index() {
        let w = WeightMatrix::new(DMatrix::from_element(4, 3, 2.0)).unwrap();
        let alloc = max_weight_matching(&w);
        assert_eq!(alloc.scheduled_pairs(), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn matching_drops_zero_weight_pairs() {
        let mut w = DMatrix::zeros(3, 2);
        w[(1, 0)] = 1.0;
        w[(1, 1)] = 0.5;
        let alloc = max_weight_matching(&WeightMatrix::new(w).unwrap());
        assert_eq!(alloc.scheduled_pairs(), vec![(1, 0)]);
    }

    #[test]
    fn weight_matrix_rejects_bad_entries() {
        assert!(WeightMatrix::new(DMatrix::from_element(1, 1, -1.0)).is_err());
        assert!(WeightMatrix::new(DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn round_robin_rotates_and_is_fair() {
        let mut state = SchedulerState::new(3);
        let mut seen: Vec<Vec<usize>> = Vec::new();
        let mut counts = vec![0usize; 3];
        for _ in 0..3 {
            let (alloc, next) = round_robin(&state, 2, 1, 2);
            assert!(validate_allocation(&alloc));
            let devs: Vec<usize> = alloc.scheduled_pairs().iter().map(|p| p.0).collect();
            for &d in &devs {
                counts[d] += 1;
            }
            seen.push(devs);
            state = next;
        }
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[1], vec![1, 2]);
        assert_eq!(seen[2], vec![0, 2]); // devices {2, 0} in device order
        assert_eq!(counts, vec![2, 2, 2]); // each device exactly L times

        // Full allocation when channels cover every device.
        let full_state = SchedulerState::new(3);
        let (alloc, _) = round_robin(&full_state, 2, 1, 3);
        assert_eq!(alloc.scheduled_pairs().len(), 3);
    }

    #[test]
    fn persistent_holds_until_success() {
        let mut rng = stream_rng(7, 0);
        let state = SchedulerState::new(4);
        let (first, mut state) = persistent(&state, 4, 2, &mut rng);
        assert!(validate_allocation(&first));
        assert_eq!(first.scheduled_pairs().len(), 2);

        // Every packet fails: the holders stay put.
        state.last_outcomes = Some(PacketOutcomes::none(2, 2));
        let (second, mut state) = persistent(&state, 4, 2, &mut rng);
        assert_eq!(first, second);

        // One success releases exactly that channel.
        let holder = second.device_on(0).unwrap();
        let mut outcomes = PacketOutcomes::none(2, 2);
        if holder < 2 {
            outcomes.psi[holder] = true;
        } else {
            outcomes.lambda[holder - 2] = true;
        }
        state.last_outcomes = Some(outcomes);
        let (third, _) = persistent(&state, 4, 2, &mut rng);
        assert_eq!(third.device_on(1), second.device_on(1), "failed holder keeps channel 1");
        assert!(validate_allocation(&third));
        assert_eq!(third.scheduled_pairs().len(), 2);
    }

    #[test]
    fn persistent_permutes_when_everyone_succeeds() {
        let mut rng = stream_rng(9, 0);
        let state = SchedulerState::new(3);
        let (first, mut state) = persistent(&state, 3, 3, &mut rng);
        let devices_before: std::collections::BTreeSet<usize> =
            first.scheduled_pairs().iter().map(|p| p.0).collect();
        state.last_outcomes = Some(PacketOutcomes::all(2, 1));
        let (second, _) = persistent(&state, 3, 3, &mut rng);
        let devices_after: std::collections::BTreeSet<usize> =
            second.scheduled_pairs().iter().map(|p| p.0).collect();
        assert_eq!(devices_before, devices_after);
    }

    #[test]
    fn aoi_greedy_hand_trace() {
        // 3 devices, 2 channels with known gains.
        let (grid, _) = grid_from_gains(&[0.1, 0.2, 0.4, 0.8], 2, 1, 2, 13);
        let mut state = SchedulerState::new(3);

        // Equal ages: device 0 first, takes its best channel.
        let alloc = aoi_greedy(&state, &grid);
        let best0 = if grid.gain(0, 0) >= grid.gain(0, 1) { 0 } else { 1 };
        assert_eq!(alloc.channel_of(0), Some(best0));
        assert_eq!(alloc.scheduled_pairs().len(), 2);

        // A starving device preempts the ranking.
        state.aoi = AoiVector(vec![0, 10, 0]);
        let alloc2 = aoi_greedy(&state, &grid);
        let best1 = if grid.gain(1, 0) >= grid.gain(1, 1) { 0 } else { 1 };
        assert_eq!(alloc2.channel_of(1), Some(best1));

        // Hand-simulated order: device 1 picks, then device 0 takes what's left.
        let leftover = 1 - best1;
        assert_eq!(alloc2.channel_of(0), Some(leftover));
    }

    #[test]
    fn csi_greedy_matches_brute_force() {
        let mut rng = stream_rng(31, 0);
        for trial in 0..100 {
            let (grid, _) = grid_from_gains(&crate::channel::default_gain_levels(), 2, 2, 3, 500 + trial);
            let alloc = csi_greedy(&grid);
            assert!(validate_allocation(&alloc));
            let w = WeightMatrix::from_grid(&grid);
            let got = total_weight(&alloc, w.as_matrix());
            let best = brute_force_best(w.as_matrix());
            assert!((got - best).abs() < 1e-12, "trial {trial}");
            let _ = &mut rng;
        }

        // Single device prefers its strongest channel.
        let (grid1, _) = grid_from_gains(&[1e-3, 1e-1], 1, 0, 1, 3);
        let alloc1 = csi_greedy(&grid1);
        assert_eq!(alloc1.scheduled_pairs().len(), 1);
    }

    #[test]
    fn random_schedule_covers_everyone_fairly() {
        let mut rng = stream_rng(17, 0);

        // All devices scheduled when L = M + N.
        let alloc = random_schedule(2, 2, 4, &mut rng);
        assert_eq!(alloc.scheduled_pairs().len(), 4);
        assert!(validate_allocation(&alloc));

        // Long-run per-device frequency L/(M+N) within 3 binomial SEs.
        let (m, n, l) = (3usize, 2usize, 2usize);
        let trials = 100_000;
        let mut counts = vec![0usize; m + n];
        for _ in 0..trials {
            let a = random_schedule(m, n, l, &mut rng);
            for (dev, _) in a.scheduled_pairs() {
                counts[dev] += 1;
            }
        }
        let p = l as f64 / (m + n) as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for (dev, c) in counts.iter().enumerate() {
            let freq = *c as f64 / trials as f64;
            assert!((freq - p).abs() <= 3.0 * se, "device {dev}: freq {freq}");
        }
    }

    #[test]
    fn aoi_updates() {
        let aoi = AoiVector::zeros(3);
        let all = update_aoi(&aoi, &PacketOutcomes::all(2, 1));
        assert_eq!(all.0, vec![0, 0, 0]);

        // Never-scheduled devices age linearly.
        let mut age = AoiVector::zeros(3);
        for t in 1..=5 {
            age = update_aoi(&age, &PacketOutcomes::none(2, 1));
            assert_eq!(age.0, vec![t, t, t]);
        }

        // Alternating success and failure.
        let mut flip = AoiVector::zeros(1);
        let ok = PacketOutcomes::all(1, 0);
        let fail = PacketOutcomes::none(1, 0);
        flip = update_aoi(&flip, &fail);
        assert_eq!(flip.0, vec![1]);
        flip = update_aoi(&flip, &ok);
        assert_eq!(flip.0, vec![0]);
        flip = update_aoi(&flip, &fail);
        assert_eq!(flip.0, vec![1]);
    }

    #[test]
    fn priority_mapping_follows_scores() {
        let (grid, _) = grid_from_gains(&[0.1, 0.2, 0.4], 2, 2, 2, 23);

        // Monotone scores: the top-L devices by score are scheduled.
        let scores = DVector::from_vec(vec![0.9, 0.7, 0.5, 0.3]);
        let alloc = priority_mapping(&scores, &grid);
        assert!(alloc.is_scheduled(0) && alloc.is_scheduled(1));
        assert!(!alloc.is_scheduled(2) && !alloc.is_scheduled(3));

        // Equal scores fall back to device order.
        let flat = DVector::from_element(4, 0.5);
        let alloc_flat = priority_mapping(&flat, &grid);
        assert!(alloc_flat.is_scheduled(0) && alloc_flat.is_scheduled(1));

        // Independent greedy re-implementation as oracle.
        let mut rng = stream_rng(29, 0);
        for trial in 0..100 {
            let scores = DVector::from_fn(4, |_, _| rng.random_range(0.0..1.0));
            let alloc = priority_mapping(&scores, &grid);
            let mut order: Vec<usize> = (0..4).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let mut taken = [false; 2];
            let mut expect = Allocation::empty(4, 2);
            for &dev in order.iter().take(2) {
                let mut best_ch = usize::MAX;
                let mut best_g = f64::NEG_INFINITY;
                for ch in 0..2 {
                    if !taken[ch] && grid.gain(dev, ch) > best_g {
                        best_g = grid.gain(dev, ch);
                        best_ch = ch;
                    }
                }
                taken[best_ch] = true;
                expect.set(dev, best_ch);
            }
            assert_eq!(alloc, expect, "trial {trial}");
        }
    }

    proptest! {
        /// Every policy emits a valid allocation from any reachable state.
        #[test]
        fn all_schedulers_emit_valid_allocations(seed in 0u64..500, kind_idx in 0usize..5) {
            let kind = SchedulerKind::ALL[kind_idx];
            let model = generate_channel_model(3, 2, 3, &crate::channel::default_gain_levels(), seed).unwrap();
            let mut rng = stream_rng(seed, 1);
            let mut grid = ChannelGrid::init(&model, &mut rng);
            let mut sched = Scheduler::new(kind, 3, 2, 3);
            let budget = crate::channel::LinkBudget::default();
            for _ in 0..20 {
                let alloc = sched.allocate(&grid, &mut rng);
                prop_assert!(validate_allocation(&alloc));
                let outcomes = crate::channel::sample_outcomes(&alloc, &grid, &budget, &mut rng).unwrap();
                sched.observe(&outcomes);
                grid = crate::channel::step_channels(&model, &grid, &mut rng);
            }
        }
    }
}
