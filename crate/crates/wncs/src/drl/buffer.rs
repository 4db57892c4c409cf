//! Fixed-capacity experience replay with FIFO eviction and uniform sampling.

use nalgebra::DVector;
use rand::Rng;

/// One stored transition. The action is the noisy pre-embedding actor
/// output; the actuator mask records which actuators the embedded
/// allocation scheduled in that slot (consumed by the partial policy
/// gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: DVector<f64>,
    pub action: DVector<f64>,
    pub cost: f64,
    pub next_state: DVector<f64>,
    pub actuator_mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Experience>,
    capacity: usize,
    next: usize,
    total_inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be nonzero");
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            next: 0,
            total_inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_inserted(&self) -> u64 {
        self.total_inserted
    }

    /// Ring-cursor position of the next overwrite.
    pub fn cursor(&self) -> usize {
        self.next
    }

    pub fn push(&mut self, exp: Experience) {
        if self.data.len() < self.capacity {
            self.data.push(exp);
        } else {
            self.data[self.next] = exp;
        }
        self.next = (self.next + 1) % self.capacity;
        self.total_inserted += 1;
    }

    pub fn get(&self, idx: usize) -> &Experience {
        &self.data[idx]
    }

    /// Uniform indices over the filled region.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        (0..batch).map(|_| rng.random_range(0..self.data.len())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn exp(tag: f64) -> Experience {
        Experience {
            state: DVector::from_element(2, tag),
            action: DVector::from_element(1, tag),
            cost: tag,
            next_state: DVector::from_element(2, tag),
            actuator_mask: vec![true],
        }
    }

    #[test]
    fn sampling_stays_in_filled_region() {
        let mut buf = ReplayBuffer::new(8);
        let mut rng = stream_rng(1, 0);
        for i in 0..3 {
            buf.push(exp(i as f64));
        }
        for _ in 0..200 {
            for idx in buf.sample_indices(4, &mut rng) {
                assert!(idx < 3);
            }
        }
    }

    #[test]
    fn fifo_eviction_drops_the_oldest() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..6 {
            buf.push(exp(i as f64));
        }
        assert_eq!(buf.len(), 4);
        assert_eq!(buf.total_inserted(), 6);
        let costs: Vec<f64> = (0..4).map(|i| buf.get(i).cost).collect();
        // Slots 0 and 1 were overwritten by 4 and 5.
        assert!(costs.contains(&4.0) && costs.contains(&5.0));
        assert!(!costs.contains(&0.0) && !costs.contains(&1.0));
        assert!(costs.contains(&2.0) && costs.contains(&3.0));
    }
}
