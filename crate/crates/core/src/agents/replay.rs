//! Ring-buffer experience replay with deterministic without-replacement
//! sampling.

use crate::num::RngStream;

/// One environment transition. `A` is the stored action representation:
/// a grid index for the DQL family, a raw position for DDPG/TD3.
#[derive(Clone, Copy, Debug)]
pub struct Transition<A> {
    pub state: [f64; 3],
    pub action: A,
    pub reward: f64,
    pub next_state: [f64; 3],
    pub done: bool,
}

/// Fixed-capacity ring buffer.
pub struct ReplayBuffer<A> {
    capacity: usize,
    entries: Vec<Transition<A>>,
    cursor: usize,
}

impl<A: Copy> ReplayBuffer<A> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, t: Transition<A>) {
        if self.entries.len() < self.capacity {
            self.entries.push(t);
        } else {
            self.entries[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Samples `k` distinct transitions (Floyd's algorithm; a Vec scan
    /// keeps iteration order deterministic for replay reproducibility).
    pub fn sample<'a>(&'a self, rng: &mut RngStream, k: usize) -> Vec<&'a Transition<A>> {
        let n = self.entries.len();
        assert!(k <= n, "cannot sample {k} of {n}");
        let mut picked: Vec<usize> = Vec::with_capacity(k);
        for j in (n - k)..n {
            let t = rng.index(j + 1);
            if picked.contains(&t) {
                picked.push(j);
            } else {
                picked.push(t);
            }
        }
        picked.into_iter().map(|i| &self.entries[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(Transition {
                state: [i as f64, 0.0, 0.0],
                action: i,
                reward: 0.0,
                next_state: [0.0; 3],
                done: false,
            });
        }
        assert_eq!(buf.len(), 3);
        let actions: Vec<usize> = buf.entries.iter().map(|t| t.action).collect();
        assert_eq!(actions, vec![3, 4, 2]);
    }

    #[test]
    fn sampling_is_distinct_and_reproducible() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(Transition {
                state: [0.0; 3],
                action: i,
                reward: 0.0,
                next_state: [0.0; 3],
                done: false,
            });
        }
        let mut rng1 = RngStream::new(9, 0);
        let a: Vec<usize> = buf.sample(&mut rng1, 32).iter().map(|t| t.action).collect();
        let mut uniq = a.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 32, "sampled indices must be distinct");

        let mut rng2 = RngStream::new(9, 0);
        let b: Vec<usize> = buf.sample(&mut rng2, 32).iter().map(|t| t.action).collect();
        assert_eq!(a, b);
    }
}
