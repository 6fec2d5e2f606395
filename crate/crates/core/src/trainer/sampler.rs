use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{DadaError, Result};
use crate::rng::Rng;

/// Round-robin over per-class shuffled streams. Consecutive draws cycle
/// through the classes, so any `b >= k` consecutive draws cover every class.
/// A class stream is reshuffled each time it is exhausted.
#[derive(Debug, Clone)]
pub struct BalancedSampler {
    by_class: Vec<Vec<usize>>,
    pos: Vec<usize>,
    next_class: usize,
}

impl BalancedSampler {
    pub fn new(d: &Dataset) -> Result<Self> {
        let by_class = d.class_indices();
        if let Some(c) = by_class.iter().position(Vec::is_empty) {
            return Err(DadaError::Config(format!("class {} has no training samples", c + 1)));
        }
        let pos = vec![0; by_class.len()];
        Ok(BalancedSampler { by_class, pos, next_class: 0 })
    }

    pub fn k(&self) -> usize {
        self.by_class.len()
    }

    pub fn next_batch(&mut self, b: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(b);
        for _ in 0..b {
            let c = self.next_class;
            self.next_class = (c + 1) % self.by_class.len();
            if self.pos[c] == 0 {
                self.by_class[c].shuffle(rng);
            }
            out.push(self.by_class[c][self.pos[c]]);
            self.pos[c] = (self.pos[c] + 1) % self.by_class[c].len();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledSample, Layout};
    use crate::rng::seeded;

    #[test]
    fn every_batch_covers_every_class() {
        // unbalanced: 1, 4 and 9 samples
        let mut samples = Vec::new();
        for (c, n) in [(1, 1), (2, 4), (3, 9)] {
            for i in 0..n {
                samples.push(LabeledSample { x: vec![i as f64 / 10.0], y: c });
            }
        }
        let d = Dataset::new(samples, 3, Layout::Vector { dim: 1 }).unwrap();
        let mut s = BalancedSampler::new(&d).unwrap();
        let mut rng = seeded(0);
        for b in [3, 4, 5, 7, 32] {
            for _ in 0..20 {
                let mut counts = [0; 3];
                for i in s.next_batch(b, &mut rng) {
                    counts[d.samples()[i].y - 1] += 1;
                }
                assert!(counts.iter().all(|&c| c >= 1), "{counts:?}");
            }
        }
    }

    #[test]
    fn empty_class_rejected() {
        let d = Dataset::new(vec![LabeledSample { x: vec![0.0], y: 1 }], 2, Layout::Vector { dim: 1 }).unwrap();
        assert!(matches!(BalancedSampler::new(&d), Err(DadaError::Config(_))));
    }
}
