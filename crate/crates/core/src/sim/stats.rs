use alloc::vec;
use alloc::vec::Vec;

/// Sample mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std_error: f64,
}

/// Running sums split into `batches` consecutive blocks per replication.
#[derive(Debug, Clone)]
pub(crate) struct Batched {
    len: usize,
    current: Vec<(f64, u64)>,
    means: Vec<f64>,
    total: f64,
    count: u64,
}

impl Batched {
    pub(crate) fn new(batches: usize, len: usize) -> Self {
        Self {
            len: len.max(1),
            current: vec![(0.0, 0); batches.max(1)],
            means: Vec::new(),
            total: 0.0,
            count: 0,
        }
    }

    /// Adds the value recorded at position `i` of the current replication.
    pub(crate) fn push(&mut self, i: usize, v: f64) {
        let b = (i * self.current.len() / self.len).min(self.current.len() - 1);
        self.current[b].0 += v;
        self.current[b].1 += 1;
        self.total += v;
        self.count += 1;
    }

    pub(crate) fn end_replication(&mut self) {
        for (sum, n) in self.current.iter_mut() {
            if *n > 0 {
                self.means.push(*sum / *n as f64);
            }
            *sum = 0.0;
            *n = 0;
        }
    }

    pub(crate) fn summary(&self) -> Stat {
        let mean = if self.count == 0 { f64::NAN } else { self.total / self.count as f64 };
        let k = self.means.len();
        let std_error = if k < 2 {
            f64::NAN
        } else {
            let m = self.means.iter().sum::<f64>() / k as f64;
            let var = self.means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1) as f64;
            libm::sqrt(var / k as f64)
        };
        Stat { mean, std_error }
    }
}
