//! Log-bucketed latency histogram in milliseconds.
//!
//! Bucket `i` covers `(b[i-1], b[i]]` with `b[i] = 0.1 * 2^(i/8)`, up to 60 s.
//! Bucket 0 takes everything at or below 0.1 ms and the last bucket takes
//! everything above 60 s. Percentiles report the upper bound of the bucket
//! holding the rank, clamped to the observed min/max, so the relative error is
//! at most `2^(1/8) - 1` (about 9%).

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

pub const MIN_MS: f64 = 0.1;
pub const MAX_MS: f64 = 60_000.0;
pub const SUB_BUCKETS: u32 = 8;

fn bounds() -> &'static [f64] {
    static B: OnceLock<Vec<f64>> = OnceLock::new();
    B.get_or_init(|| {
        let mut v = Vec::new();
        let mut i = 0;
        loop {
            let b = MIN_MS * 2f64.powf(i as f64 / SUB_BUCKETS as f64);
            v.push(b.min(MAX_MS));
            if b >= MAX_MS {
                break;
            }
            i += 1;
        }
        v
    })
}

/// Upper bounds of all finite buckets, ascending.
pub fn bucket_bounds() -> &'static [f64] {
    bounds()
}

/// Index of the bucket holding `ms`; `bucket_bounds().len()` is the overflow bucket.
pub fn bucket_index(ms: f64) -> usize {
    bounds().partition_point(|&b| b < ms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyHistogram {
    counts: Vec<u64>,
    n: u64,
    sum: f64,
    min: f64,
    max: f64,
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        Self::new()
    }
}

impl LatencyHistogram {
    pub fn new() -> Self {
        LatencyHistogram {
            counts: vec![0; bounds().len() + 1],
            n: 0,
            sum: 0.0,
            min: 0.0,
            max: 0.0,
        }
    }

    /// Negative and NaN values are recorded as 0.
    pub fn record(&mut self, ms: f64) {
        let ms = if ms.is_nan() { 0.0 } else { ms.max(0.0) };
        self.counts[bucket_index(ms)] += 1;
        self.min = if self.n == 0 { ms } else { self.min.min(ms) };
        self.n += 1;
        self.sum += ms;
        self.max = self.max.max(ms);
    }

    pub fn merge(&mut self, other: &LatencyHistogram) {
        if other.n == 0 {
            return;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.min = if self.n == 0 { other.min } else { self.min.min(other.min) };
        self.n += other.n;
        self.sum += other.sum;
        self.max = self.max.max(other.max);
    }

    /// Per-bucket counts; the last entry is the overflow bucket.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }

    pub fn min(&self) -> Option<f64> {
        (self.n > 0).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (self.n > 0).then_some(self.max)
    }

    /// Nearest-rank percentile, `p` in [0, 100].
    pub fn percentile(&self, p: f64) -> Option<f64> {
        if self.n == 0 {
            return None;
        }
        let rank = ((p.clamp(0.0, 100.0) / 100.0) * self.n as f64).ceil().max(1.0) as u64;
        let mut seen = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            seen += c;
            if seen >= rank {
                let upper = bounds().get(i).copied().unwrap_or(self.max);
                return Some(upper.clamp(self.min, self.max));
            }
        }
        Some(self.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn json_roundtrip_including_empty() {
        let mut h = LatencyHistogram::new();
        let e: LatencyHistogram = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(e, h);
        h.record(3.0);
        h.record(0.5);
        let mut m = LatencyHistogram::new();
        m.merge(&h);
        assert_eq!(m.min(), Some(0.5));
        let r: LatencyHistogram = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn bounds_shape() {
        let b = bucket_bounds();
        assert_eq!(b[0], 0.1);
        assert_eq!(b[8], 0.2);
        assert_eq!(*b.last().unwrap(), MAX_MS);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(bucket_index(0.0), 0);
        assert_eq!(bucket_index(0.1), 0);
        assert_eq!(bucket_index(0.2), 8);
        assert_eq!(bucket_index(1e9), b.len());
    }

    #[test]
    fn summary_stats() {
        let mut h = LatencyHistogram::new();
        assert_eq!(h.percentile(50.0), None);
        for v in [1.0, 2.0, 3.0, 4.0] {
            h.record(v);
        }
        assert_eq!(h.count(), 4);
        assert_eq!(h.mean(), Some(2.5));
        assert_eq!(h.min(), Some(1.0));
        assert_eq!(h.max(), Some(4.0));
        assert_eq!(h.percentile(100.0), Some(4.0));
        // rank 1 lands in the bucket (0.1 * 2^(26/8), 0.1 * 2^(27/8)]
        let p0 = h.percentile(0.0).unwrap();
        assert_eq!(p0, bucket_bounds()[bucket_index(1.0)]);
        assert!(p0 >= 1.0 && p0 <= 2f64.powf(1.0 / 8.0));
        let mut big = LatencyHistogram::new();
        big.record(90_000.0);
        assert_eq!(big.percentile(99.0), Some(90_000.0));
    }

    #[test]
    fn merge_equals_joint_recording() {
        let (mut a, mut b, mut all) = (LatencyHistogram::new(), LatencyHistogram::new(), LatencyHistogram::new());
        for i in 0..100 {
            let v = i as f64 * 1.7;
            if i % 3 == 0 { a.record(v) } else { b.record(v) }
            all.record(v);
        }
        a.merge(&b);
        assert_eq!(a.counts, all.counts);
        assert_eq!(a.count(), all.count());
        assert_eq!(a.percentile(95.0), all.percentile(95.0));
    }

    proptest! {
        #[test]
        fn percentile_within_one_bucket(
            mut xs in prop::collection::vec(0.0f64..5000.0, 1..300),
            p in 0.0f64..=100.0
        ) {
            let mut h = LatencyHistogram::new();
            for &x in &xs {
                h.record(x);
            }
            xs.sort_by(f64::total_cmp);
            let rank = ((p / 100.0) * xs.len() as f64).ceil().max(1.0) as usize;
            let exact = xs[rank - 1];
            let got = h.percentile(p).unwrap();
            let step = 2f64.powf(1.0 / SUB_BUCKETS as f64);
            prop_assert!(got >= exact, "{got} < {exact}");
            prop_assert!(got <= (exact * step).max(MIN_MS) * (1.0 + 1e-12), "{got} vs {exact}");
        }
    }
}
