//! Reproducible per-sample random streams and order-fixed ensemble averages.
//!
//! Sample `i` of a run seeded with `seed` always draws from ChaCha8 stream
//! `i` of that seed, whichever thread evaluates it. Samples are reduced in
//! fixed-size chunks whose partial statistics are merged in chunk order, so
//! the estimate is bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: u64 = 4096;

/// Generator dedicated to sample `index`.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl Estimate {
    /// `|mean − target|` in units of the standard error (0 when both vanish).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }
}

/// Averages `sample(rng, index)` over `n` samples drawn from per-sample
/// streams of `seed`. Runs on the current rayon pool.
pub fn ensemble_mean<F>(n: u64, seed: u64, sample: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng, u64) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = sample_stream(seed, i);
                m.push(sample(&mut rng, i));
            }
            m
        })
        .collect();
    let total = partial.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt()
    } else {
        0.0
    };
    Estimate {
        mean: total.mean,
        std_error,
        n: total.n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_of_evaluation_order() {
        let a: f64 = sample_stream(7, 123).gen();
        let _: f64 = sample_stream(7, 5).gen();
        let b: f64 = sample_stream(7, 123).gen();
        assert_eq!(a, b);
        let c: f64 = sample_stream(7, 124).gen();
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_estimate() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_mean(50_000, 99, |rng, _| rng.gen::<f64>()))
        };
        let one = run(1);
        let many = run(6);
        assert_eq!(one.mean.to_bits(), many.mean.to_bits());
        assert_eq!(one.std_error.to_bits(), many.std_error.to_bits());
        assert!(one.z_score(0.5) < 4.0);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let e = ensemble_mean(1000, 1, |_, _| 2.5);
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.z_score(2.5), 0.0);
    }
}
