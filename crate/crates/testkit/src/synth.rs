//! Seeded synthetic series and datasets.

use itsforge_core::interval::{Interval, IntervalSeries, Scale, SupervisedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Interval series whose centre follows a unit-variance AR(1) with
/// coefficient `phi` around 7 and whose radius is 0.5 plus a small AR(1)
/// wiggle. Flagged as log scale so it can stand in for log prices.
pub fn interval_ar1(n: usize, phi: f64, seed: u64) -> IntervalSeries {
    let mut r = rng(seed);
    let innov = (1.0 - phi * phi).sqrt();
    let mut c = gauss(&mut r);
    let mut w = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        c = phi * c + innov * gauss(&mut r);
        w = phi * w + 0.05 * gauss(&mut r);
        let radius = (0.5 + w).max(0.05);
        out.push(Interval::from_center_radius(7.0 + 0.1 * c, 0.1 * radius));
    }
    IntervalSeries::from_intervals(out, Scale::Log)
}

/// Independent intervals: iid normal centre and iid positive radius.
pub fn white_noise_intervals(n: usize, seed: u64) -> IntervalSeries {
    let mut r = rng(seed);
    let out = (0..n)
        .map(|_| {
            let c = gauss(&mut r);
            let radius = 0.5 + 0.1 * gauss(&mut r).abs();
            Interval::from_center_radius(c, radius)
        })
        .collect();
    IntervalSeries::from_intervals(out, Scale::Raw)
}

/// Uniform inputs in `[-1, 1]^dim` and `m` smooth targets with noise.
pub fn regression(n: usize, dim: usize, m: usize, seed: u64) -> SupervisedDataset {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let targets = inputs
        .iter()
        .map(|x| {
            (0..m)
                .map(|j| {
                    let s: f64 = x.iter().enumerate().map(|(c, v)| ((c + j + 1) as f64 * v).sin()).sum();
                    s + noise.sample(&mut r)
                })
                .collect()
        })
        .collect();
    SupervisedDataset::new(inputs, targets).unwrap()
}

/// `2 * order` standard normal inputs; the lower target is
/// `x[a] + x[b]` plus small noise and the upper target adds 0.5.
pub fn planted_support(n: usize, order: usize, support: (usize, usize), seed: u64) -> SupervisedDataset {
    let mut r = rng(seed);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..2 * order).map(|_| gauss(&mut r)).collect()).collect();
    let targets = inputs
        .iter()
        .map(|x| {
            let l = x[support.0] + x[support.1] + 0.05 * gauss(&mut r);
            vec![l, l + 0.5]
        })
        .collect();
    SupervisedDataset::new(inputs, targets).unwrap()
}

/// Inputs and targets drawn independently of each other.
pub fn noise(n: usize, dim: usize, seed: u64) -> SupervisedDataset {
    let mut r = rng(seed);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| gauss(&mut r)).collect()).collect();
    let targets = (0..n)
        .map(|_| {
            let l = gauss(&mut r);
            vec![l, l + 1.0]
        })
        .collect();
    SupervisedDataset::new(inputs, targets).unwrap()
}
