//! Firefly algorithm for bounded continuous minimisation.
//!
//! Lower fitness means a brighter firefly. Each generation walks the
//! population in index order; firefly `i` moves toward every other firefly
//! `j` that is currently brighter, and its fitness is re-evaluated
//! immediately after each move. The narrower `j < i` scan is available as
//! [`Neighbourhood::Earlier`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Which fireflies `j` are compared against firefly `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighbourhood {
    /// Every `j != i`.
    #[default]
    All,
    /// Only `j < i`.
    Earlier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaConfig {
    pub population: usize,
    /// Light absorption coefficient.
    pub gamma: f64,
    /// Attractiveness at zero distance.
    pub beta0: f64,
    /// Scale of the uniform perturbation.
    pub alpha: f64,
    pub max_generations: usize,
    /// Per-dimension `(low, high)`.
    pub bounds: Vec<(f64, f64)>,
    pub neighbourhood: Neighbourhood,
    pub seed: u64,
}

impl FaConfig {
    /// Defaults for the `(log2 C, log2 sigma, log2 eps)` cube `[-6, 6]^3`.
    pub fn hyper_search(seed: u64) -> Self {
        Self {
            population: 20,
            gamma: 1.0,
            beta0: 1.0,
            alpha: 0.5,
            max_generations: 20,
            bounds: vec![(-6.0, 6.0); 3],
            neighbourhood: Neighbourhood::All,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Argument("firefly population must be at least 2".into()));
        }
        if !(self.gamma >= 0.0) || !(self.beta0 >= 0.0) {
            return Err(Error::Argument("gamma and beta0 must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Argument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.bounds.is_empty() || self.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Argument("every bound needs low < high".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Firefly {
    pub position: Vec<f64>,
    /// Fitness at `position`; lower is brighter.
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationRecord {
    /// 0 is the initial population.
    pub generation: usize,
    /// All-time best fitness after this generation.
    pub best_fitness: f64,
    /// Fitness evaluations spent in this generation.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
    pub population: Vec<Firefly>,
}

/// New position of `xi` after being attracted to the brighter `xj`:
/// `xi + beta0 exp(-gamma r^2) (xj - xi) + alpha (u - 1/2)` with one
/// uniform draw `u` per coordinate, clamped to the bounds.
pub fn move_toward<R: Rng + ?Sized>(xi: &[f64], xj: &[f64], config: &FaConfig, rng: &mut R) -> Vec<f64> {
    let r2: f64 = xi.iter().zip(xj).map(|(a, b)| (b - a) * (b - a)).sum();
    let attraction = config.beta0 * (-config.gamma * r2).exp();
    xi.iter()
        .zip(xj)
        .zip(&config.bounds)
        .map(|((&a, &b), &(lo, hi))| {
            let noise = config.alpha * (rng.random::<f64>() - 0.5);
            (a + attraction * (b - a) + noise).clamp(lo, hi)
        })
        .collect()
}

fn evaluate<F: FnMut(&[f64]) -> f64>(fitness: &mut F, x: &[f64]) -> f64 {
    let v = fitness(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `fitness` over the configured box. NaN fitness values count as
/// `+inf`.
pub fn optimize<F: FnMut(&[f64]) -> f64>(mut fitness: F, config: &FaConfig) -> Result<FaOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population: Vec<Firefly> = (0..config.population)
        .map(|_| {
            let position: Vec<f64> = config
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            let intensity = evaluate(&mut fitness, &position);
            Firefly { position, intensity }
        })
        .collect();

    let mut best = population
        .iter()
        .min_by(|a, b| a.intensity.total_cmp(&b.intensity))
        .cloned()
        .expect("population is non-empty");
    if best.intensity == f64::INFINITY {
        return Err(Error::Optimization("fitness failed for every initial firefly".into()));
    }
    let mut history = vec![GenerationRecord {
        generation: 0,
        best_fitness: best.intensity,
        evaluations: config.population,
    }];

    for generation in 1..=config.max_generations {
        let mut evaluations = 0;
        let n = population.len();
        for i in 0..n {
            let scan = match config.neighbourhood {
                Neighbourhood::All => n,
                Neighbourhood::Earlier => i,
            };
            for j in (0..scan).filter(|&j| j != i) {
                if population[j].intensity < population[i].intensity {
                    let moved = move_toward(&population[i].position, &population[j].position, config, &mut rng);
                    let intensity = evaluate(&mut fitness, &moved);
                    evaluations += 1;
                    population[i] = Firefly {
                        position: moved,
                        intensity,
                    };
                    if intensity < best.intensity {
                        best = population[i].clone();
                    }
                }
            }
        }
        history.push(GenerationRecord {
            generation,
            best_fitness: best.intensity,
            evaluations,
        });
    }

    Ok(FaOutcome {
        best_position: best.position,
        best_fitness: best.intensity,
        history,
        population,
    })
}
