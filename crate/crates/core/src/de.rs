//! Differential evolution (`best/1/bin`, dithered mutation) for small
//! bounded problems.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeSettings {
    pub population_size: usize,
    pub mutation_range: (f64, f64),
    pub crossover_rate: f64,
    pub max_generations: usize,
    /// Stop once `std(energies) ≤ tol · |mean(energies)|`.
    pub convergence_tol: f64,
    pub rng_seed: u64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self {
            population_size: 32,
            mutation_range: (0.5, 1.0),
            crossover_rate: 0.9,
            max_generations: 200,
            convergence_tol: 1e-9,
            rng_seed: 42,
        }
    }
}

impl DeSettings {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.mutation_range;
        if self.population_size < 8 {
            return Err(invalid("population_size must be at least 8"));
        }
        if !(0.0 < lo && lo <= hi && hi <= 2.0) {
            return Err(invalid("mutation range must satisfy 0 < low <= high <= 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(invalid("crossover_rate must lie in [0, 1]"));
        }
        if self.max_generations == 0 {
            return Err(invalid("max_generations must be positive"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(invalid("convergence_tol must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self { rng_seed, ..*self }
    }
}

/// One search dimension. Periodic dimensions wrap; others are resampled
/// uniformly when a trial leaves the interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: false }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: true }
    }

    fn repair(&self, x: f64, rng: &mut impl Rng) -> f64 {
        if x >= self.lo && x <= self.hi {
            return x;
        }
        if self.periodic {
            let w = self.hi - self.lo;
            self.lo + (x - self.lo).rem_euclid(w)
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub generations: usize,
    pub evaluations: usize,
}

/// Minimizes `f` over the box `bounds`. `anchors` replace the first members
/// of the random initial population. Non-finite values count as `+∞`.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    bounds: &[Bound],
    anchors: &[Vec<f64>],
    settings: &DeSettings,
) -> Result<DeOutcome> {
    settings.validate()?;
    if bounds.is_empty() {
        return Err(invalid("at least one dimension required"));
    }
    if bounds.iter().any(|b| !(b.lo < b.hi)) {
        return Err(invalid("every bound needs lo < hi"));
    }
    let dims = bounds.len();
    let np = settings.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed);
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut evaluations = 0;

    let mut pop: Vec<Vec<f64>> =
        (0..np).map(|_| bounds.iter().map(|b| rng.random_range(b.lo..=b.hi)).collect()).collect();
    for (slot, anchor) in pop.iter_mut().zip(anchors) {
        if anchor.len() != dims {
            return Err(invalid("anchor dimension does not match bounds"));
        }
        *slot = anchor.iter().zip(bounds).map(|(&x, b)| b.repair(x, &mut rng)).collect();
    }
    let mut energies: Vec<f64> = pop.iter().map(|x| eval(x, &mut evaluations)).collect();
    let mut best = argmin(&energies);

    let pick = Uniform::new(0, np).expect("np >= 8");
    let (flo, fhi) = settings.mutation_range;
    let mut generations = 0;
    let mut converged = spread_converged(&energies, settings.convergence_tol);
    while !converged && generations < settings.max_generations {
        generations += 1;
        let scale = if fhi > flo { rng.random_range(flo..fhi) } else { flo };
        for i in 0..np {
            let (r1, r2) = loop {
                let a = pick.sample(&mut rng);
                let b = pick.sample(&mut rng);
                if a != b && a != i && b != i {
                    break (a, b);
                }
            };
            let forced = rng.random_range(0..dims);
            let mut trial = pop[i].clone();
            for d in 0..dims {
                if d == forced || rng.random::<f64>() < settings.crossover_rate {
                    let v = pop[best][d] + scale * (pop[r1][d] - pop[r2][d]);
                    trial[d] = bounds[d].repair(v, &mut rng);
                }
            }
            let e = eval(&trial, &mut evaluations);
            if e <= energies[i] {
                pop[i] = trial;
                energies[i] = e;
                if e < energies[best] {
                    best = i;
                }
            }
        }
        converged = spread_converged(&energies, settings.convergence_tol);
    }

    Ok(DeOutcome { x: pop[best].clone(), value: energies[best], converged, generations, evaluations })
}

fn argmin(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc }).0
}

fn spread_converged(energies: &[f64], tol: f64) -> bool {
    if energies.iter().any(|e| !e.is_finite()) {
        return false;
    }
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    var.sqrt() <= tol * mean.abs()
}
