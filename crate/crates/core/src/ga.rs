//! Real-coded genetic algorithm over box-bounded gene vectors.
//!
//! Tournament-3 selection, per-gene blend crossover, Gaussian mutation
//! clamped to bounds, elitism. Fitness is maximized; imputation callers pass
//! negated reconstruction error. Fitness evaluation of a generation may run
//! in parallel (the function must be `Sync`), but every evolutionary state
//! transition draws from a single sequential RNG, so results are identical
//! across thread counts.

use crate::par::map_indexed;
use crate::seeding::{standard_normal, stream_rng, STREAM_GA};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum GaError {
    #[error("bounds are empty")]
    EmptyBounds,
    #[error("fitness returned a non-finite value for genes {genes:?}")]
    NonFiniteFitness { genes: Vec<f64> },
    #[error("bad config: {0}")]
    BadConfig(String),
}

/// Genetic search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 20,
            crossover_rate: 0.8,
            mutation_rate: 0.05,
            elitism: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    fn validate(&self) -> Result<(), GaError> {
        if self.population < 2 {
            return Err(GaError::BadConfig("population must be >= 2".into()));
        }
        if self.elitism >= self.population {
            return Err(GaError::BadConfig("elitism must be < population".into()));
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GaError::BadConfig(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Per-gene `[lo, hi]` search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds(Vec<(f64, f64)>);

impl SearchBounds {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, GaError> {
        if bounds.is_empty() {
            return Err(GaError::EmptyBounds);
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(GaError::BadConfig(format!("bad gene bounds {lo}..{hi}")));
            }
        }
        Ok(Self(bounds))
    }

    /// The `[0, 1]` box in `n` dimensions.
    pub fn unit_box(n: usize) -> Result<Self, GaError> {
        Self::new(vec![(0.0, 1.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn contains(&self, genes: &[f64]) -> bool {
        genes.len() == self.0.len()
            && genes
                .iter()
                .zip(&self.0)
                .all(|(g, &(lo, hi))| *g >= lo && *g <= hi)
    }

    fn clamp(&self, genes: &mut [f64]) {
        for (g, &(lo, hi)) in genes.iter_mut().zip(&self.0) {
            *g = g.clamp(lo, hi);
        }
    }
}

/// Search result: the best individual ever seen and the per-generation best
/// fitness trace (entry 0 is the initial population's best).
#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best_genes: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<f64>,
}

const TOURNAMENT: usize = 3;
const MUTATION_SIGMA_FRAC: f64 = 0.1;

fn evaluate<F>(fitness: &F, pop: &[Vec<f64>]) -> Result<Vec<f64>, GaError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let scores = map_indexed(pop.len(), |i| fitness(&pop[i]));
    for (i, s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(GaError::NonFiniteFitness { genes: pop[i].clone() });
        }
    }
    Ok(scores)
}

/// Ranks indices best-first; ties break toward the lower index so ordering
/// never depends on float quirks.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Maximizes `fitness` over the bounded box. Deterministic per config seed.
pub fn run_ga<F>(fitness: F, bounds: &SearchBounds, cfg: &GaConfig) -> Result<GaOutcome, GaError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let n_genes = bounds.len();
    let mut rng = stream_rng(cfg.seed, STREAM_GA);

    let mut pop: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| {
            (0..n_genes)
                .map(|g| {
                    let (lo, hi) = bounds.get(g);
                    if lo == hi {
                        lo
                    } else {
                        rng.gen_range(lo..hi)
                    }
                })
                .collect()
        })
        .collect();
    let mut scores = evaluate(&fitness, &pop)?;

    let mut order = ranked(&scores);
    let mut best_genes = pop[order[0]].clone();
    let mut best_fitness = scores[order[0]];
    let mut history = Vec::with_capacity(cfg.generations + 1);
    history.push(best_fitness);

    for _ in 0..cfg.generations {
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
        for &e in order.iter().take(cfg.elitism) {
            next.push(pop[e].clone());
        }
        let tournament = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
            let mut best = rng.gen_range(0..cfg.population);
            for _ in 1..TOURNAMENT {
                let c = rng.gen_range(0..cfg.population);
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            best
        };
        while next.len() < cfg.population {
            let p1 = tournament(&mut rng);
            let p2 = tournament(&mut rng);
            let (mut c1, mut c2) = (pop[p1].clone(), pop[p2].clone());
            if rng.gen::<f64>() < cfg.crossover_rate {
                for g in 0..n_genes {
                    let alpha: f64 = rng.gen();
                    let (a, b) = (pop[p1][g], pop[p2][g]);
                    c1[g] = alpha * a + (1.0 - alpha) * b;
                    c2[g] = (1.0 - alpha) * a + alpha * b;
                }
            }
            for child in [&mut c1, &mut c2] {
                for g in 0..n_genes {
                    if rng.gen::<f64>() < cfg.mutation_rate {
                        let (lo, hi) = bounds.get(g);
                        child[g] += MUTATION_SIGMA_FRAC * (hi - lo) * standard_normal(&mut rng);
                    }
                }
                bounds.clamp(child);
            }
            next.push(c1);
            if next.len() < cfg.population {
                next.push(c2);
            }
        }
        pop = next;
        scores = evaluate(&fitness, &pop)?;
        order = ranked(&scores);
        if scores[order[0]] > best_fitness {
            best_fitness = scores[order[0]];
            best_genes = pop[order[0]].clone();
        }
        history.push(scores[order[0]]);
    }

    Ok(GaOutcome { best_genes, best_fitness, history })
}
