//! Sampling estimates of the expected payoff of an induced chain.
//!
//! A sampled play stops at a terminal state or as soon as it enters a bottom
//! strongly connected component. From there the play stays in the component
//! forever and visits its largest priority infinitely often with probability
//! one, so the parity payoff is known without truncating the play.
//!
//! Randomness comes from ChaCha8. Sample `i` of an estimate belongs to batch
//! `i / BATCH`; batch `b` uses stream `b` of the generator seeded with the
//! user seed, so results do not depend on how batches are scheduled.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::solver::{AbsorbingClass, InducedChain};

/// Walks longer than this signal a broken chain analysis.
pub const STEP_CAP: u64 = 10_000_000;

/// Samples per independently seeded batch.
pub const BATCH: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("play exceeded {0} steps without reaching an absorbing class")]
    StepCap(u64),
    #[error("sample count must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlayOutcome {
    pub payoff: f64,
    pub steps: u64,
    #[serde(skip)]
    pub class: AbsorbingClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Chain plus precomputed absorbing classes and cumulative weights.
#[derive(Debug, Clone)]
pub struct Sampler {
    rows: Vec<Vec<(usize, f64)>>,
    class: Vec<Option<(AbsorbingClass, f64)>>,
}

impl Sampler {
    pub fn new(chain: &InducedChain) -> Sampler {
        let rows = chain
            .rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|(t, p)| {
                        acc += p.value();
                        (*t, acc)
                    })
                    .collect()
            })
            .collect();
        let class = chain
            .absorbing_classes()
            .into_iter()
            .map(|c| c.map(|c| (c, chain.class_payoff(c))))
            .collect();
        Sampler { rows, class }
    }

    /// Payoffs a play can end with.
    pub fn achievable_payoffs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.class.iter().flatten().map(|(_, p)| *p).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<PlayOutcome, SimulationError> {
        let mut s = 0;
        let mut steps = 0;
        loop {
            if let Some((class, payoff)) = self.class[s] {
                return Ok(PlayOutcome {
                    payoff,
                    steps,
                    class,
                });
            }
            if steps == STEP_CAP {
                return Err(SimulationError::StepCap(STEP_CAP));
            }
            let row = &self.rows[s];
            s = if row.len() == 1 {
                row[0].0
            } else {
                let total = row.last().unwrap().1;
                let u: f64 = rng.gen::<f64>() * total;
                row.iter().find(|(_, c)| u < *c).unwrap_or(row.last().unwrap()).0
            };
            steps += 1;
        }
    }

    pub fn estimate(
        &self,
        n: u64,
        seed: u64,
        execution: Execution,
    ) -> Result<Estimate, SimulationError> {
        if n == 0 {
            return Err(SimulationError::NoSamples);
        }
        let batches = n.div_ceil(BATCH);
        let partial = execution.map_range(0, batches, |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BATCH.min(n - b * BATCH);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let x = self.sample(&mut rng)?.payoff;
                sum += x;
                sum_sq += x * x;
            }
            Ok((sum, sum_sq))
        });
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for r in partial {
            let (s, q) = r?;
            sum += s;
            sum_sq += q;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let stderr = if n > 1 {
            let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        } else {
            0.0
        };
        Ok(Estimate {
            mean,
            stderr,
            samples: n,
        })
    }
}

pub fn sample_play(chain: &InducedChain, rng: &mut impl Rng) -> Result<PlayOutcome, SimulationError> {
    Sampler::new(chain).sample(rng)
}

/// Mean and standard error of `n` sampled payoffs; deterministic in `seed`.
pub fn estimate(chain: &InducedChain, n: u64, seed: u64) -> Result<Estimate, SimulationError> {
    Sampler::new(chain).estimate(n, seed, Execution::default())
}
