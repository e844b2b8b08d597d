//! Gradient-free particle swarm search over bounded real vectors, with an
//! early-exit predicate and random restarts.
//!
//! Each candidate is scored by a single evaluation that returns both its
//! cost and whether it already satisfies the caller's stopping condition;
//! combining the two keeps expensive black-box evaluations down to one per
//! candidate. Evaluations run sequentially, so the evaluation closure may
//! hold mutable state; callers wanting parallelism run whole searches
//! concurrently instead.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The outcome of scoring one candidate position.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub cost: f64,
    /// True when this position already achieves the caller's goal; the
    /// search returns it immediately.
    pub stop: bool,
}

impl Evaluation {
    /// Score a position with no stopping condition.
    pub fn cost_only(cost: f64) -> Self {
        Self { cost, stop: false }
    }
}

/// Swarm hyperparameters. The inertia weight decays linearly from
/// `inertia_start` to `inertia_end` over the iterations of each restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    pub max_iters: usize,
    /// Velocity bound, as a fraction of each dimension's bound width.
    pub velocity_clamp: f64,
    /// Total runs: the first plus up to `restarts - 1` reinitializations.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            swarm_size: 40,
            inertia_start: 0.7,
            inertia_end: 0.3,
            cognitive: 1.5,
            social: 1.5,
            max_iters: 100,
            velocity_clamp: 0.25,
            restarts: 5,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    fn validate(&self) -> Result<()> {
        if self.swarm_size == 0
            || self.max_iters == 0
            || self.restarts == 0
            || self.velocity_clamp <= 0.0
            || self.inertia_start < 0.0
            || self.inertia_end < 0.0
            || self.cognitive < 0.0
            || self.social < 0.0
        {
            return Err(Error::InvalidConfig(format!("bad swarm config: {self:?}")));
        }
        Ok(())
    }
}

/// Result of a [`minimize`] call.
///
/// `iterations_used` counts update iterations within the winning restart
/// (0 means the initial sweep already stopped); `evaluations_used` counts
/// every cost evaluation across all restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    pub iterations_used: usize,
    pub evaluations_used: u64,
    pub early_exit: bool,
    pub restart_index: usize,
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_cost: f64,
}

/// Minimize `eval` cost over the box `bounds` with the standard update
/// v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x), positions clamped to
/// the bounds. Returns as soon as any evaluated position reports `stop`,
/// otherwise reinitializes up to `restarts - 1` times and reports the best
/// position seen anywhere. Deterministic for a fixed seed.
pub fn minimize<F>(mut eval: F, bounds: &[(f64, f64)], cfg: &SwarmConfig) -> Result<OptimizationResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    cfg.validate()?;
    if bounds.is_empty() {
        return Err(Error::InvalidBounds { dim: 0, lo: 0.0, hi: 0.0 });
    }
    for (dim, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidBounds { dim, lo, hi });
        }
    }

    let dims = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluations: u64 = 0;

    let mut overall_best: Option<(Vec<f64>, f64, usize, usize)> = None; // position, cost, restart, iters

    macro_rules! score {
        ($pos:expr, $restart:expr, $iters:expr) => {{
            evaluations += 1;
            match eval($pos) {
                Ok(e) => e,
                Err(source) => {
                    let partial = OptimizationResult {
                        best_position: overall_best.as_ref().map(|b| b.0.clone()).unwrap_or_default(),
                        best_cost: overall_best.as_ref().map_or(f64::INFINITY, |b| b.1),
                        iterations_used: $iters,
                        evaluations_used: evaluations,
                        early_exit: false,
                        restart_index: $restart,
                    };
                    return Err(Error::PsoAborted { partial, source: Box::new(source) });
                }
            }
        }};
    }

    for restart in 0..cfg.restarts {
        // initialization: positions uniform in bounds, velocities uniform
        // within 10% of each bound width
        let mut particles: Vec<Particle> = Vec::with_capacity(cfg.swarm_size);
        let mut global_best: Option<(Vec<f64>, f64)> = None;

        for _ in 0..cfg.swarm_size {
            let position: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            let velocity: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| {
                    let span = 0.1 * (hi - lo);
                    rng.random_range(-span..=span)
                })
                .collect();

            let e = score!(&position, restart, 0);
            if e.stop {
                return Ok(OptimizationResult {
                    best_position: position,
                    best_cost: e.cost,
                    iterations_used: 0,
                    evaluations_used: evaluations,
                    early_exit: true,
                    restart_index: restart,
                });
            }
            if global_best.as_ref().is_none_or(|(_, c)| e.cost < *c) {
                global_best = Some((position.clone(), e.cost));
            }
            particles.push(Particle {
                best_position: position.clone(),
                best_cost: e.cost,
                position,
                velocity,
            });
        }

        for iter in 0..cfg.max_iters {
            let w = if cfg.max_iters > 1 {
                let t = iter as f64 / (cfg.max_iters - 1) as f64;
                cfg.inertia_start + (cfg.inertia_end - cfg.inertia_start) * t
            } else {
                cfg.inertia_start
            };

            for p in 0..cfg.swarm_size {
                let gbest = global_best.as_ref().expect("swarm evaluated").0.clone();
                let particle = &mut particles[p];
                for d in 0..dims {
                    let (lo, hi) = bounds[d];
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let v = w * particle.velocity[d]
                        + cfg.cognitive * r1 * (particle.best_position[d] - particle.position[d])
                        + cfg.social * r2 * (gbest[d] - particle.position[d]);
                    let vmax = cfg.velocity_clamp * (hi - lo);
                    particle.velocity[d] = v.clamp(-vmax, vmax);
                    particle.position[d] = (particle.position[d] + particle.velocity[d]).clamp(lo, hi);
                }

                let position = particles[p].position.clone();
                let e = score!(&position, restart, iter + 1);
                if e.stop {
                    return Ok(OptimizationResult {
                        best_position: position,
                        best_cost: e.cost,
                        iterations_used: iter + 1,
                        evaluations_used: evaluations,
                        early_exit: true,
                        restart_index: restart,
                    });
                }
                let particle = &mut particles[p];
                if e.cost < particle.best_cost {
                    particle.best_cost = e.cost;
                    particle.best_position = position.clone();
                }
                if global_best.as_ref().is_none_or(|(_, c)| e.cost < *c) {
                    global_best = Some((position, e.cost));
                }
            }
        }

        let (pos, cost) = global_best.expect("swarm evaluated");
        // ties across restarts resolve to the earliest restart
        if overall_best.as_ref().is_none_or(|b| cost < b.1) {
            overall_best = Some((pos, cost, restart, cfg.max_iters));
        }
    }

    let (best_position, best_cost, restart_index, iterations_used) =
        overall_best.expect("at least one restart ran");
    Ok(OptimizationResult {
        best_position,
        best_cost,
        iterations_used,
        evaluations_used: evaluations,
        early_exit: false,
        restart_index,
    })
}
