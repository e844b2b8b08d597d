//! Corpus-level attack harness: run one attack per sample and aggregate
//! success rates and query counts, the shape of the published result tables.

use rayon::prelude::*;

use crate::attack::{attack_digital, attack_robust, AttackConfig, AttackReport};
use crate::classifier::Classifier;
use crate::dataio::Corpus;
use crate::error::{Error, Result};

/// Aggregated outcome of attacking every sample in a corpus.
#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub reports: Vec<AttackReport>,
    /// Percentage of samples whose shadowed version is misclassified.
    pub success_rate_percent: f64,
    /// Mean queries over successful attacks only; absent when none succeed.
    pub mean_queries_at_success: Option<f64>,
}

impl BenchSummary {
    fn from_reports(reports: Vec<AttackReport>) -> Self {
        let successes: Vec<&AttackReport> = reports.iter().filter(|r| r.success).collect();
        let success_rate_percent = 100.0 * successes.len() as f64 / reports.len() as f64;
        let mean_queries_at_success = (!successes.is_empty()).then(|| {
            successes.iter().map(|r| r.queries_used as f64).sum::<f64>() / successes.len() as f64
        });
        Self { reports, success_rate_percent, mean_queries_at_success }
    }
}

/// Mix a per-sample seed out of the run seed; the per-image searches stay
/// deterministic regardless of scheduling.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 round
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Attack every sample in the corpus with per-sample seeds derived from
/// `base_seed`. Samples run in parallel on the ambient rayon pool; reports
/// come back in corpus order.
pub fn attack_corpus<C: Classifier + Sync>(
    corpus: &Corpus,
    classifier: &C,
    cfg: &AttackConfig,
    base_seed: u64,
) -> Result<BenchSummary> {
    if corpus.samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let reports: Result<Vec<AttackReport>> = corpus
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut cfg = cfg.clone();
            cfg.swarm.seed = derive_seed(base_seed, i as u64);
            if cfg.use_eot {
                let plan_seed = derive_seed(base_seed, (i as u64) | (1 << 63));
                attack_robust(&sample.image, sample.label, &sample.mask, classifier, &cfg, plan_seed)
            } else {
                attack_digital(&sample.image, sample.label, &sample.mask, classifier, &cfg)
            }
        })
        .collect();
    Ok(BenchSummary::from_reports(reports?))
}
