//! Seeded Monte Carlo over protocol ensembles.
//!
//! Small protocols run on the exact path: the ensemble is enumerated once,
//! reduced to a cumulative table, and every trial consumes exactly one
//! uniform draw from its own counter-indexed substream. That makes runs
//! reproducible bit for bit regardless of thread count, because per-trial
//! results depend only on the trial index and hits accumulate as integers.
//!
//! Protocols past the enumeration cap keep running under the orthodox law
//! through per-event sampling (and a dedicated subset sampler for large
//! recall designs); the biased law has no sampling shortcut because its
//! normalization is a property of the whole ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{PolicyKind, RunConfig};
use crate::harness::report::TrialReport;
use crate::harness::stats::wilson_interval;
use crate::histories::{
    conditional_rate, enumerate_ensemble, max_marginal_gap, sample_orthodox_history,
};
use crate::policy::ChoicePolicy;
use crate::protocols::{binomial, recall_standardization, ProtocolSpec};

enum ProtocolModel {
    /// Ensemble fits under the cap: reweighted CDF sampling, exact
    /// statistics available.
    Exact(ProtocolSpec),
    /// Tree too large to enumerate but orthodox: walk it event by event.
    TreeSampled(ProtocolSpec),
    /// Orthodox recall design too large even to build: sample the two
    /// subsets directly.
    SubsetRecall { name: String, n_words: u64, n_recall: u64, n_targets: u64 },
}

fn build_model(config: &RunConfig, policy: &ChoicePolicy) -> Result<ProtocolModel> {
    match config.build_protocol() {
        Ok(spec) => {
            if spec.leaf_count() <= config.enumeration_cap {
                Ok(ProtocolModel::Exact(spec))
            } else if policy.beta() == 0.0 {
                Ok(ProtocolModel::TreeSampled(spec))
            } else {
                Err(Error::ProtocolMalformed(format!(
                    "protocol tree has {} leaves, over the enumeration cap {}; \
                     the biased law needs the exact ensemble",
                    spec.leaf_count(),
                    config.enumeration_cap
                )))
            }
        }
        Err(Error::ProtocolMalformed(_))
            if config.protocol.starts_with("recall") && policy.beta() == 0.0 =>
        {
            let (n_words, n_recall, n_targets) = config.recall_design();
            if n_words > 64 {
                return Err(Error::ConfigError(format!(
                    "the recall sampling fallback supports at most 64 words, got {n_words}"
                )));
            }
            let suffix = if config.protocol.ends_with("-falsified") { "-falsified" } else { "" };
            Ok(ProtocolModel::SubsetRecall {
                name: format!("recall-{n_words}w{n_recall}r{n_targets}t{suffix}"),
                n_words,
                n_recall,
                n_targets,
            })
        }
        Err(e) => Err(e),
    }
}

/// Per-trial substream: the master seed fixes the template, the trial index
/// picks the stream, and the template itself is never advanced.
fn trial_rng(template: &ChaCha8Rng, trial: u64) -> ChaCha8Rng {
    let mut rng = template.clone();
    rng.set_stream(trial);
    rng
}

/// Runs the configured protocol and reports the conditioned hit rate with a
/// Wilson interval. Deterministic in (config, master_seed) and independent
/// of the rayon thread count.
pub fn run_simulation(config: &RunConfig) -> Result<TrialReport> {
    config.validate()?;
    let policy = config.policy()?;
    let model = build_model(config, &policy)?;
    let template = ChaCha8Rng::seed_from_u64(config.master_seed);

    let (name, counts, exact_rate, gap) = match &model {
        ProtocolModel::Exact(spec) => {
            let ensemble = enumerate_ensemble(spec, &policy)?;
            let exact = conditional_rate(&ensemble, spec.hit_condition(), spec.hit())?;
            let gap = max_marginal_gap(spec, &policy)?;
            let mut cdf = Vec::with_capacity(ensemble.len());
            let mut flags = Vec::with_capacity(ensemble.len());
            let mut acc = 0.0;
            for h in ensemble.histories() {
                acc += h.weight();
                cdf.push(acc);
                flags.push((h.matches(spec.hit_condition()), h.matches(spec.hit())));
            }
            let counts = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let draw = trial_rng(&template, trial).gen::<f64>();
                    let idx = cdf.partition_point(|&c| c <= draw).min(cdf.len() - 1);
                    let (cond, hit) = flags[idx];
                    (u64::from(cond), u64::from(cond && hit))
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            (spec.name().to_string(), counts, Some(exact), Some(gap))
        }
        ProtocolModel::TreeSampled(spec) => {
            let counts = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(&template, trial);
                    let path = sample_orthodox_history(spec, &mut rng)
                        .expect("validated protocol trees sample cleanly");
                    let cond = spec.hit_condition().matches_path(&path);
                    let hit = cond && spec.hit().matches_path(&path);
                    (u64::from(cond), u64::from(hit))
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            (spec.name().to_string(), counts, None, None)
        }
        ProtocolModel::SubsetRecall { name, n_words, n_recall, n_targets } => {
            let (mu0, _) = recall_standardization(*n_words, *n_recall, *n_targets);
            let exact = hypergeometric_tail_above(*n_words, *n_recall, *n_targets, mu0);
            let (w, r, t) = (*n_words, *n_recall, *n_targets);
            let counts = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(&template, trial);
                    let recalled = sample_subset_mask(&mut rng, w, r);
                    let targets = sample_subset_mask(&mut rng, w, t);
                    let overlap = (recalled & targets).count_ones() as f64;
                    (1u64, u64::from(overlap > mu0))
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            (name.clone(), counts, Some(exact), None)
        }
    };

    let (conditioned, hits) = counts;
    if conditioned == 0 {
        return Err(Error::ZeroProbabilityOutcome(format!(
            "no trial satisfied the conditioning event in {} trials",
            config.trials
        )));
    }
    let rate = hits as f64 / conditioned as f64;
    let (ci_low, ci_high) = wilson_interval(hits, conditioned, config.confidence)?;
    Ok(TrialReport {
        protocol: name,
        policy: policy.kind_name().to_string(),
        beta: policy.beta(),
        trials: config.trials,
        hits,
        rate,
        ci_low,
        ci_high,
        exact_rate,
        no_signaling_gap: gap,
        seed: config.master_seed,
    })
}

/// One report per bias strength, all legs sharing the master seed so the
/// sweep varies nothing but beta. An empty list yields an empty report.
pub fn sweep_beta(config: &RunConfig, betas: &[f64]) -> Result<Vec<TrialReport>> {
    if config.policy == PolicyKind::Orthodox && betas.iter().any(|b| *b != 0.0) {
        return Err(Error::ConfigError(
            "sweep varies beta, which the orthodox law ignores; set policy to biased".into(),
        ));
    }
    betas
        .iter()
        .map(|&beta| {
            let mut leg = config.clone();
            leg.beta = beta;
            run_simulation(&leg)
        })
        .collect()
}

fn sample_subset_mask(rng: &mut ChaCha8Rng, n: u64, k: u64) -> u64 {
    rand::seq::index::sample(rng, n as usize, k as usize)
        .iter()
        .fold(0u64, |mask, i| mask | (1 << i))
}

/// P(overlap > threshold) when `t` targets are drawn uniformly without
/// replacement from `w` words, `r` of which are marked.
fn hypergeometric_tail_above(w: u64, r: u64, t: u64, threshold: f64) -> f64 {
    let k_min = threshold.floor() as u64 + 1;
    let total = binomial(w, t) as f64;
    (k_min..=r.min(t))
        .map(|k| (binomial(r, k) as f64) * (binomial(w - r, t - k) as f64) / total)
        .sum()
}
