//! Exhaustive enumeration of protocol histories under an outcome law, the
//! statistics read off the resulting ensembles, and the check that the
//! tree-level ensemble agrees with a genuine sequential quantum realization.
//!
//! A history is one complete root-to-leaf assignment of outcomes. Under the
//! orthodox law its weight is the product of branch probabilities; under a
//! biased law that product is multiplied by `1 + beta * valence` at the
//! terminal experience and the whole ensemble is renormalized. Bias never
//! touches interior branches, which is what keeps unconditioned early
//! marginals intact.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, Projector, ZERO_PROBABILITY_EPSILON};
use crate::measurement::{collapse, MeasurementRecord, OutcomeFamily};
use crate::policy::ChoicePolicy;
use crate::protocols::{EventNode, ProtocolSpec};

/// A predicate over complete histories, used for hit definitions and
/// conditioning. A referenced variable missing from the history makes the
/// predicate false rather than an error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    True,
    /// The variable's outcome lies in the given label set.
    Outcome { variable: String, any_of: BTreeSet<String> },
    /// Two variables resolved to the same label.
    VariablesEqual { left: String, right: String },
    All(Vec<Predicate>),
}

impl Predicate {
    pub fn matches_path(&self, path: &[(String, String)]) -> bool {
        let lookup = |var: &str| {
            path.iter().find(|(v, _)| v == var).map(|(_, out)| out.as_str())
        };
        match self {
            Predicate::True => true,
            Predicate::Outcome { variable, any_of } => {
                lookup(variable).is_some_and(|out| any_of.contains(out))
            }
            Predicate::VariablesEqual { left, right } => match (lookup(left), lookup(right)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
            Predicate::All(parts) => parts.iter().all(|p| p.matches_path(path)),
        }
    }
}

/// One complete run: outcomes in event order plus the history's normalized
/// ensemble weight.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    outcomes: Vec<(String, String)>,
    weight: f64,
}

impl History {
    pub fn outcomes(&self) -> &[(String, String)] {
        &self.outcomes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn outcome_of(&self, variable: &str) -> Option<&str> {
        self.outcomes
            .iter()
            .find(|(v, _)| v == variable)
            .map(|(_, out)| out.as_str())
    }

    pub fn matches(&self, predicate: &Predicate) -> bool {
        predicate.matches_path(&self.outcomes)
    }
}

/// All nonzero-weight histories of a protocol under one outcome law,
/// normalized to total weight one. `normalization` keeps the pre-division
/// total: exactly the biased law's partition sum, 1 for the orthodox law up
/// to rounding.
#[derive(Clone, Debug)]
pub struct HistoryEnsemble {
    histories: Vec<History>,
    normalization: f64,
}

impl HistoryEnsemble {
    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    /// Total weight before normalization.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn probability_of(&self, predicate: &Predicate) -> f64 {
        self.histories
            .iter()
            .filter(|h| h.matches(predicate))
            .map(History::weight)
            .sum()
    }

    /// Weight of each label of one variable. Every history must carry the
    /// variable.
    pub fn marginal(&self, variable: &str) -> Result<BTreeMap<String, f64>> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for h in &self.histories {
            let label = h.outcome_of(variable).ok_or_else(|| {
                Error::ProtocolMalformed(format!(
                    "variable {variable:?} does not occur in every history"
                ))
            })?;
            *out.entry(label.to_string()).or_insert(0.0) += h.weight;
        }
        Ok(out)
    }

    /// Ensemble average of an arbitrary per-history score.
    pub fn expectation(&self, score: impl Fn(&History) -> f64) -> f64 {
        self.histories.iter().map(|h| h.weight * score(h)).sum()
    }
}

/// Enumerates every history of the protocol and weights it under the given
/// outcome law. The valence entering the biased factor comes from the
/// protocol's own valence function; zero-probability branches are pruned.
pub fn enumerate_ensemble(
    protocol: &ProtocolSpec,
    policy: &ChoicePolicy,
) -> Result<HistoryEnsemble> {
    protocol.validate()?;
    let mut histories = Vec::with_capacity(protocol.leaf_count() as usize);
    let mut path: Vec<(String, String)> = Vec::new();
    walk_full(protocol, policy, protocol.root(), 1.0, &mut path, &mut histories);
    let normalization: f64 = histories.iter().map(|h| h.weight).sum();
    if normalization <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::DegenerateInput(format!(
            "the outcome law suppresses every history of {:?} (total weight {normalization})",
            protocol.name()
        )));
    }
    for h in &mut histories {
        h.weight /= normalization;
    }
    Ok(HistoryEnsemble { histories, normalization })
}

fn walk_full(
    protocol: &ProtocolSpec,
    policy: &ChoicePolicy,
    node: &EventNode,
    weight: f64,
    path: &mut Vec<(String, String)>,
    out: &mut Vec<History>,
) {
    for (i, label) in node.outcomes().iter().enumerate() {
        let p = node.branch_probabilities()[i];
        if p <= 0.0 {
            continue;
        }
        path.push((node.variable().to_string(), label.clone()));
        if node.is_experience() {
            let valence = protocol.valence_of(path);
            let factor = policy.experience_factor(valence);
            out.push(History { outcomes: path.clone(), weight: weight * p * factor });
        } else {
            walk_full(protocol, policy, &node.children()[i], weight * p, path, out);
        }
        path.pop();
    }
}

/// Histories cut off just before the terminal experience, weighted by the
/// orthodox product alone. This is what an early observer holds before the
/// felt outcome exists, so no law-dependent factor can appear here.
fn enumerate_truncated(protocol: &ProtocolSpec) -> Result<Vec<History>> {
    protocol.validate()?;
    fn walk(
        node: &EventNode,
        weight: f64,
        path: &mut Vec<(String, String)>,
        out: &mut Vec<History>,
    ) {
        if node.is_experience() {
            out.push(History { outcomes: path.clone(), weight });
            return;
        }
        for (i, label) in node.outcomes().iter().enumerate() {
            let p = node.branch_probabilities()[i];
            if p <= 0.0 {
                continue;
            }
            path.push((node.variable().to_string(), label.clone()));
            walk(&node.children()[i], weight * p, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(protocol.root(), 1.0, &mut Vec::new(), &mut out);
    let total: f64 = out.iter().map(|h| h.weight).sum();
    if total <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::DegenerateInput(
            "every pre-experience branch of the protocol has zero probability".into(),
        ));
    }
    for h in &mut out {
        h.weight /= total;
    }
    Ok(out)
}

/// Rate of `event` among histories satisfying `condition`.
pub fn conditional_rate(
    ensemble: &HistoryEnsemble,
    condition: &Predicate,
    event: &Predicate,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for h in ensemble.histories() {
        if h.matches(condition) {
            den += h.weight;
            if h.matches(event) {
                num += h.weight;
            }
        }
    }
    if den <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::ZeroProbabilityOutcome(format!(
            "conditioning event has weight {den}, cannot form a rate"
        )));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Gap between each pre-experience variable's marginal in the full ensemble
/// under `policy` and in the experience-free truncation. Orthodox gaps are
/// rounding noise; biased gaps quantify how far the law's reweighting
/// reaches back once the felt outcome is included.
pub fn marginal_gaps(
    protocol: &ProtocolSpec,
    policy: &ChoicePolicy,
) -> Result<BTreeMap<String, f64>> {
    let full = enumerate_ensemble(protocol, policy)?;
    let truncated = enumerate_truncated(protocol)?;
    let mut variables: Vec<String> = Vec::new();
    for h in &truncated {
        for (var, _) in h.outcomes() {
            if !variables.contains(var) {
                variables.push(var.clone());
            }
        }
    }
    let mut gaps = BTreeMap::new();
    for var in variables {
        let mut truncated_marginal: BTreeMap<&str, f64> = BTreeMap::new();
        for h in &truncated {
            let label = h.outcome_of(&var).ok_or_else(|| {
                Error::ProtocolMalformed(format!(
                    "variable {var:?} does not occur in every pre-experience history"
                ))
            })?;
            *truncated_marginal.entry(label).or_insert(0.0) += h.weight();
        }
        let full_marginal = full.marginal(&var)?;
        let mut gap: f64 = 0.0;
        for (label, p_full) in &full_marginal {
            let p_trunc = truncated_marginal.get(label.as_str()).copied().unwrap_or(0.0);
            gap = gap.max((p_full - p_trunc).abs());
        }
        for (label, p_trunc) in &truncated_marginal {
            if !full_marginal.contains_key(*label) {
                gap = gap.max(p_trunc.abs());
            }
        }
        gaps.insert(var, gap);
    }
    Ok(gaps)
}

/// Marginal gap of one pre-experience variable; see [`marginal_gaps`].
pub fn no_signaling_gap(
    protocol: &ProtocolSpec,
    early_variable: &str,
    policy: &ChoicePolicy,
) -> Result<f64> {
    marginal_gaps(protocol, policy)?
        .remove(early_variable)
        .ok_or_else(|| {
            Error::ProtocolMalformed(format!(
                "variable {early_variable:?} is not available before the terminal experience"
            ))
        })
}

/// Largest marginal gap over every pre-experience variable.
pub fn max_marginal_gap(protocol: &ProtocolSpec, policy: &ChoicePolicy) -> Result<f64> {
    Ok(marginal_gaps(protocol, policy)?
        .values()
        .fold(0.0, |acc, g| acc.max(*g)))
}

/// Difference in hit rate between histories satisfying the protocol's hit
/// condition and those satisfying its complement. `None` when the protocol
/// reports an unconditional rate or the condition has no complement to
/// compare against. Under a biased law this gap is the protocol's
/// conditioned signature; under the orthodox law it vanishes for the
/// designs built here.
pub fn conditional_signaling_gap(
    protocol: &ProtocolSpec,
    policy: &ChoicePolicy,
) -> Result<Option<f64>> {
    let (variable, any_of) = match protocol.hit_condition() {
        Predicate::Outcome { variable, any_of } => (variable, any_of),
        _ => return Ok(None),
    };
    let ensemble = enumerate_ensemble(protocol, policy)?;
    let complement: BTreeSet<String> = ensemble
        .marginal(variable)?
        .into_keys()
        .filter(|label| !any_of.contains(label))
        .collect();
    if complement.is_empty() {
        return Ok(None);
    }
    let conditioned = conditional_rate(&ensemble, protocol.hit_condition(), protocol.hit())?;
    let complement_pred = Predicate::Outcome {
        variable: variable.clone(),
        any_of: complement,
    };
    let complemented = conditional_rate(&ensemble, &complement_pred, protocol.hit())?;
    Ok(Some((conditioned - complemented).abs()))
}

/// One forward pass through the tree under the orthodox law, consuming one
/// uniform draw per event. Serves sampling runs whose trees are too large
/// to enumerate.
pub fn sample_orthodox_history(
    protocol: &ProtocolSpec,
    rng: &mut impl Rng,
) -> Result<Vec<(String, String)>> {
    let mut node = protocol.root();
    let mut path = Vec::new();
    loop {
        let idx = crate::policy::sample_outcome(node.branch_probabilities(), rng.gen::<f64>())?;
        path.push((node.variable().to_string(), node.outcomes()[idx].clone()));
        if node.is_experience() {
            return Ok(path);
        }
        node = &node.children()[idx];
    }
}

/// Largest product state dimension the sequential realization will build.
pub const REALIZATION_DIM_LIMIT: u128 = 512;

/// Hilbert space dimension of the protocol's product-basis realization.
pub fn realization_dimension(protocol: &ProtocolSpec) -> Result<u128> {
    let (order, alphabets) = aligned_alphabets(protocol)?;
    Ok(order
        .iter()
        .map(|var| alphabets[var].len() as u128)
        .product())
}

/// Outcome labels per variable, keyed by variable name.
type OutcomeAlphabets = BTreeMap<String, Vec<String>>;

/// Event order shared by all paths plus each variable's outcome alphabet in
/// first-appearance order.
fn aligned_alphabets(protocol: &ProtocolSpec) -> Result<(Vec<String>, OutcomeAlphabets)> {
    protocol.validate()?;
    fn walk(
        node: &EventNode,
        prefix: &mut Vec<String>,
        order: &mut Option<Vec<String>>,
        alphabets: &mut OutcomeAlphabets,
    ) -> Result<()> {
        prefix.push(node.variable().to_string());
        let slot = alphabets.entry(node.variable().to_string()).or_default();
        for label in node.outcomes() {
            if !slot.contains(label) {
                slot.push(label.clone());
            }
        }
        if node.is_experience() {
            match order {
                None => *order = Some(prefix.clone()),
                Some(seen) if seen == prefix => {}
                Some(seen) => {
                    return Err(Error::ProtocolMalformed(format!(
                        "event order differs between paths ({seen:?} vs {prefix:?}); \
                         the sequential realization needs one aligned order"
                    )));
                }
            }
        } else {
            for child in node.children() {
                walk(child, prefix, order, alphabets)?;
            }
        }
        prefix.pop();
        Ok(())
    }
    let mut order = None;
    let mut alphabets = BTreeMap::new();
    walk(protocol.root(), &mut Vec::new(), &mut order, &mut alphabets)?;
    let order = order.ok_or_else(|| {
        Error::ProtocolMalformed("protocol has no complete path".into())
    })?;
    Ok((order, alphabets))
}

/// A complete sequential run of the realization: outcome path, final
/// weight, and the per-step measurement records.
pub type SequentialRun = (Vec<(String, String)>, f64, Vec<MeasurementRecord>);

/// Realizes the protocol as a diagonal mixed state on the product basis of
/// its variables and measures the variables one by one with genuine
/// projective collapse. Returns every nonzero outcome path with its
/// probability and measurement records.
pub fn sequential_distribution(protocol: &ProtocolSpec) -> Result<Vec<SequentialRun>> {
    let ensemble = enumerate_ensemble(protocol, &ChoicePolicy::orthodox())?;
    let (order, alphabets) = aligned_alphabets(protocol)?;
    let wide_dim: u128 = order
        .iter()
        .map(|var| alphabets[var].len() as u128)
        .product();
    if wide_dim > REALIZATION_DIM_LIMIT {
        return Err(Error::ProtocolMalformed(format!(
            "realization dimension {wide_dim} exceeds the limit {REALIZATION_DIM_LIMIT}"
        )));
    }
    let dim = wide_dim as usize;
    let dims: Vec<usize> = order.iter().map(|var| alphabets[var].len()).collect();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }

    let mut diagonal = vec![0.0f64; dim];
    for h in ensemble.histories() {
        let mut flat = 0usize;
        for (k, var) in order.iter().enumerate() {
            let label = h.outcome_of(var).expect("aligned paths carry every variable");
            let digit = alphabets[var]
                .iter()
                .position(|l| l == label)
                .expect("alphabets cover every observed label");
            flat += digit * strides[k];
        }
        diagonal[flat] += h.weight();
    }
    let state = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&diagonal))?;

    let mut families = Vec::with_capacity(order.len());
    for (k, var) in order.iter().enumerate() {
        let members = alphabets[var]
            .iter()
            .enumerate()
            .map(|(digit, label)| {
                let matrix = ComplexMatrix::from_fn(dim, |r, c| {
                    let hit = r == c && (r / strides[k]) % dims[k] == digit;
                    num_complex::Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0)
                });
                Projector::new(matrix).map(|proj| (label.clone(), proj))
            })
            .collect::<Result<Vec<_>>>()?;
        families.push(OutcomeFamily::new(members)?);
    }

    let mut runs = Vec::new();
    let mut path = Vec::new();
    let mut records = Vec::new();
    descend(
        &state,
        1.0,
        0,
        &order,
        &families,
        &mut path,
        &mut records,
        &mut runs,
    )?;
    Ok(runs)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    state: &DensityMatrix,
    weight: f64,
    step: usize,
    order: &[String],
    families: &[OutcomeFamily],
    path: &mut Vec<(String, String)>,
    records: &mut Vec<MeasurementRecord>,
    runs: &mut Vec<SequentialRun>,
) -> Result<()> {
    if step == order.len() {
        runs.push((path.clone(), weight, records.clone()));
        return Ok(());
    }
    for (label, projector) in families[step].entries() {
        let born = crate::measurement::born_probability(state, projector)?;
        if born <= ZERO_PROBABILITY_EPSILON {
            continue;
        }
        let (post, prob) = collapse(state, projector)?;
        path.push((order[step].clone(), label.clone()));
        records.push(MeasurementRecord {
            process_time: step as u64,
            question_label: order[step].clone(),
            outcome_label: label.clone(),
            born_probability: born,
            applied_weight: prob,
        });
        descend(&post, weight * prob, step + 1, order, families, path, records, runs)?;
        records.pop();
        path.pop();
    }
    Ok(())
}

/// Total variation distance between the orthodox tree ensemble and the
/// sequential collapse realization of the same protocol. Zero up to
/// rounding whenever the tree law is consistent with standard quantum
/// measurement.
pub fn sequential_equivalence_distance(protocol: &ProtocolSpec) -> Result<f64> {
    let ensemble = enumerate_ensemble(protocol, &ChoicePolicy::orthodox())?;
    let runs = sequential_distribution(protocol)?;
    let mut table: BTreeMap<Vec<(String, String)>, (f64, f64)> = BTreeMap::new();
    for h in ensemble.histories() {
        table.entry(h.outcomes().to_vec()).or_insert((0.0, 0.0)).0 += h.weight();
    }
    for (path, weight, _) in &runs {
        table.entry(path.clone()).or_insert((0.0, 0.0)).1 += weight;
    }
    Ok(0.5 * table.values().map(|(a, b)| (a - b).abs()).sum::<f64>())
}
