//! The outcome law. Orthodox selection uses raw Born weights; the biased
//! variant tilts them toward felt outcomes, q_i proportional to
//! p_i * (1 + beta * v_i), then renormalizes. beta = 0 reproduces the
//! orthodox law identically, and outcomes of probability zero stay
//! impossible at every beta.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::ZERO_PROBABILITY_EPSILON;

/// Hedonic value of an experienced outcome, in [-1, +1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Valence(f64);

impl Valence {
    pub const NEUTRAL: Valence = Valence(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value.abs() > 1.0 {
            return Err(Error::DegenerateInput(format!(
                "valence must lie in [-1, 1], got {value}"
            )));
        }
        Ok(Self(value))
    }

    /// Clamps into [-1, 1]; infinities clamp to the matching endpoint.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Self(0.0)
        } else {
            Self(value.clamp(-1.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn negated(self) -> Self {
        Self(-self.0)
    }
}

/// Bias strength, in [0, 1]. Zero is the orthodox law.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct BiasParameter(f64);

impl BiasParameter {
    pub const ZERO: BiasParameter = BiasParameter(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::DegenerateInput(format!(
                "bias parameter must lie in [0, 1], got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// How outcome weights are assigned. The biased variant carries an optional
/// label-to-valence map for free-standing weighting of a single outcome
/// family; protocol enumeration ignores the map because each protocol
/// computes valence from the whole history.
#[derive(Clone, Debug)]
pub enum ChoicePolicy {
    Orthodox,
    Biased {
        beta: BiasParameter,
        valence_map: BTreeMap<String, Valence>,
    },
}

impl ChoicePolicy {
    pub fn orthodox() -> Self {
        ChoicePolicy::Orthodox
    }

    pub fn biased(beta: BiasParameter) -> Self {
        ChoicePolicy::Biased { beta, valence_map: BTreeMap::new() }
    }

    pub fn biased_with_map(beta: BiasParameter, valence_map: BTreeMap<String, Valence>) -> Self {
        ChoicePolicy::Biased { beta, valence_map }
    }

    /// Effective bias strength: 0 for the orthodox law.
    pub fn beta(&self) -> f64 {
        match self {
            ChoicePolicy::Orthodox => 0.0,
            ChoicePolicy::Biased { beta, .. } => beta.value(),
        }
    }

    /// Multiplicative history weight for an experienced valence.
    pub fn experience_factor(&self, valence: Valence) -> f64 {
        1.0 + self.beta() * valence.value()
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ChoicePolicy::Orthodox => "orthodox",
            ChoicePolicy::Biased { .. } => "biased",
        }
    }
}

/// Tilts a Born probability vector by per-outcome valences:
/// q_i = p_i * (1 + beta * v_i) / sum_j p_j * (1 + beta * v_j).
pub fn biased_weights(born: &[f64], valences: &[Valence], beta: BiasParameter) -> Result<Vec<f64>> {
    if born.len() != valences.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} probabilities but {} valences",
            born.len(),
            valences.len()
        )));
    }
    if born.is_empty() {
        return Err(Error::DegenerateInput("outcome set is empty".into()));
    }
    if born.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::DegenerateInput(
            "Born weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = born.iter().sum();
    if (total - 1.0).abs() >= 1e-9 {
        return Err(Error::DegenerateInput(format!(
            "Born weights must sum to 1 within 1e-9, got {total}"
        )));
    }
    let tilted: Vec<f64> = born
        .iter()
        .zip(valences)
        .map(|(p, v)| p * (1.0 + beta.value() * v.value()))
        .collect();
    let norm: f64 = tilted.iter().sum();
    if norm <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::DegenerateInput(
            "all outcome weights vanish under this bias".into(),
        ));
    }
    Ok(tilted.into_iter().map(|w| w / norm).collect())
}

/// Weights the outcomes of one labeled family under a policy. Labels missing
/// from the valence map count as neutral.
pub fn policy_weights(policy: &ChoicePolicy, born: &[f64], labels: &[&str]) -> Result<Vec<f64>> {
    if born.len() != labels.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} probabilities but {} labels",
            born.len(),
            labels.len()
        )));
    }
    match policy {
        ChoicePolicy::Orthodox => {
            if born.is_empty() {
                return Err(Error::DegenerateInput("outcome set is empty".into()));
            }
            Ok(born.to_vec())
        }
        ChoicePolicy::Biased { beta, valence_map } => {
            let valences: Vec<Valence> = labels
                .iter()
                .map(|label| valence_map.get(*label).copied().unwrap_or(Valence::NEUTRAL))
                .collect();
            biased_weights(born, &valences, *beta)
        }
    }
}

/// Inverse-CDF selection: the smallest index whose cumulative weight
/// exceeds `draw`. `draw` must lie in [0, 1).
pub fn sample_outcome(weights: &[f64], draw: f64) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::DegenerateInput("cannot sample from an empty weight vector".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateInput("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() >= 1e-9 {
        return Err(Error::DegenerateInput(format!(
            "weights must sum to 1 within 1e-9, got {total}"
        )));
    }
    if !(0.0..1.0).contains(&draw) {
        return Err(Error::DegenerateInput(format!("draw must lie in [0, 1), got {draw}")));
    }
    let mut cumulative = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cumulative += w;
        if cumulative > draw {
            return Ok(i);
        }
    }
    // Rounding can leave the cumulative sum a hair under the draw; the last
    // outcome with positive weight is then the selected one.
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .ok_or_else(|| Error::DegenerateInput("no outcome has positive weight".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64) -> Valence {
        Valence::new(x).unwrap()
    }

    fn beta(x: f64) -> BiasParameter {
        BiasParameter::new(x).unwrap()
    }

    #[test]
    fn fifty_fifty_with_one_favored_outcome() {
        let q = biased_weights(&[0.5, 0.5], &[v(1.0), v(0.0)], beta(0.2)).unwrap();
        assert!((q[0] - 6.0 / 11.0).abs() < 1e-15);
        assert!((q[1] - 5.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_is_the_identity_exactly() {
        let born = [0.3, 0.45, 0.25];
        let q = biased_weights(&born, &[v(1.0), v(-1.0), v(0.5)], BiasParameter::ZERO).unwrap();
        assert_eq!(q, born.to_vec());
    }

    #[test]
    fn zero_probability_outcomes_stay_zero() {
        let q = biased_weights(&[0.0, 1.0], &[v(1.0), v(-0.5)], beta(0.8)).unwrap();
        assert_eq!(q[0], 0.0);
        assert!((q[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn biased_weights_validates_inputs() {
        assert!(matches!(
            biased_weights(&[0.5], &[v(0.0), v(0.0)], beta(0.1)),
            Err(Error::LayoutMismatch(_))
        ));
        assert!(matches!(
            biased_weights(&[0.5, 0.4], &[v(0.0), v(0.0)], beta(0.1)),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(biased_weights(&[], &[], beta(0.1)), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn fully_suppressed_ensemble_is_rejected() {
        // beta = 1 with valence -1 on every outcome kills all weight.
        let err = biased_weights(&[0.5, 0.5], &[v(-1.0), v(-1.0)], beta(1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn valence_and_bias_ranges_are_enforced() {
        assert!(Valence::new(1.2).is_err());
        assert!(Valence::new(f64::NAN).is_err());
        assert!(Valence::new(-1.0).is_ok());
        assert!(BiasParameter::new(-0.1).is_err());
        assert!(BiasParameter::new(1.1).is_err());
        assert!(BiasParameter::new(1.0).is_ok());
        assert_eq!(Valence::saturating(3.0).value(), 1.0);
        assert_eq!(Valence::saturating(-7.0).value(), -1.0);
    }

    #[test]
    fn policy_weights_defaults_missing_labels_to_neutral() {
        let mut map = BTreeMap::new();
        map.insert("hit".to_string(), v(1.0));
        let policy = ChoicePolicy::biased_with_map(beta(0.2), map);
        let q = policy_weights(&policy, &[0.5, 0.5], &["hit", "miss"]).unwrap();
        assert!((q[0] - 6.0 / 11.0).abs() < 1e-15);

        let orthodox = policy_weights(&ChoicePolicy::orthodox(), &[0.5, 0.5], &["hit", "miss"]).unwrap();
        assert_eq!(orthodox, vec![0.5, 0.5]);
    }

    #[test]
    fn sample_outcome_follows_the_cumulative_rule() {
        assert_eq!(sample_outcome(&[0.5, 0.5], 0.75).unwrap(), 1);
        assert_eq!(sample_outcome(&[0.5, 0.5], 0.0).unwrap(), 0);
        let q = biased_weights(&[0.5, 0.5], &[v(1.0), v(0.0)], beta(0.2)).unwrap();
        assert_eq!(sample_outcome(&q, 0.545454).unwrap(), 0);
        assert_eq!(sample_outcome(&q, 0.545455).unwrap(), 1);
    }

    #[test]
    fn sample_outcome_skips_zero_weight_outcomes() {
        assert_eq!(sample_outcome(&[0.0, 1.0], 0.0).unwrap(), 1);
        assert_eq!(sample_outcome(&[1.0, 0.0], 0.9999999).unwrap(), 0);
    }

    #[test]
    fn sample_outcome_validates_draw_and_weights() {
        assert!(matches!(sample_outcome(&[0.5, 0.5], 1.0), Err(Error::DegenerateInput(_))));
        assert!(matches!(sample_outcome(&[0.5, 0.5], -0.1), Err(Error::DegenerateInput(_))));
        assert!(matches!(sample_outcome(&[0.9, 0.2], 0.5), Err(Error::DegenerateInput(_))));
        assert!(matches!(sample_outcome(&[], 0.5), Err(Error::DegenerateInput(_))));
    }

    proptest! {
        #[test]
        fn biased_weights_form_a_probability_vector(
            raw in proptest::collection::vec(1e-6..1.0f64, 1..8),
            vals in proptest::collection::vec(-1.0..=1.0f64, 8),
            b in 0.0..=1.0f64,
        ) {
            let total: f64 = raw.iter().sum();
            let born: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let valences: Vec<Valence> = vals[..born.len()].iter().map(|x| v(*x)).collect();
            let q = biased_weights(&born, &valences, beta(b)).unwrap();
            let sum: f64 = q.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(q.iter().all(|w| *w >= 0.0));
        }

        #[test]
        fn raising_beta_favors_positive_valence(
            b1 in 0.0..0.5f64,
            delta in 0.01..0.5f64,
        ) {
            let born = [0.5, 0.5];
            let vals = [v(1.0), v(-1.0)];
            let low = biased_weights(&born, &vals, beta(b1)).unwrap();
            let high = biased_weights(&born, &vals, beta(b1 + delta)).unwrap();
            prop_assert!(high[0] > low[0]);
        }

        #[test]
        fn sampled_index_is_the_smallest_exceeding_the_draw(
            raw in proptest::collection::vec(0.0..1.0f64, 2..6),
            draw in 0.0..1.0f64,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let weights: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let idx = sample_outcome(&weights, draw).unwrap();
            let before: f64 = weights[..idx].iter().sum();
            let through: f64 = before + weights[idx];
            prop_assert!(before <= draw + 1e-9);
            prop_assert!(through > draw - 1e-9);
        }
    }
}
