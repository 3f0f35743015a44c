//! Projective measurement calculus: outcome probabilities, state collapse,
//! conditional probabilities for commuting questions, and reconstruction of
//! effective past states by running recorded unitaries backward.
//!
//! The two central identities. Collapse maps rho to P rho P / tr(P rho P),
//! and the probability of a yes answer is tr(P rho), which equals
//! tr(P rho P). Conditioning on a commuting coarse event Q uses
//! tr(P Q rho) / tr(Q rho).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    ComplexMatrix, DensityMatrix, Direction, Projector, UnitaryOp, HERMITICITY_TOL,
    IMAGINARY_TOL, ZERO_PROBABILITY_EPSILON,
};

/// Extracts a probability from a trace value. The imaginary part must be
/// numerically negligible; the real part is clamped into [0, 1] to absorb
/// representation noise at the boundaries.
fn real_probability(trace: Complex64, what: &str) -> Result<f64> {
    if trace.im.abs() >= IMAGINARY_TOL {
        return Err(Error::NumericIntegrity(format!(
            "{what} must be real, found imaginary part {:.3e}",
            trace.im
        )));
    }
    Ok(trace.re.clamp(0.0, 1.0))
}

/// Probability tr(P rho) of the yes outcome for projector `p` on state `rho`.
pub fn born_probability(rho: &DensityMatrix, p: &Projector) -> Result<f64> {
    if rho.dim() != p.dim() {
        return Err(Error::LayoutMismatch(format!(
            "projector dimension {} does not match state dimension {}",
            p.dim(),
            rho.dim()
        )));
    }
    real_probability(p.matrix().mul(rho.matrix()).trace(), "tr(P rho)")
}

/// Applies the collapse rule rho -> P rho P / tr(P rho P) and returns the
/// post-measurement state together with the outcome probability tr(P rho).
pub fn collapse(rho: &DensityMatrix, p: &Projector) -> Result<(DensityMatrix, f64)> {
    let probability = born_probability(rho, p)?;
    if probability <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::ZeroProbabilityOutcome(format!(
            "outcome probability {probability:.3e} is below {ZERO_PROBABILITY_EPSILON:.0e}, \
             no post-measurement state exists"
        )));
    }
    let sandwiched = p.matrix().mul(rho.matrix()).mul(p.matrix());
    // Normalize by the trace of the sandwiched matrix itself so the result
    // has unit trace to machine precision even when tr(P rho) was clamped.
    let norm = real_probability(sandwiched.trace(), "tr(P rho P)")?;
    if norm <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::ZeroProbabilityOutcome(
            "collapsed state has vanishing trace".into(),
        ));
    }
    let collapsed = DensityMatrix::new(sandwiched.scale(Complex64::new(1.0 / norm, 0.0)))?;
    Ok((collapsed, probability))
}

/// Exhaustive, mutually exclusive set of answers to one question: labeled
/// projectors that are pairwise orthogonal and sum to the identity.
#[derive(Clone, Debug)]
pub struct OutcomeFamily {
    entries: Vec<(String, Projector)>,
}

impl OutcomeFamily {
    pub fn new(entries: Vec<(String, Projector)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::FamilyIncomplete("family has no outcomes".into()));
        }
        let dim = entries[0].1.dim();
        for (label, p) in &entries {
            if p.dim() != dim {
                return Err(Error::FamilyIncomplete(format!(
                    "outcome {label:?} has dimension {}, family dimension is {dim}",
                    p.dim()
                )));
            }
        }
        for (i, (label, _)) in entries.iter().enumerate() {
            if entries[i + 1..].iter().any(|(other, _)| other == label) {
                return Err(Error::FamilyIncomplete(format!("duplicate outcome label {label:?}")));
            }
        }
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                let cross = entries[i].1.matrix().mul(entries[j].1.matrix()).max_abs_entry();
                if cross >= HERMITICITY_TOL {
                    return Err(Error::FamilyIncomplete(format!(
                        "outcomes {:?} and {:?} are not orthogonal, |Pi Pj| = {cross:.3e}",
                        entries[i].0, entries[j].0
                    )));
                }
            }
        }
        let mut sum = ComplexMatrix::zeros(dim);
        for (_, p) in &entries {
            sum = sum.add(p.matrix());
        }
        let defect = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if defect >= HERMITICITY_TOL {
            return Err(Error::FamilyIncomplete(format!(
                "outcome projectors must sum to the identity, deviation {defect:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    /// The computational basis as an outcome family.
    pub fn basis(dim: usize, labels: &[&str]) -> Result<Self> {
        if labels.len() != dim {
            return Err(Error::FamilyIncomplete(format!(
                "need {dim} labels for a basis family, got {}",
                labels.len()
            )));
        }
        let entries = labels
            .iter()
            .enumerate()
            .map(|(i, label)| Ok((label.to_string(), Projector::basis_state(dim, i)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// A yes/no family built from one projector and its complement.
    pub fn dichotomy(yes_label: &str, no_label: &str, p: &Projector) -> Result<Self> {
        Self::new(vec![
            (yes_label.to_string(), p.clone()),
            (no_label.to_string(), p.complement()),
        ])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].1.dim()
    }

    pub fn entries(&self) -> &[(String, Projector)] {
        &self.entries
    }
}

/// Born probabilities of every outcome in the family, in family order.
/// Completeness of the family makes the vector sum to 1 within 1e-9.
pub fn family_probabilities(rho: &DensityMatrix, family: &OutcomeFamily) -> Result<Vec<f64>> {
    if family.dim() != rho.dim() {
        return Err(Error::LayoutMismatch(format!(
            "family dimension {} does not match state dimension {}",
            family.dim(),
            rho.dim()
        )));
    }
    family
        .entries()
        .iter()
        .map(|(_, p)| born_probability(rho, p))
        .collect()
}

/// Conditional probability tr(P Q rho) / tr(Q rho) for commuting projectors.
pub fn conditional_probability(
    rho: &DensityMatrix,
    p: &Projector,
    q: &Projector,
) -> Result<f64> {
    if p.dim() != rho.dim() || q.dim() != rho.dim() {
        return Err(Error::LayoutMismatch(format!(
            "projector dimensions {} and {} must match state dimension {}",
            p.dim(),
            q.dim(),
            rho.dim()
        )));
    }
    if !p.commutes_with(q) {
        return Err(Error::NonCommutingCondition(
            "conditional probability needs [P, Q] = 0 so that the joint event is well defined"
                .into(),
        ));
    }
    let q_prob = born_probability(rho, q)?;
    if q_prob <= ZERO_PROBABILITY_EPSILON {
        return Err(Error::ZeroProbabilityOutcome(format!(
            "conditioning event has probability {q_prob:.3e}"
        )));
    }
    let joint = real_probability(
        p.matrix().mul(q.matrix()).mul(rho.matrix()).trace(),
        "tr(P Q rho)",
    )?;
    Ok((joint / q_prob).clamp(0.0, 1.0))
}

/// Reconstructs the state `steps_back` evolution steps before `rho_after` by
/// conjugating with the recorded unitaries in reverse order.
pub fn effective_past(
    rho_after: &DensityMatrix,
    schedule: &[UnitaryOp],
    steps_back: usize,
) -> Result<DensityMatrix> {
    if steps_back > schedule.len() {
        return Err(Error::ScheduleMismatch(format!(
            "cannot rewind {steps_back} steps through a schedule of length {}",
            schedule.len()
        )));
    }
    let mut rho = rho_after.clone();
    for u in schedule[schedule.len() - steps_back..].iter().rev() {
        rho = rho.apply_unitary(u, Direction::Backward)?;
    }
    Ok(rho)
}

/// One resolved measurement event in a sequential realization: which question
/// was asked at which process-time step, which outcome occurred, and the
/// weight the outcome law actually assigned to it.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub process_time: u64,
    pub question_label: String,
    pub outcome_label: String,
    pub born_probability: f64,
    pub applied_weight: f64,
}
