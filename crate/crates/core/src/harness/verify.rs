//! Invariant suite run by the `verify` command: measurement axioms on
//! random states, the independence identity, ensemble normalization, the
//! zero-bias equivalence, no-signaling, and agreement between the tree
//! ensemble and a sequential quantum realization. Failures are report
//! content, not errors; only an unusable configuration raises.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::config::{ReportFormat, RunConfig};
use crate::histories::{
    conditional_signaling_gap, enumerate_ensemble, max_marginal_gap, realization_dimension,
    sequential_equivalence_distance,
};
use crate::linalg::ZERO_PROBABILITY_EPSILON;
use crate::measurement::{
    born_probability, collapse, conditional_probability, family_probabilities, OutcomeFamily,
};
use crate::policy::ChoicePolicy;
use crate::random::{random_density_matrix, random_projector};

/// Realizations above this dimension are skipped with an informational
/// note; the underlying machinery allows somewhat more, but verification
/// must stay fast enough to run habitually.
pub const SEQUENTIAL_CHECK_DIM_LIMIT: u128 = 128;

#[derive(Clone, Debug)]
pub struct VerificationCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Informational lines report expected behavior (such as the bias
    /// deliberately moving a conditioned statistic) and never fail the run.
    pub informational: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    checks: Vec<VerificationCheck>,
}

impl VerificationReport {
    pub fn from_checks(checks: Vec<VerificationCheck>) -> Self {
        Self { checks }
    }

    pub fn checks(&self) -> &[VerificationCheck] {
        &self.checks
    }

    pub fn all_passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| !c.informational)
            .all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            out.push_str(&format!("{} {}: {}\n", status_tag(check), check.name, check.detail));
        }
        out.push_str(if self.all_passed() { "result: PASS\n" } else { "result: FAIL\n" });
        out
    }

    /// Machine form of [`Self::render`]: one row per check plus a final
    /// `result` row carrying the overall verdict.
    pub fn render_as(&self, format: ReportFormat) -> Result<String> {
        let verdict = if self.all_passed() { "PASS" } else { "FAIL" };
        match format {
            ReportFormat::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                writer.write_record(["check", "status", "detail"]).map_err(to_io)?;
                for check in &self.checks {
                    writer
                        .write_record([check.name, status_tag(check), &check.detail])
                        .map_err(to_io)?;
                }
                writer.write_record(["result", verdict, ""]).map_err(to_io)?;
                let bytes = writer.into_inner().map_err(|e| to_io(e.into_error()))?;
                Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
            }
            ReportFormat::Json => {
                let checks: Vec<serde_json::Value> = self
                    .checks
                    .iter()
                    .map(|c| {
                        serde_json::json!({
                            "check": c.name,
                            "status": status_tag(c),
                            "detail": c.detail,
                        })
                    })
                    .collect();
                let body = serde_json::json!({ "checks": checks, "result": verdict });
                let text = serde_json::to_string_pretty(&body).map_err(to_io)?;
                Ok(text + "\n")
            }
        }
    }
}

fn status_tag(check: &VerificationCheck) -> &'static str {
    if check.informational {
        "INFO"
    } else if check.passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn to_io(e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

fn check(name: &'static str, passed: bool, detail: String) -> VerificationCheck {
    VerificationCheck { name, passed, informational: false, detail }
}

fn info(name: &'static str, detail: String) -> VerificationCheck {
    VerificationCheck { name, passed: true, informational: true, detail }
}

/// Runs every invariant suite against the configured protocol and law.
pub fn verify(config: &RunConfig) -> Result<VerificationReport> {
    config.validate()?;
    let spec = config.build_protocol()?;
    let policy = config.policy()?;
    let mut checks = Vec::new();

    checks.push(measurement_axioms());
    checks.push(independence_identity());

    let orthodox = ChoicePolicy::orthodox();
    let base = enumerate_ensemble(&spec, &orthodox)?;
    let configured = enumerate_ensemble(&spec, &policy)?;

    {
        let total: f64 = configured.histories().iter().map(|h| h.weight()).sum();
        let mean_valence =
            base.expectation(|h| spec.valence_of(h.outcomes()).value());
        let predicted_z = 1.0 + policy.beta() * mean_valence;
        let z_err = (configured.normalization() - predicted_z).abs();
        let sum_err = (total - 1.0).abs();
        checks.push(check(
            "ensemble-normalization",
            sum_err < 1e-12 && z_err < 1e-12,
            format!(
                "weights sum to 1 within {sum_err:.2e}; partition sum {:.6} matches \
                 1 + beta * mean valence within {z_err:.2e}",
                configured.normalization()
            ),
        ));
    }

    {
        let zero = enumerate_ensemble(
            &spec,
            &ChoicePolicy::biased(crate::policy::BiasParameter::ZERO),
        )?;
        let max_diff = base
            .histories()
            .iter()
            .zip(zero.histories())
            .map(|(a, b)| (a.weight() - b.weight()).abs())
            .fold(0.0f64, f64::max);
        checks.push(check(
            "beta-zero-equivalence",
            max_diff == 0.0,
            format!("beta = 0 ensemble deviates from orthodox by {max_diff:.2e}"),
        ));
    }

    {
        let gap = max_marginal_gap(&spec, &orthodox)?;
        checks.push(check(
            "orthodox-no-signaling",
            gap < 1e-12,
            format!("largest orthodox pre-experience marginal gap {gap:.2e}"),
        ));
    }

    if policy.beta() == 0.0 {
        let gap = max_marginal_gap(&spec, &policy)?;
        checks.push(check(
            "policy-no-signaling",
            gap < 1e-12,
            format!("largest pre-experience marginal gap {gap:.2e} under the configured law"),
        ));
    } else {
        let marginal = max_marginal_gap(&spec, &policy)?;
        let conditioned = conditional_signaling_gap(&spec, &policy)?;
        let conditioned_text = match conditioned {
            Some(g) => format!("conditioned hit-rate gap {g:.7e}"),
            None => "no conditioned statistic for this protocol".to_string(),
        };
        checks.push(info(
            "policy-no-signaling",
            format!(
                "intentionally violated by the biased law: {conditioned_text}; \
                 largest raw marginal gap {marginal:.2e}"
            ),
        ));
    }

    {
        let dim = realization_dimension(&spec)?;
        if dim <= SEQUENTIAL_CHECK_DIM_LIMIT {
            let tv = sequential_equivalence_distance(&spec)?;
            checks.push(check(
                "sequential-equivalence",
                tv < 1e-9,
                format!("total variation {tv:.2e} between tree ensemble and collapse chain"),
            ));
        } else {
            checks.push(info(
                "sequential-equivalence",
                format!(
                    "skipped: realization dimension {dim} exceeds {SEQUENTIAL_CHECK_DIM_LIMIT}"
                ),
            ));
        }
    }

    Ok(VerificationReport::from_checks(checks))
}

fn measurement_axioms() -> VerificationCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51EA11);
    let dims = [2usize, 3, 4, 5, 8];
    let mut worst_trace_identity = 0.0f64;
    let mut worst_posterior_trace = 0.0f64;
    let mut worst_family_sum = 0.0f64;
    let mut worst_complement = 0.0f64;
    for round in 0..100 {
        let dim = dims[round % dims.len()];
        let rho = random_density_matrix(dim, &mut rng);
        let rank = rng.gen_range(1..dim);
        let p = random_projector(dim, rank, &mut rng);

        let born = born_probability(&rho, &p).expect("matched dimensions");
        let projected = p
            .matrix()
            .mul(rho.matrix())
            .mul(p.matrix())
            .trace()
            .re;
        worst_trace_identity = worst_trace_identity.max((born - projected).abs());

        if born > ZERO_PROBABILITY_EPSILON {
            let (post, _) = collapse(&rho, &p).expect("positive-probability collapse");
            worst_posterior_trace =
                worst_posterior_trace.max((post.trace().re - 1.0).abs());
        }

        let complement_residual = p
            .matrix()
            .add(p.complement().matrix())
            .max_abs_diff(&crate::linalg::ComplexMatrix::identity(dim));
        worst_complement = worst_complement.max(complement_residual);

        let labels: Vec<String> = (0..dim).map(|i| format!("o{i}")).collect();
        let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let family = OutcomeFamily::basis(dim, &label_refs).expect("basis family");
        let probs = family_probabilities(&rho, &family).expect("family probabilities");
        worst_family_sum =
            worst_family_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
    }
    check(
        "measurement-axioms",
        worst_trace_identity < 1e-12
            && worst_posterior_trace < 1e-12
            && worst_family_sum < 1e-9
            && worst_complement == 0.0,
        format!(
            "100 random states: |tr(P rho) - tr(P rho P)| <= {worst_trace_identity:.2e}, \
             posterior trace error <= {worst_posterior_trace:.2e}, \
             family sum error <= {worst_family_sum:.2e}, \
             complement residual {worst_complement:.1e}"
        ),
    )
}

fn independence_identity() -> VerificationCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D_E417);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho_a = random_density_matrix(2, &mut rng);
        let rho_b = random_density_matrix(3, &mut rng);
        let rho = rho_a.tensor(&rho_b);
        let p = random_projector(2, 1, &mut rng);
        let q = random_projector(3, rng.gen_range(1..3), &mut rng);
        let p_wide = p.tensor(&crate::linalg::Projector::identity(3));
        let q_wide = crate::linalg::Projector::identity(2).tensor(&q);
        let unconditional = born_probability(&rho, &p_wide).expect("matched dimensions");
        match conditional_probability(&rho, &p_wide, &q_wide) {
            Ok(conditional) => worst = worst.max((conditional - unconditional).abs()),
            Err(crate::error::Error::ZeroProbabilityOutcome(_)) => {}
            Err(e) => {
                return check(
                    "independence-identity",
                    false,
                    format!("unexpected error on a product state: {e}"),
                );
            }
        }
    }
    check(
        "independence-identity",
        worst < 1e-9,
        format!(
            "100 random product states: |p(P | Q) - p(P)| <= {worst:.2e} \
             for questions on disjoint factors"
        ),
    )
}
