//! Sampling-error scaling for the Monte Carlo harness: the Wilson interval
//! at the configured confidence must cover the enumerated rate in at least
//! 95 of 100 seeded repetitions at every trial count, and the typical error
//! must shrink as trials grow.

use qbias_core::harness::config::{PolicyKind, ProtocolParams, ReportFormat, RunConfig};
use qbias_core::harness::sim::run_simulation;

#[test]
fn sampled_rate_converges_toward_the_exact_rate() {
    let mut medians = Vec::new();
    for trials in [1_000u64, 10_000, 100_000] {
        let mut covered = 0u32;
        let mut errors = Vec::new();
        for seed in 0..100u64 {
            let config = RunConfig {
                protocol: "detection".into(),
                protocol_params: ProtocolParams::default(),
                policy: PolicyKind::Biased,
                beta: 0.2,
                trials,
                master_seed: 1_000 + seed,
                confidence: 0.99,
                format: ReportFormat::Csv,
                enumeration_cap: 100_000,
            };
            let report = run_simulation(&config).unwrap();
            let exact = report.exact_rate.unwrap();
            if report.ci_low <= exact && exact <= report.ci_high {
                covered += 1;
            }
            errors.push((report.rate - exact).abs());
        }
        assert!(covered >= 95, "coverage {covered}/100 at {trials} trials");
        errors.sort_by(f64::total_cmp);
        medians.push((errors[49] + errors[50]) / 2.0);
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "median |rate - exact| should fall with trial count: {medians:?}"
    );
}
