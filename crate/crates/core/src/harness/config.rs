//! Run configuration: which protocol, which outcome law, how many trials,
//! and how to report. Configs deserialize from JSON and reject unknown
//! fields so a typo fails loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{BiasParameter, ChoicePolicy, Valence};
use crate::protocols::{
    self, falsification_variant, PrimingMode, ProtocolSpec, ReactionTimeModel,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Orthodox,
    Biased,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Per-protocol tuning knobs. Every field is optional; fields that do not
/// apply to the configured protocol are rejected at validation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    pub congruency_valence: Option<f64>,
    pub rt_base_ms: Option<f64>,
    pub rt_delta_ms: Option<f64>,
    pub rt_noise_ms: Option<f64>,
    pub habituation_valence: Option<f64>,
    pub habituation_attenuation: Option<f64>,
    pub n_words: Option<u64>,
    pub n_recall: Option<u64>,
    pub n_targets: Option<u64>,
}

pub const KNOWN_PROTOCOLS: [&str; 8] = [
    "detection",
    "avoidance",
    "priming-retro",
    "priming-normal",
    "habituation-negative",
    "habituation-positive",
    "habituation-neutral",
    "recall",
];

fn default_beta() -> f64 {
    0.2
}

fn default_policy() -> PolicyKind {
    PolicyKind::Biased
}

fn default_confidence() -> f64 {
    0.99
}

fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

fn default_enumeration_cap() -> u64 {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// One of [`KNOWN_PROTOCOLS`], optionally suffixed `-falsified` for the
    /// independent-observer control.
    pub protocol: String,
    #[serde(default)]
    pub protocol_params: ProtocolParams,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
    /// Largest protocol tree the exact path will enumerate.
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_cap: u64,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::ConfigError(format!("invalid run configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) || !self.beta.is_finite() {
            return Err(Error::ConfigError(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.trials == 0 {
            return Err(Error::ConfigError("trials must be at least 1".into()));
        }
        if !self.confidence.is_finite() || !(0.0 < self.confidence && self.confidence < 1.0) {
            return Err(Error::ConfigError(format!(
                "confidence must lie strictly between 0 and 1, got {}",
                self.confidence
            )));
        }
        let (base, _) = self.split_protocol_name();
        if !KNOWN_PROTOCOLS.contains(&base) {
            return Err(Error::ConfigError(format!(
                "unknown protocol {:?}; known protocols: {}",
                self.protocol,
                KNOWN_PROTOCOLS.join(", ")
            )));
        }
        self.check_param_applicability(base)?;
        Ok(())
    }

    /// The configured outcome law. The biased law takes its strength from
    /// `beta`; the orthodox law ignores it.
    pub fn policy(&self) -> Result<ChoicePolicy> {
        match self.policy {
            PolicyKind::Orthodox => Ok(ChoicePolicy::orthodox()),
            PolicyKind::Biased => {
                let beta = BiasParameter::new(self.beta).map_err(|_| {
                    Error::ConfigError(format!("beta must lie in [0, 1], got {}", self.beta))
                })?;
                Ok(ChoicePolicy::biased(beta))
            }
        }
    }

    fn split_protocol_name(&self) -> (&str, bool) {
        match self.protocol.strip_suffix("-falsified") {
            Some(base) => (base, true),
            None => (self.protocol.as_str(), false),
        }
    }

    fn check_param_applicability(&self, base: &str) -> Result<()> {
        let p = &self.protocol_params;
        let set: [(&str, bool, &str); 9] = [
            ("congruency_valence", p.congruency_valence.is_some(), "priming"),
            ("rt_base_ms", p.rt_base_ms.is_some(), "priming"),
            ("rt_delta_ms", p.rt_delta_ms.is_some(), "priming"),
            ("rt_noise_ms", p.rt_noise_ms.is_some(), "priming"),
            ("habituation_valence", p.habituation_valence.is_some(), "habituation"),
            ("habituation_attenuation", p.habituation_attenuation.is_some(), "habituation"),
            ("n_words", p.n_words.is_some(), "recall"),
            ("n_recall", p.n_recall.is_some(), "recall"),
            ("n_targets", p.n_targets.is_some(), "recall"),
        ];
        let family = base.split('-').next().unwrap_or(base);
        for (name, is_set, applies_to) in set {
            if is_set && family != applies_to {
                return Err(Error::ConfigError(format!(
                    "parameter {name:?} applies only to {applies_to} protocols, \
                     not to {:?}",
                    self.protocol
                )));
            }
        }
        Ok(())
    }

    /// Recall design sizes with defaults filled in.
    pub fn recall_design(&self) -> (u64, u64, u64) {
        let p = &self.protocol_params;
        (
            p.n_words.unwrap_or(4),
            p.n_recall.unwrap_or(2),
            p.n_targets.unwrap_or(2),
        )
    }

    /// Builds the configured protocol. Recall designs over the enumeration
    /// cap surface the underlying error; the simulation layer decides
    /// whether a sampling fallback applies.
    pub fn build_protocol(&self) -> Result<ProtocolSpec> {
        self.validate()?;
        let (base, falsified) = self.split_protocol_name();
        let p = &self.protocol_params;
        let spec = match base {
            "detection" => protocols::detection_protocol(),
            "avoidance" => protocols::avoidance_protocol(),
            "priming-retro" | "priming-normal" => {
                let mode = if base.ends_with("retro") {
                    PrimingMode::Retro
                } else {
                    PrimingMode::Normal
                };
                let rt = ReactionTimeModel::new(
                    p.rt_base_ms.unwrap_or(protocols::DEFAULT_RT.base_ms),
                    p.rt_delta_ms.unwrap_or(protocols::DEFAULT_RT.congruency_delta_ms),
                    p.rt_noise_ms.unwrap_or(protocols::DEFAULT_RT.noise_spread_ms),
                )
                .map_err(config_error)?;
                let v = Valence::new(
                    p.congruency_valence.unwrap_or(protocols::DEFAULT_CONGRUENCY_VALENCE),
                )
                .map_err(config_error)?;
                priming_or_config_error(mode, rt, v)?
            }
            "habituation-negative" | "habituation-positive" | "habituation-neutral" => {
                let default_v = match base {
                    "habituation-negative" => -0.8,
                    "habituation-positive" => 0.8,
                    _ => 0.0,
                };
                let v_raw = p.habituation_valence.unwrap_or(default_v);
                let polarity_ok = match base {
                    "habituation-negative" => v_raw < 0.0,
                    "habituation-positive" => v_raw > 0.0,
                    _ => v_raw == 0.0,
                };
                if !polarity_ok {
                    return Err(Error::ConfigError(format!(
                        "habituation_valence {v_raw} contradicts the polarity in {base:?}"
                    )));
                }
                let v = Valence::new(v_raw).map_err(config_error)?;
                let att = p
                    .habituation_attenuation
                    .unwrap_or(protocols::DEFAULT_HABITUATION_ATTENUATION);
                protocols::habituation_protocol(v, att).map_err(config_error)?
            }
            "recall" => {
                let (w, r, t) = self.recall_design();
                protocols::recall_protocol(w, r, t, self.enumeration_cap)?
            }
            other => {
                return Err(Error::ConfigError(format!("unknown protocol {other:?}")));
            }
        };
        Ok(if falsified { falsification_variant(&spec) } else { spec })
    }
}

fn priming_or_config_error(
    mode: PrimingMode,
    rt: ReactionTimeModel,
    v: Valence,
) -> Result<ProtocolSpec> {
    protocols::priming_protocol(mode, rt, v).map_err(config_error)
}

fn config_error(e: Error) -> Error {
    Error::ConfigError(e.to_string())
}
