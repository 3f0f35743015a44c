//! Declarative experiment structures: finite trees of choice events ending
//! in a felt experience, plus the valence each complete run carries.
//!
//! Each builder returns a `ProtocolSpec` whose tree fixes the event order
//! (process time), whose valence function grades complete histories, and
//! whose hit predicate names the statistic the harness reports. The
//! structures here follow the usual anomalous-cognition designs: detect a
//! hidden erotic stimulus, avoid an unpleasant flash, respond under
//! retroactive priming, habituate to repeated exposure, recall words whose
//! practice lies in the future.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::histories::Predicate;
use crate::policy::Valence;

/// Who or what resolves an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Resolved by a participant.
    AgentChoice,
    /// Resolved by a random number generator.
    NatureRng,
    /// Physically determined presentation (a function of earlier outcomes).
    Stimulus,
    /// The terminal felt event; always a leaf.
    Experience,
}

/// One event in a protocol tree: a named variable, its possible outcomes
/// with branch probabilities, and one subtree per outcome (none for the
/// terminal experience).
#[derive(Clone, Debug)]
pub struct EventNode {
    variable: String,
    kind: EventKind,
    outcomes: Vec<String>,
    branch_probabilities: Vec<f64>,
    children: Vec<EventNode>,
}

const BRANCH_SUM_TOL: f64 = 1e-12;

impl EventNode {
    /// Interior node: one (label, probability, subtree) arm per outcome.
    pub fn branch(
        variable: impl Into<String>,
        kind: EventKind,
        arms: Vec<(String, f64, EventNode)>,
    ) -> Result<Self> {
        if kind == EventKind::Experience {
            return Err(Error::ProtocolMalformed(
                "experience events are terminal and cannot carry subtrees".into(),
            ));
        }
        let variable = variable.into();
        let mut outcomes = Vec::with_capacity(arms.len());
        let mut branch_probabilities = Vec::with_capacity(arms.len());
        let mut children = Vec::with_capacity(arms.len());
        for (label, p, child) in arms {
            outcomes.push(label);
            branch_probabilities.push(p);
            children.push(child);
        }
        Self::check_distribution(&variable, &outcomes, &branch_probabilities)?;
        Ok(Self { variable, kind, outcomes, branch_probabilities, children })
    }

    /// Terminal experience node.
    pub fn experience(
        variable: impl Into<String>,
        arms: Vec<(String, f64)>,
    ) -> Result<Self> {
        let variable = variable.into();
        let (outcomes, branch_probabilities): (Vec<_>, Vec<_>) = arms.into_iter().unzip();
        Self::check_distribution(&variable, &outcomes, &branch_probabilities)?;
        Ok(Self {
            variable,
            kind: EventKind::Experience,
            outcomes,
            branch_probabilities,
            children: Vec::new(),
        })
    }

    fn check_distribution(variable: &str, outcomes: &[String], probs: &[f64]) -> Result<()> {
        if outcomes.is_empty() {
            return Err(Error::ProtocolMalformed(format!(
                "event {variable:?} has no outcomes"
            )));
        }
        for (i, label) in outcomes.iter().enumerate() {
            if outcomes[i + 1..].contains(label) {
                return Err(Error::ProtocolMalformed(format!(
                    "event {variable:?} repeats outcome label {label:?}"
                )));
            }
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::ProtocolMalformed(format!(
                "event {variable:?} has a negative or non-finite branch probability"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() >= BRANCH_SUM_TOL {
            return Err(Error::ProtocolMalformed(format!(
                "branch probabilities of {variable:?} sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn kind(&self) -> EventKind {
        self.kind
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn branch_probabilities(&self) -> &[f64] {
        &self.branch_probabilities
    }

    /// Subtrees, one per outcome; empty exactly for experience nodes.
    pub fn children(&self) -> &[EventNode] {
        &self.children
    }

    pub fn is_experience(&self) -> bool {
        self.kind == EventKind::Experience
    }

    fn count_leaves(&self) -> u64 {
        if self.is_experience() {
            self.outcomes.len() as u64
        } else {
            self.children.iter().map(|c| c.count_leaves()).sum()
        }
    }

    fn check_paths(&self, seen: &mut Vec<String>) -> Result<()> {
        if seen.contains(&self.variable) {
            return Err(Error::ProtocolMalformed(format!(
                "variable {:?} repeats along a path",
                self.variable
            )));
        }
        if self.is_experience() {
            return Ok(());
        }
        if self.children.len() != self.outcomes.len() {
            return Err(Error::ProtocolMalformed(format!(
                "event {:?} has {} outcomes but {} subtrees",
                self.variable,
                self.outcomes.len(),
                self.children.len()
            )));
        }
        seen.push(self.variable.clone());
        for child in &self.children {
            child.check_paths(seen)?;
        }
        seen.pop();
        Ok(())
    }
}

/// Looks up a variable's outcome in a path slice.
pub fn path_outcome<'a>(path: &'a [(String, String)], variable: &str) -> Option<&'a str> {
    path.iter()
        .find(|(var, _)| var == variable)
        .map(|(_, out)| out.as_str())
}

/// Reaction-time law for response protocols: a base latency plus a penalty
/// on incongruent runs, with optional Gaussian spread in sampling mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionTimeModel {
    pub base_ms: f64,
    pub congruency_delta_ms: f64,
    pub noise_spread_ms: f64,
}

impl ReactionTimeModel {
    pub fn new(base_ms: f64, congruency_delta_ms: f64, noise_spread_ms: f64) -> Result<Self> {
        if !(base_ms.is_finite() && congruency_delta_ms.is_finite() && noise_spread_ms.is_finite())
        {
            return Err(Error::DegenerateInput("reaction-time parameters must be finite".into()));
        }
        if base_ms <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "base reaction time must be positive, got {base_ms}"
            )));
        }
        if base_ms + congruency_delta_ms <= 0.0 {
            return Err(Error::DegenerateInput(
                "base plus congruency delta must stay positive".into(),
            ));
        }
        if noise_spread_ms < 0.0 {
            return Err(Error::DegenerateInput("noise spread cannot be negative".into()));
        }
        Ok(Self { base_ms, congruency_delta_ms, noise_spread_ms })
    }

    /// Exact per-history latency, noise off.
    pub fn deterministic_ms(&self, congruent: bool) -> f64 {
        if congruent { self.base_ms } else { self.base_ms + self.congruency_delta_ms }
    }

    /// One sampled latency with Gaussian spread, floored at zero.
    pub fn sample_ms(&self, congruent: bool, rng: &mut impl Rng) -> f64 {
        let mean = self.deterministic_ms(congruent);
        if self.noise_spread_ms == 0.0 {
            return mean;
        }
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        (mean + self.noise_spread_ms * z).max(0.0)
    }
}

type ValenceFn = Arc<dyn Fn(&[(String, String)]) -> Valence + Send + Sync>;

/// A complete experiment description: the event tree, who experiences the
/// terminal event, how a finished run feels, and which statistic counts as
/// the protocol's hit.
#[derive(Clone)]
pub struct ProtocolSpec {
    name: String,
    root: EventNode,
    valence: ValenceFn,
    observers: BTreeMap<String, String>,
    hit: Predicate,
    hit_condition: Predicate,
    reaction_time: Option<(ReactionTimeModel, Predicate)>,
}

impl fmt::Debug for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("name", &self.name)
            .field("root", &self.root)
            .field("observers", &self.observers)
            .field("hit", &self.hit)
            .field("hit_condition", &self.hit_condition)
            .field("reaction_time", &self.reaction_time)
            .finish_non_exhaustive()
    }
}

impl ProtocolSpec {
    pub fn new(
        name: impl Into<String>,
        root: EventNode,
        valence: ValenceFn,
        observers: BTreeMap<String, String>,
        hit: Predicate,
        hit_condition: Predicate,
        reaction_time: Option<(ReactionTimeModel, Predicate)>,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            root,
            valence,
            observers,
            hit,
            hit_condition,
            reaction_time,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural contract: finite tree, subtree count matches outcome
    /// count, no variable repeats along a path, and every path terminates
    /// in exactly one experience event.
    pub fn validate(&self) -> Result<()> {
        self.root.check_paths(&mut Vec::new())?;
        fn leaves_are_experiences(node: &EventNode) -> Result<()> {
            if node.is_experience() {
                return Ok(());
            }
            for child in node.children() {
                leaves_are_experiences(child)?;
            }
            Ok(())
        }
        leaves_are_experiences(&self.root)?;
        for var in self.experience_variables() {
            if !self.observers.contains_key(&var) {
                return Err(Error::ProtocolMalformed(format!(
                    "experience variable {var:?} has no assigned observer"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &EventNode {
        &self.root
    }

    pub fn hit(&self) -> &Predicate {
        &self.hit
    }

    /// Conditioning event for the reported hit rate; `Predicate::True` means
    /// the rate is unconditional.
    pub fn hit_condition(&self) -> &Predicate {
        &self.hit_condition
    }

    pub fn observer_of(&self, variable: &str) -> Option<&str> {
        self.observers.get(variable).map(String::as_str)
    }

    pub fn valence_of(&self, path: &[(String, String)]) -> Valence {
        (self.valence)(path)
    }

    pub fn reaction_time_model(&self) -> Option<&ReactionTimeModel> {
        self.reaction_time.as_ref().map(|(model, _)| model)
    }

    /// Exact latency of a complete history under the protocol's
    /// reaction-time law, if it has one.
    pub fn reaction_time_ms(&self, path: &[(String, String)]) -> Option<f64> {
        self.reaction_time.as_ref().map(|(model, slow_when)| {
            model.deterministic_ms(!slow_when.matches_path(path))
        })
    }

    pub fn leaf_count(&self) -> u64 {
        self.root.count_leaves()
    }

    fn experience_variables(&self) -> Vec<String> {
        fn walk(node: &EventNode, out: &mut Vec<String>) {
            if node.is_experience() {
                if !out.contains(&node.variable().to_string()) {
                    out.push(node.variable().to_string());
                }
            } else {
                for child in node.children() {
                    walk(child, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

const PARTICIPANT: &str = "participant";

fn participant_observer(variable: &str) -> BTreeMap<String, String> {
    BTreeMap::from([(variable.to_string(), PARTICIPANT.to_string())])
}

fn outcome_set(variable: &str, labels: &[&str]) -> Predicate {
    Predicate::Outcome {
        variable: variable.to_string(),
        any_of: labels.iter().map(|l| l.to_string()).collect(),
    }
}

/// Precognitive detection. The participant picks a side P before an RNG
/// fixes the target side T and a second RNG decides whether the reveal S is
/// erotic or neutral. Only a correct pick of an erotic target is felt
/// positively. The reported statistic is the hit rate P = T among erotic
/// reveals.
pub fn detection_protocol() -> ProtocolSpec {
    let leaf = |p: &str, t: &str, s: &str| {
        let label = if p != t {
            "blank"
        } else if s == "E" {
            "erotic"
        } else {
            "neutral"
        };
        EventNode::experience("F", vec![(label.to_string(), 1.0)]).expect("valid leaf")
    };
    let s_node = |p: &str, t: &str| {
        EventNode::branch(
            "S",
            EventKind::NatureRng,
            vec![
                ("E".to_string(), 0.5, leaf(p, t, "E")),
                ("N".to_string(), 0.5, leaf(p, t, "N")),
            ],
        )
        .expect("valid reveal node")
    };
    let t_node = |p: &str| {
        EventNode::branch(
            "T",
            EventKind::NatureRng,
            vec![
                ("L".to_string(), 0.5, s_node(p, "L")),
                ("R".to_string(), 0.5, s_node(p, "R")),
            ],
        )
        .expect("valid target node")
    };
    let root = EventNode::branch(
        "P",
        EventKind::AgentChoice,
        vec![
            ("L".to_string(), 0.5, t_node("L")),
            ("R".to_string(), 0.5, t_node("R")),
        ],
    )
    .expect("valid pick node");

    let valence: ValenceFn = Arc::new(|path| {
        if path_outcome(path, "F") == Some("erotic") {
            Valence::new(1.0).expect("unit valence")
        } else {
            Valence::NEUTRAL
        }
    });

    ProtocolSpec::new(
        "detection",
        root,
        valence,
        participant_observer("F"),
        Predicate::VariablesEqual { left: "P".into(), right: "T".into() },
        outcome_set("S", &["E"]),
        None,
    )
    .expect("detection protocol is well formed")
}

/// Precognitive avoidance. The participant prefers one of two pictures, an
/// RNG picks which will be flashed, and the flash feels pleasant exactly
/// when it is the preferred picture. The zero-probability stimulus branches
/// stay in the tree and are pruned at enumeration.
pub fn avoidance_protocol() -> ProtocolSpec {
    let leaf = |label: &str| {
        EventNode::experience("F", vec![(label.to_string(), 1.0)]).expect("valid leaf")
    };
    let s_node = |matched: bool| {
        let (p_pos, p_neg) = if matched { (1.0, 0.0) } else { (0.0, 1.0) };
        EventNode::branch(
            "S",
            EventKind::Stimulus,
            vec![
                ("pos".to_string(), p_pos, leaf("pleasant")),
                ("neg".to_string(), p_neg, leaf("unpleasant")),
            ],
        )
        .expect("valid stimulus node")
    };
    let t_node = |p: &str| {
        EventNode::branch(
            "T",
            EventKind::NatureRng,
            vec![
                ("A".to_string(), 0.5, s_node(p == "A")),
                ("B".to_string(), 0.5, s_node(p == "B")),
            ],
        )
        .expect("valid target node")
    };
    let root = EventNode::branch(
        "P",
        EventKind::AgentChoice,
        vec![
            ("A".to_string(), 0.5, t_node("A")),
            ("B".to_string(), 0.5, t_node("B")),
        ],
    )
    .expect("valid preference node");

    let valence: ValenceFn = Arc::new(|path| match path_outcome(path, "F") {
        Some("pleasant") => Valence::new(1.0).expect("unit valence"),
        _ => Valence::new(-1.0).expect("unit valence"),
    });

    ProtocolSpec::new(
        "avoidance",
        root,
        valence,
        participant_observer("F"),
        Predicate::VariablesEqual { left: "T".into(), right: "P".into() },
        Predicate::True,
        None,
    )
    .expect("avoidance protocol is well formed")
}

/// Event order for the priming builder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimingMode {
    /// Response first, priming word only afterwards.
    Retro,
    /// Word shown before the response, the classical control.
    Normal,
}

impl PrimingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimingMode::Retro => "retro",
            PrimingMode::Normal => "normal",
        }
    }
}

pub const DEFAULT_CONGRUENCY_VALENCE: f64 = 0.5;

/// Retroactive priming. A picture with random polarity is judged by the
/// participant (the response follows the picture's feel), and an RNG picks
/// a priming word. A run feels mildly good when word and picture agree.
/// `mode` fixes whether the word event lands before or after the response.
pub fn priming_protocol(
    mode: PrimingMode,
    rt: ReactionTimeModel,
    congruency_valence: Valence,
) -> Result<ProtocolSpec> {
    let v_c = congruency_valence.value().abs();
    let leaf = |pic: &str, word: &str| {
        let label = if pic == word { "congruent" } else { "incongruent" };
        EventNode::experience("F", vec![(label.to_string(), 1.0)]).expect("valid leaf")
    };
    let response = |pic: &str, then: EventNode| {
        EventNode::branch(
            "response",
            EventKind::AgentChoice,
            vec![(pic.to_string(), 1.0, then)],
        )
        .expect("valid response node")
    };
    let pic_subtree = |pic: &str| -> EventNode {
        match mode {
            PrimingMode::Retro => {
                let word_node = EventNode::branch(
                    "word",
                    EventKind::NatureRng,
                    vec![
                        ("pos".to_string(), 0.5, leaf(pic, "pos")),
                        ("neg".to_string(), 0.5, leaf(pic, "neg")),
                    ],
                )
                .expect("valid word node");
                response(pic, word_node)
            }
            PrimingMode::Normal => EventNode::branch(
                "word",
                EventKind::NatureRng,
                vec![
                    ("pos".to_string(), 0.5, response(pic, leaf(pic, "pos"))),
                    ("neg".to_string(), 0.5, response(pic, leaf(pic, "neg"))),
                ],
            )
            .expect("valid word node"),
        }
    };
    let root = EventNode::branch(
        "picture",
        EventKind::NatureRng,
        vec![
            ("pos".to_string(), 0.5, pic_subtree("pos")),
            ("neg".to_string(), 0.5, pic_subtree("neg")),
        ],
    )
    .expect("valid picture node");

    let valence: ValenceFn = Arc::new(move |path| {
        if path_outcome(path, "F") == Some("congruent") {
            Valence::saturating(v_c)
        } else {
            Valence::saturating(-v_c)
        }
    });

    ProtocolSpec::new(
        format!("priming-{}", mode.as_str()),
        root,
        valence,
        participant_observer("F"),
        outcome_set("F", &["congruent"]),
        Predicate::True,
        Some((rt, outcome_set("F", &["incongruent"]))),
    )
}

/// Precognitive habituation. The participant prefers one of a pair, an RNG
/// picks which picture will be flashed repeatedly later. Repetition
/// attenuates the feeling: a matched pick is felt at `v0 * attenuation`,
/// a miss at full `v0`. For unpleasant material (v0 < 0) the attenuated
/// branch is the milder one.
pub fn habituation_protocol(v0: Valence, attenuation: f64) -> Result<ProtocolSpec> {
    if !attenuation.is_finite() || !(0.0 < attenuation && attenuation < 1.0) {
        return Err(Error::DegenerateInput(format!(
            "attenuation must lie strictly between 0 and 1, got {attenuation}"
        )));
    }
    let leaf = |label: &str| {
        EventNode::experience("F", vec![(label.to_string(), 1.0)]).expect("valid leaf")
    };
    let t_node = |p: &str| {
        let arm = |t: &str| {
            let label = if t == p { "attenuated" } else { "full" };
            (t.to_string(), 0.5, leaf(label))
        };
        EventNode::branch("T", EventKind::NatureRng, vec![arm("A"), arm("B")])
            .expect("valid target node")
    };
    let root = EventNode::branch(
        "P",
        EventKind::AgentChoice,
        vec![
            ("A".to_string(), 0.5, t_node("A")),
            ("B".to_string(), 0.5, t_node("B")),
        ],
    )
    .expect("valid preference node");

    let v_full = v0.value();
    let v_attenuated = v0.value() * attenuation;
    let valence: ValenceFn = Arc::new(move |path| {
        if path_outcome(path, "F") == Some("attenuated") {
            Valence::saturating(v_attenuated)
        } else {
            Valence::saturating(v_full)
        }
    });

    let polarity = if v_full < 0.0 {
        "negative"
    } else if v_full > 0.0 {
        "positive"
    } else {
        "neutral"
    };
    ProtocolSpec::new(
        format!("habituation-{polarity}"),
        root,
        valence,
        participant_observer("F"),
        Predicate::VariablesEqual { left: "T".into(), right: "P".into() },
        Predicate::True,
        None,
    )
}

pub(crate) fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn subset_label(n_words: u64, subset: &[u64]) -> String {
    (0..n_words).map(|w| if subset.contains(&w) { '1' } else { '0' }).collect()
}

fn label_overlap(a: &str, b: &str) -> u64 {
    a.chars().zip(b.chars()).filter(|(x, y)| *x == '1' && *y == '1').count() as u64
}

/// Retroactive recall. The participant recalls `n_recall` of `n_words`
/// words, then an RNG picks `n_targets` words for later practice. The felt
/// value of a run grows with the overlap between the recalled and practiced
/// sets, standardized against the chance mean and clamped to [-1, 1].
/// `enumeration_cap` bounds the exact tree, C(n_words, n_recall) times
/// C(n_words, n_targets) leaves; larger designs must be sampled instead.
pub fn recall_protocol(
    n_words: u64,
    n_recall: u64,
    n_targets: u64,
    enumeration_cap: u64,
) -> Result<ProtocolSpec> {
    if n_words == 0 || n_recall == 0 || n_targets == 0 {
        return Err(Error::DegenerateInput(
            "word list, recall set and target set must be nonempty".into(),
        ));
    }
    if n_recall > n_words || n_targets > n_words {
        return Err(Error::DegenerateInput(format!(
            "recall ({n_recall}) and target ({n_targets}) sizes cannot exceed the word list ({n_words})"
        )));
    }
    let tree_size = binomial(n_words, n_recall).saturating_mul(binomial(n_words, n_targets));
    if tree_size > enumeration_cap as u128 {
        return Err(Error::ProtocolMalformed(format!(
            "recall tree has {tree_size} leaves, over the enumeration cap {enumeration_cap}; \
             reduce n_words or sample instead of enumerating"
        )));
    }

    let (mu0, sigma) = recall_standardization(n_words, n_recall, n_targets);
    let subsets = |size: u64| -> Vec<String> {
        (0..n_words)
            .combinations(size as usize)
            .map(|combo| subset_label(n_words, &combo))
            .collect()
    };
    let recall_sets = subsets(n_recall);
    let target_sets = subsets(n_targets);
    let uniform_r = 1.0 / recall_sets.len() as f64;
    let uniform_t = 1.0 / target_sets.len() as f64;

    let mut hit_labels: Vec<String> = Vec::new();
    let t_node = |recalled: &str| {
        let arms = target_sets
            .iter()
            .map(|t| {
                let overlap = label_overlap(recalled, t);
                let leaf =
                    EventNode::experience("F", vec![(format!("overlap-{overlap}"), 1.0)])
                        .expect("valid leaf");
                (t.clone(), uniform_t, leaf)
            })
            .collect();
        EventNode::branch("T", EventKind::NatureRng, arms).expect("valid target node")
    };
    let r_arms = recall_sets
        .iter()
        .map(|r| (r.clone(), uniform_r, t_node(r)))
        .collect();
    let root = EventNode::branch("R", EventKind::AgentChoice, r_arms)?;

    for overlap in 0..=n_recall.min(n_targets) {
        if overlap as f64 > mu0 {
            hit_labels.push(format!("overlap-{overlap}"));
        }
    }
    let hit = Predicate::Outcome {
        variable: "F".to_string(),
        any_of: hit_labels.into_iter().collect(),
    };

    let valence: ValenceFn = Arc::new(move |path| {
        let (r, t) = match (path_outcome(path, "R"), path_outcome(path, "T")) {
            (Some(r), Some(t)) => (r, t),
            _ => return Valence::NEUTRAL,
        };
        let overlap = label_overlap(r, t) as f64;
        Valence::saturating((overlap - mu0) / sigma)
    });

    ProtocolSpec::new(
        format!("recall-{n_words}w{n_recall}r{n_targets}t"),
        root,
        valence,
        participant_observer("F"),
        hit,
        Predicate::True,
        None,
    )
}

/// Chance mean of the recall overlap and the normalization that maps the
/// overlap range onto [-1, 1].
pub fn recall_standardization(n_words: u64, n_recall: u64, n_targets: u64) -> (f64, f64) {
    let mu0 = (n_recall * n_targets) as f64 / n_words as f64;
    let sigma = mu0.max(n_recall as f64 - mu0).max(f64::MIN_POSITIVE);
    (mu0, sigma)
}

/// Same events, but the terminal experience belongs to an independent
/// observer with no stake in the outcome, so every history carries neutral
/// valence and the biased law collapses onto the orthodox one.
pub fn falsification_variant(base: &ProtocolSpec) -> ProtocolSpec {
    let mut observers = base.observers.clone();
    for observer in observers.values_mut() {
        *observer = "independent-observer".to_string();
    }
    ProtocolSpec {
        name: format!("{}-falsified", base.name),
        root: base.root.clone(),
        valence: Arc::new(|_| Valence::NEUTRAL),
        observers,
        hit: base.hit.clone(),
        hit_condition: base.hit_condition.clone(),
        reaction_time: base.reaction_time.clone(),
    }
}

/// Which of the two co-participants experiences the outcome first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstObserver {
    /// The participant with the base protocol's polarity.
    Primary,
    /// The co-participant who feels every outcome with reversed polarity.
    Secondary,
}

/// Two participants watch the same run with opposite hedonic polarity; the
/// weight the outcome law applies belongs to whoever experiences it first.
/// With `Secondary` first, every biased statistic flips around its orthodox
/// value.
pub fn two_participant_variant(base: &ProtocolSpec, first: FirstObserver) -> ProtocolSpec {
    let (suffix, observer) = match first {
        FirstObserver::Primary => ("primary", "participant-primary"),
        FirstObserver::Secondary => ("secondary", "participant-secondary"),
    };
    let mut observers = base.observers.clone();
    for slot in observers.values_mut() {
        *slot = observer.to_string();
    }
    let inner = base.valence.clone();
    let valence: ValenceFn = match first {
        FirstObserver::Primary => inner,
        FirstObserver::Secondary => Arc::new(move |path| inner(path).negated()),
    };
    ProtocolSpec {
        name: format!("{}-pair-{suffix}-first", base.name),
        root: base.root.clone(),
        valence,
        observers,
        hit: base.hit.clone(),
        hit_condition: base.hit_condition.clone(),
        reaction_time: base.reaction_time.clone(),
    }
}

pub const DEFAULT_RT: ReactionTimeModel =
    ReactionTimeModel { base_ms: 500.0, congruency_delta_ms: 40.0, noise_spread_ms: 0.0 };

pub const DEFAULT_HABITUATION_ATTENUATION: f64 = 0.5;
pub const DEFAULT_RECALL_CAP: u64 = 100_000;

/// The canonical battery: one instance per experiment slot, desk scale.
pub fn nine_protocols() -> Vec<ProtocolSpec> {
    let v = |x: f64| Valence::new(x).expect("valid default valence");
    vec![
        detection_protocol(),
        avoidance_protocol(),
        priming_protocol(PrimingMode::Retro, DEFAULT_RT, v(DEFAULT_CONGRUENCY_VALENCE))
            .expect("default retro priming"),
        priming_protocol(PrimingMode::Normal, DEFAULT_RT, v(DEFAULT_CONGRUENCY_VALENCE))
            .expect("default normal priming"),
        habituation_protocol(v(-0.8), DEFAULT_HABITUATION_ATTENUATION)
            .expect("default negative habituation"),
        habituation_protocol(v(0.8), DEFAULT_HABITUATION_ATTENUATION)
            .expect("default erotic habituation"),
        habituation_protocol(v(0.0), DEFAULT_HABITUATION_ATTENUATION)
            .expect("default neutral habituation"),
        recall_protocol(4, 2, 2, DEFAULT_RECALL_CAP).expect("desk-scale recall"),
        recall_protocol(6, 3, 3, DEFAULT_RECALL_CAP).expect("extended desk-scale recall"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> Valence {
        Valence::new(x).unwrap()
    }

    fn path(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn detection_structure_and_valence() {
        let p = detection_protocol();
        assert_eq!(p.leaf_count(), 8);
        assert!(p.validate().is_ok());
        assert_eq!(p.observer_of("F"), Some("participant"));

        let hit = path(&[("P", "L"), ("T", "L"), ("S", "E"), ("F", "erotic")]);
        assert_eq!(p.valence_of(&hit).value(), 1.0);
        let neutral = path(&[("P", "L"), ("T", "L"), ("S", "N"), ("F", "neutral")]);
        assert_eq!(p.valence_of(&neutral).value(), 0.0);
        let miss = path(&[("P", "L"), ("T", "R"), ("S", "E"), ("F", "blank")]);
        assert_eq!(p.valence_of(&miss).value(), 0.0);
    }

    #[test]
    fn avoidance_valence_is_signed() {
        let p = avoidance_protocol();
        assert_eq!(p.leaf_count(), 8);
        let pleasant = path(&[("P", "A"), ("T", "A"), ("S", "pos"), ("F", "pleasant")]);
        assert_eq!(p.valence_of(&pleasant).value(), 1.0);
        let unpleasant = path(&[("P", "A"), ("T", "B"), ("S", "neg"), ("F", "unpleasant")]);
        assert_eq!(p.valence_of(&unpleasant).value(), -1.0);
    }

    #[test]
    fn priming_orders_events_by_mode() {
        fn first_two_vars(node: &EventNode) -> Vec<String> {
            let mut out = vec![node.variable().to_string()];
            let mut cur = node;
            while !cur.is_experience() {
                cur = &cur.children()[0];
                out.push(cur.variable().to_string());
            }
            out
        }
        let retro =
            priming_protocol(PrimingMode::Retro, DEFAULT_RT, v(0.5)).unwrap();
        assert_eq!(first_two_vars(retro.root()), ["picture", "response", "word", "F"]);
        let normal =
            priming_protocol(PrimingMode::Normal, DEFAULT_RT, v(0.5)).unwrap();
        assert_eq!(first_two_vars(normal.root()), ["picture", "word", "response", "F"]);

        let congruent = path(&[("picture", "pos"), ("response", "pos"), ("word", "pos"), ("F", "congruent")]);
        assert_eq!(retro.valence_of(&congruent).value(), 0.5);
        let incongruent = path(&[("picture", "pos"), ("response", "pos"), ("word", "neg"), ("F", "incongruent")]);
        assert_eq!(retro.valence_of(&incongruent).value(), -0.5);
    }

    #[test]
    fn priming_reaction_times() {
        let rt = ReactionTimeModel::new(500.0, 40.0, 0.0).unwrap();
        let p = priming_protocol(PrimingMode::Retro, rt, v(0.5)).unwrap();
        let congruent = path(&[("picture", "pos"), ("response", "pos"), ("word", "pos"), ("F", "congruent")]);
        assert_eq!(p.reaction_time_ms(&congruent), Some(500.0));
        let incongruent = path(&[("picture", "pos"), ("response", "pos"), ("word", "neg"), ("F", "incongruent")]);
        assert_eq!(p.reaction_time_ms(&incongruent), Some(540.0));
    }

    #[test]
    fn reaction_time_model_validation_and_noise() {
        assert!(ReactionTimeModel::new(0.0, 40.0, 0.0).is_err());
        assert!(ReactionTimeModel::new(100.0, -100.0, 0.0).is_err());
        assert!(ReactionTimeModel::new(100.0, 40.0, -1.0).is_err());

        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let noisy = ReactionTimeModel::new(500.0, 40.0, 25.0).unwrap();
        let n = 2000;
        let mean: f64 =
            (0..n).map(|_| noisy.sample_ms(true, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 500.0).abs() < 3.0, "sample mean {mean} strayed from 500");
        let quiet = ReactionTimeModel::new(500.0, 40.0, 0.0).unwrap();
        assert_eq!(quiet.sample_ms(false, &mut rng), 540.0);
    }

    #[test]
    fn habituation_attenuates_the_matched_branch() {
        let p = habituation_protocol(v(-0.8), 0.5).unwrap();
        let matched = path(&[("P", "A"), ("T", "A"), ("F", "attenuated")]);
        assert!((p.valence_of(&matched).value() + 0.4).abs() < 1e-15);
        let miss = path(&[("P", "A"), ("T", "B"), ("F", "full")]);
        assert!((p.valence_of(&miss).value() + 0.8).abs() < 1e-15);

        assert!(habituation_protocol(v(0.5), 0.0).is_err());
        assert!(habituation_protocol(v(0.5), 1.0).is_err());
    }

    #[test]
    fn recall_tree_and_standardization() {
        let p = recall_protocol(4, 2, 2, 100).unwrap();
        assert_eq!(p.leaf_count(), 36);
        let (mu0, sigma) = recall_standardization(4, 2, 2);
        assert_eq!(mu0, 1.0);
        assert_eq!(sigma, 1.0);

        let full = path(&[("R", "1100"), ("T", "1100"), ("F", "overlap-2")]);
        assert_eq!(p.valence_of(&full).value(), 1.0);
        let none = path(&[("R", "1100"), ("T", "0011"), ("F", "overlap-0")]);
        assert_eq!(p.valence_of(&none).value(), -1.0);
        let half = path(&[("R", "1100"), ("T", "1010"), ("F", "overlap-1")]);
        assert_eq!(p.valence_of(&half).value(), 0.0);
    }

    #[test]
    fn recall_rejects_overflowing_trees_and_bad_sizes() {
        let err = recall_protocol(48, 24, 24, 100_000).unwrap_err();
        match err {
            Error::ProtocolMalformed(msg) => assert!(msg.contains("cap"), "{msg}"),
            other => panic!("expected ProtocolMalformed, got {other:?}"),
        }
        assert!(recall_protocol(4, 5, 2, 100).is_err());
        assert!(recall_protocol(4, 0, 2, 100).is_err());
    }

    #[test]
    fn binomial_matches_known_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(48, 24), 32_247_603_683_100);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn falsification_neutralizes_valence_and_reassigns_the_observer() {
        let base = avoidance_protocol();
        let flat = falsification_variant(&base);
        assert_eq!(flat.name(), "avoidance-falsified");
        assert_eq!(flat.observer_of("F"), Some("independent-observer"));
        let pleasant = path(&[("P", "A"), ("T", "A"), ("S", "pos"), ("F", "pleasant")]);
        assert_eq!(flat.valence_of(&pleasant).value(), 0.0);
        assert_eq!(base.valence_of(&pleasant).value(), 1.0);
    }

    #[test]
    fn two_participant_variant_flips_with_the_first_observer() {
        let base = avoidance_protocol();
        let pleasant = path(&[("P", "A"), ("T", "A"), ("S", "pos"), ("F", "pleasant")]);
        let primary = two_participant_variant(&base, FirstObserver::Primary);
        assert_eq!(primary.valence_of(&pleasant).value(), 1.0);
        assert_eq!(primary.observer_of("F"), Some("participant-primary"));
        let secondary = two_participant_variant(&base, FirstObserver::Secondary);
        assert_eq!(secondary.valence_of(&pleasant).value(), -1.0);
        assert_eq!(secondary.observer_of("F"), Some("participant-secondary"));
    }

    #[test]
    fn nine_protocols_are_structurally_valid() {
        let battery = nine_protocols();
        assert_eq!(battery.len(), 9);
        for p in &battery {
            assert!(p.validate().is_ok(), "{} failed validation", p.name());
            assert!(p.leaf_count() > 0);
        }
        let names: Vec<&str> = battery.iter().map(|p| p.name()).collect();
        assert_eq!(
            names.iter().collect::<std::collections::BTreeSet<_>>().len(),
            9,
            "battery names must be distinct, got {names:?}"
        );
    }

    #[test]
    fn event_node_validation_catches_malformed_trees() {
        let leaf = EventNode::experience("F", vec![("x".into(), 1.0)]).unwrap();
        let err = EventNode::branch(
            "A",
            EventKind::NatureRng,
            vec![("a".into(), 0.6, leaf.clone()), ("b".into(), 0.6, leaf.clone())],
        )
        .unwrap_err();
        assert!(matches!(err, Error::ProtocolMalformed(_)));

        let err = EventNode::experience("F", vec![("x".into(), 0.5), ("x".into(), 0.5)])
            .unwrap_err();
        assert!(matches!(err, Error::ProtocolMalformed(_)));

        let err = EventNode::branch("A", EventKind::Experience, vec![("a".into(), 1.0, leaf)])
            .unwrap_err();
        assert!(matches!(err, Error::ProtocolMalformed(_)));
    }
}
