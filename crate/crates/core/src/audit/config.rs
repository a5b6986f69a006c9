//! Audit configuration.
//!
//! TOML is the primary encoding; a `.json` file holding the same structure
//! is accepted too. Sections and their defaults:
//!
//! ```toml
//! [dataset]
//! path = "data/synthetic_600.csv"   # relative to the config file
//! label = "y"
//! categorical = ["sex", "region"]   # schema hints; otherwise inferred
//! numeric = []
//! quasi_identifiers = ["sex", "region", "age_band"]
//!
//! # instead of `path`, generate the built-in benchmark:
//! # [dataset.synthetic]
//! # rows = 600
//! # seed = 1
//! # single_outs = 0
//!
//! [audit]
//! regimes = ["central_weak"]        # central_weak | central_defended | federated
//! kinds = ["gradient_boosted_trees"]
//! families = ["lira_offline"]       # default: all ten
//! out = "audit_out"
//! population_sample = 2500
//! alphas = [0.01]
//! bootstrap = 0
//!
//! [seeds]
//! master = 0
//! sweep = 1
//!
//! [attacks]
//! online_references = 256
//! offline_references = 128
//! rmia_gamma = 2.0
//! rmia_offline_a = 0.3
//! rmia_beta = 0.5
//! threshold = { method = "sweep" }  # or { method = "percentile", top = 10.0 }
//!
//! [attacks.overrides.lira_online]
//! references = 64
//!
//! [federated]
//! participants = 3
//! rounds = 20
//! local_epochs = 10
//! trees_per_round = 2
//!
//! [transfer]
//! targets = ["decision_tree", "naive_bayes"]
//! surrogates = ["decision_tree", "naive_bayes"]
//! families = ["rmia_offline"]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackFamily, AttackSpec, PoolMode, ThresholdMethod};
use crate::data::synthetic::{inject_single_outs, membership_benchmark};
use crate::data::{load_csv, ColumnKind, Dataset, QuasiIdentifierSet, SchemaHint};
use crate::error::{Error, Result};
use crate::federated::FederatedConfig;
use crate::models::ModelKind;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Grid search over the weak grid.
    CentralWeak,
    /// Grid search over the defense grid.
    CentralDefended,
    /// Simulated federated training.
    Federated,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::CentralWeak, Regime::CentralDefended, Regime::Federated];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::CentralWeak => "central_weak",
            Regime::CentralDefended => "central_defended",
            Regime::Federated => "federated",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub rows: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rows turned into single-outs after generation.
    #[serde(default)]
    pub single_outs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub quasi_identifiers: Vec<String>,
}

fn default_label() -> String {
    "y".into()
}

impl DatasetConfig {
    pub fn schema_hint(&self) -> SchemaHint {
        let mut hint = SchemaHint::new();
        for c in &self.categorical {
            hint.insert(c.clone(), ColumnKind::Categorical);
        }
        for c in &self.numeric {
            hint.insert(c.clone(), ColumnKind::Numeric);
        }
        hint
    }

    /// Load the dataset; relative paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        match (&self.path, &self.synthetic) {
            (Some(p), None) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                load_csv(path, &self.schema_hint(), &self.label)
            }
            (None, Some(s)) => {
                let mut ds = membership_benchmark(s.rows, s.seed)?;
                if s.single_outs > 0 {
                    use rand::seq::index::sample;
                    let mut rng = seed::rng(seed::derive_seed(s.seed, &[1]));
                    let mut rows = sample(&mut rng, ds.len(), s.single_outs.min(ds.len())).into_vec();
                    rows.sort_unstable();
                    inject_single_outs(&mut ds, &rows, seed::derive_seed(s.seed, &[2]))?;
                }
                Ok(ds)
            }
            _ => Err(Error::Config(
                "[dataset] needs exactly one of `path` or `synthetic`".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Regime>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<ModelKind>,
    #[serde(default = "default_families")]
    pub families: Vec<AttackFamily>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Population records queried by RMIA.
    #[serde(default = "default_population_sample")]
    pub population_sample: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    /// Bootstrap resamples for AUC intervals; 0 disables them.
    #[serde(default)]
    pub bootstrap: usize,
}

fn default_regimes() -> Vec<Regime> {
    vec![Regime::CentralWeak]
}
fn default_kinds() -> Vec<ModelKind> {
    vec![ModelKind::GradientBoostedTrees]
}
fn default_families() -> Vec<AttackFamily> {
    AttackFamily::ALL.to_vec()
}
fn default_out() -> PathBuf {
    PathBuf::from("audit_out")
}
fn default_population_sample() -> usize {
    2500
}
fn default_alphas() -> Vec<f64> {
    vec![0.01]
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            regimes: default_regimes(),
            kinds: default_kinds(),
            families: default_families(),
            out: default_out(),
            population_sample: default_population_sample(),
            alphas: default_alphas(),
            bootstrap: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub master: u64,
    /// Number of repetitions, each with its own partition.
    #[serde(default = "one")]
    pub sweep: usize,
}

fn one() -> usize {
    1
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { master: 0, sweep: 1 }
    }
}

impl SeedConfig {
    /// Seed of repetition `i`.
    pub fn run_seed(&self, i: usize) -> u64 {
        seed::derive_seed(self.master, &[seed::stage::SWEEP, i as u64])
    }
}

/// Per-family settings that replace the section-wide ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_model: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdMethod>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online_references: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline_references: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_model: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default = "default_gamma")]
    pub rmia_gamma: f64,
    #[serde(default = "default_offline_a")]
    pub rmia_offline_a: f64,
    #[serde(default = "default_beta")]
    pub rmia_beta: f64,
    #[serde(default)]
    pub threshold: ThresholdMethod,
    #[serde(default)]
    pub overrides: BTreeMap<AttackFamily, FamilyOverride>,
}

fn default_gamma() -> f64 {
    2.0
}
fn default_offline_a() -> f64 {
    0.3
}
fn default_beta() -> f64 {
    0.5
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            online_references: None,
            offline_references: None,
            surrogate: None,
            attack_model: None,
            top_k: None,
            rmia_gamma: default_gamma(),
            rmia_offline_a: default_offline_a(),
            rmia_beta: default_beta(),
            threshold: ThresholdMethod::Sweep,
            overrides: BTreeMap::new(),
        }
    }
}

impl AttackConfig {
    pub fn spec(&self, family: AttackFamily, seed: u64) -> AttackSpec {
        let o = self.overrides.get(&family).cloned().unwrap_or_default();
        let references = o.references.or(match family.pool_mode() {
            Some(PoolMode::Online) => self.online_references,
            Some(PoolMode::Offline) => self.offline_references,
            None => None,
        });
        AttackSpec {
            family,
            n_reference_models: references,
            surrogate_kind: o.surrogate.or(self.surrogate),
            attack_model_kind: o.attack_model.or(self.attack_model),
            top_k: o.top_k.or(self.top_k),
            rmia_gamma: self.rmia_gamma,
            rmia_offline_a: self.rmia_offline_a,
            rmia_beta: self.rmia_beta,
            threshold: o.threshold.unwrap_or(self.threshold),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederatedSection {
    #[serde(default = "default_participants")]
    pub participants: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
    #[serde(default = "default_trees_per_round")]
    pub trees_per_round: usize,
}

fn default_participants() -> usize {
    3
}
fn default_rounds() -> usize {
    20
}
fn default_local_epochs() -> usize {
    10
}
fn default_trees_per_round() -> usize {
    2
}

impl Default for FederatedSection {
    fn default() -> Self {
        Self {
            participants: default_participants(),
            rounds: default_rounds(),
            local_epochs: default_local_epochs(),
            trees_per_round: default_trees_per_round(),
        }
    }
}

impl FederatedSection {
    pub fn config(&self, seed: u64) -> FederatedConfig {
        FederatedConfig {
            n_participants: self.participants,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            trees_per_round: self.trees_per_round,
            aggregation: None,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub targets: Vec<ModelKind>,
    pub surrogates: Vec<ModelKind>,
    #[serde(default = "default_families")]
    pub families: Vec<AttackFamily>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub attacks: AttackConfig,
    #[serde(default)]
    pub federated: FederatedSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferConfig>,
}

impl AuditConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a config file; `.json` files are parsed as JSON, anything else
    /// as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks that need no data.
    pub fn check(&self) -> Result<()> {
        let a = &self.audit;
        if a.regimes.is_empty() || a.kinds.is_empty() || a.families.is_empty() {
            return Err(Error::Config(
                "[audit] needs at least one regime, kind and family".into(),
            ));
        }
        if self.seeds.sweep == 0 {
            return Err(Error::Config("[seeds] sweep must be at least 1".into()));
        }
        if a.population_sample == 0 {
            return Err(Error::Config("[audit] population_sample must be positive".into()));
        }
        if a.alphas.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::Config("[audit] alphas must lie in (0, 1]".into()));
        }
        for n in [self.attacks.online_references, self.attacks.offline_references]
            .into_iter()
            .chain(self.attacks.overrides.values().map(|o| o.references))
            .flatten()
        {
            if n < 2 {
                return Err(Error::Config("reference pools need at least two models".into()));
            }
        }
        if a.regimes.contains(&Regime::Federated) {
            if self.federated.participants < 2 || self.federated.rounds == 0 {
                return Err(Error::Config(
                    "[federated] needs at least two participants and one round".into(),
                ));
            }
        }
        if let Some(t) = &self.transfer {
            if t.targets.is_empty() || t.surrogates.is_empty() || t.families.is_empty() {
                return Err(Error::Config("[transfer] lists must be nonempty".into()));
            }
        }
        if self.dataset.path.is_some() == self.dataset.synthetic.is_some() {
            return Err(Error::Config(
                "[dataset] needs exactly one of `path` or `synthetic`".into(),
            ));
        }
        Ok(())
    }

    /// Checks against the loaded dataset.
    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if !self.dataset.quasi_identifiers.is_empty() {
            QuasiIdentifierSet::from_names(ds, &self.dataset.quasi_identifiers)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}
