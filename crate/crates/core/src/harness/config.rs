//! Experiment configuration: one TOML file describes the data source, the
//! split geometry, the model specs, and either a sweep or a defense table.
//!
//! Every run embeds the fully resolved config (as JSON) next to its result
//! files, so a result can always be traced back to the exact knobs that
//! produced it.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{SynthConfig, DEFAULT_BINS, DEFAULT_EVAL_CAP};
use crate::error::{Error, Result};
use crate::models::{Family, MlpSpec, ModelSpec, RegForm, RegKind};

/// Swept experiment knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    ShadowSize,
    TargetSize,
    ClassBalance,
    FeatureBalance,
    NumFeatures,
    /// Alphabet-size values; rows record the measured entropy for bucketing.
    EntropyBucket,
    Depth,
    Width,
    LearningRate,
    L2Lambda,
    /// Values are `"target/shadow"` family pairs; shadow may be `"all"`.
    FamilyMatrix,
    RegularizerKind,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::ShadowSize => "shadow_size",
            Axis::TargetSize => "target_size",
            Axis::ClassBalance => "class_balance",
            Axis::FeatureBalance => "feature_balance",
            Axis::NumFeatures => "num_features",
            Axis::EntropyBucket => "entropy_bucket",
            Axis::Depth => "depth",
            Axis::Width => "width",
            Axis::LearningRate => "learning_rate",
            Axis::L2Lambda => "l2_lambda",
            Axis::FamilyMatrix => "family_matrix",
            Axis::RegularizerKind => "regularizer_kind",
        }
    }

    /// Whether the axis reshapes the generated data itself.
    pub fn is_data_axis(self) -> bool {
        matches!(
            self,
            Axis::ClassBalance | Axis::FeatureBalance | Axis::NumFeatures | Axis::EntropyBucket
        )
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One swept value, kept close to its TOML spelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Int(u64),
    Float(f64),
    Text(String),
}

impl AxisValue {
    pub fn as_size(&self) -> Result<usize> {
        match self {
            AxisValue::Int(v) => Ok(*v as usize),
            other => Err(Error::Config(format!("expected an integer axis value, got {other}"))),
        }
    }

    /// Numeric value; integers are accepted where a float is needed.
    pub fn as_f64(&self) -> Result<f64> {
        match self {
            AxisValue::Int(v) => Ok(*v as f64),
            AxisValue::Float(v) => Ok(*v),
            AxisValue::Text(s) => {
                Err(Error::Config(format!("expected a numeric axis value, got {s:?}")))
            }
        }
    }

    /// `"target/shadow"` pair; the shadow side may be `"all"` (`None`).
    pub fn as_family_pair(&self) -> Result<(Family, Option<Family>)> {
        let AxisValue::Text(s) = self else {
            return Err(Error::Config(format!("expected \"target/shadow\", got {self}")));
        };
        let (t, sh) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("expected \"target/shadow\", got {s:?}")))?;
        let target = Family::from_name(t)
            .ok_or_else(|| Error::Config(format!("unknown family {t:?}")))?;
        let shadow = if sh == "all" {
            None
        } else {
            Some(
                Family::from_name(sh)
                    .ok_or_else(|| Error::Config(format!("unknown family {sh:?}")))?,
            )
        };
        Ok((target, shadow))
    }

    pub fn as_reg_kind(&self) -> Result<RegKind> {
        let AxisValue::Text(s) = self else {
            return Err(Error::Config(format!("expected a regularizer name, got {self}")));
        };
        RegKind::from_name(s).ok_or_else(|| Error::Config(format!("unknown regularizer {s:?}")))
    }
}

/// Floats render in their shortest round-trip form; the same text is used
/// verbatim in CSV cells, which keeps result files byte-stable.
impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Int(v) => write!(f, "{v}"),
            AxisValue::Float(v) => write!(f, "{v}"),
            AxisValue::Text(s) => f.write_str(s),
        }
    }
}

/// CSV data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub label_column: String,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Numeric-label cut: `value > threshold` maps to 1.
    #[serde(default)]
    pub label_threshold: Option<f64>,
    /// Uniform subsample applied once after loading.
    #[serde(default)]
    pub resample: Option<usize>,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

/// Data source: the synthesizer by default, or a CSV file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub synthetic: Option<SynthConfig>,
    pub csv: Option<CsvSource>,
}

impl DataConfig {
    pub fn is_synthetic(&self) -> bool {
        self.csv.is_none()
    }

    /// Generator settings with the config's overrides applied.
    pub fn synth(&self) -> SynthConfig {
        self.synthetic.clone().unwrap_or_default()
    }
}

/// Split geometry; sizes are pool sizes before the 75% member-rate split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub target_size: usize,
    pub shadow_size: usize,
    pub eval_cap: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { target_size: 10_000, shadow_size: 10_000, eval_cap: DEFAULT_EVAL_CAP }
    }
}

/// Target and shadow specs, plus per-family overrides for matrix runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub target: ModelSpec,
    /// `None` mimics the target spec, the usual attacker assumption.
    pub shadow: Option<ModelSpec>,
    pub ann: Option<MlpSpec>,
    pub lr: Option<crate::models::LrSpec>,
    pub knn: Option<crate::models::KnnSpec>,
    pub rf: Option<crate::models::RfSpec>,
    pub svm: Option<crate::models::SvmSpec>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            target: ModelSpec::default_for(Family::Ann),
            shadow: None,
            ann: None,
            lr: None,
            knn: None,
            rf: None,
            svm: None,
        }
    }
}

impl ModelsConfig {
    /// Spec used for `family` in matrix and one-vs-all runs: the per-family
    /// override when present, else the family default.
    pub fn family_spec(&self, family: Family) -> ModelSpec {
        match family {
            Family::Ann => {
                self.ann.clone().map(ModelSpec::Ann).unwrap_or_else(|| default_of(family))
            }
            Family::Lr => self.lr.clone().map(ModelSpec::Lr).unwrap_or_else(|| default_of(family)),
            Family::Knn => {
                self.knn.clone().map(ModelSpec::Knn).unwrap_or_else(|| default_of(family))
            }
            Family::Rf => self.rf.clone().map(ModelSpec::Rf).unwrap_or_else(|| default_of(family)),
            Family::Svm => {
                self.svm.clone().map(ModelSpec::Svm).unwrap_or_else(|| default_of(family))
            }
        }
    }

    pub fn all_family_specs(&self) -> Vec<ModelSpec> {
        Family::ALL.into_iter().map(|f| self.family_spec(f)).collect()
    }
}

fn default_of(family: Family) -> ModelSpec {
    ModelSpec::default_for(family)
}

/// The swept knob, its values, and the repetition plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    #[serde(default)]
    pub values: Vec<AxisValue>,
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// How the `class_balance` axis applies its value. `"pool"` (default)
    /// resamples or synthesizes the whole pool at that balance, so members
    /// and non-members share a distribution. `"members"` rebalances only
    /// the target-train and shadow-IN pools while non-members keep the
    /// source mix, reproducing a training-set selection bias.
    #[serde(default = "default_rebalance")]
    pub rebalance: String,
}

fn default_rebalance() -> String {
    "pool".to_string()
}

impl SweepConfig {
    pub fn member_biased(&self) -> bool {
        self.rebalance == "members"
    }
}

/// Defense-table settings for the `defend` subcommand and the
/// `regularizer_kind` axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseConfig {
    /// Regularizer names; see [`RegKind::from_name`].
    pub kinds: Vec<String>,
    pub lambda: f64,
    /// `"abs_exp_r"` or `"sq_r"`.
    pub form: String,
    /// Training epochs (k).
    pub epochs: usize,
    /// Probe models per epoch (l).
    pub probes: usize,
    /// Records sampled per probe (m).
    pub sample_size: usize,
    /// Protected feature; `None` picks the top label-informative one.
    pub group_feature: Option<usize>,
    pub pair_budget: usize,
    pub mi_bins: usize,
    pub seeds: Vec<u64>,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        let d = crate::defense::DefenseParams::default();
        Self {
            kinds: RegKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            lambda: 0.01,
            form: "abs_exp_r".into(),
            epochs: d.epochs,
            probes: d.probes,
            sample_size: d.sample_size,
            group_feature: None,
            pair_budget: d.pair_budget,
            mi_bins: d.mi_bins,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl DefenseConfig {
    pub fn reg_kinds(&self) -> Result<Vec<RegKind>> {
        self.kinds
            .iter()
            .map(|s| {
                RegKind::from_name(s)
                    .ok_or_else(|| Error::Config(format!("unknown regularizer {s:?}")))
            })
            .collect()
    }

    pub fn reg_form(&self) -> Result<RegForm> {
        match self.form.as_str() {
            "abs_exp_r" => Ok(RegForm::AbsTimesExpR),
            "sq_r" => Ok(RegForm::SqTimesR),
            other => Err(Error::Config(format!("unknown regularizer form {other:?}"))),
        }
    }

    pub fn params(&self) -> crate::defense::DefenseParams {
        crate::defense::DefenseParams {
            epochs: self.epochs,
            probes: self.probes,
            sample_size: self.sample_size,
            group_feature: self.group_feature,
            pair_budget: self.pair_budget,
            mi_bins: self.mi_bins,
        }
    }
}

/// A whole experiment file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    pub models: ModelsConfig,
    pub sweep: Option<SweepConfig>,
    pub defense: Option<DefenseConfig>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The resolved config as pretty JSON, written next to every result.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sweep(&self) -> Result<&SweepConfig> {
        self.sweep.as_ref().ok_or_else(|| Error::Config("missing [sweep] section".into()))
    }

    pub fn defense(&self) -> DefenseConfig {
        self.defense.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.synthetic.is_some() && self.data.csv.is_some() {
            return Err(Error::Config(
                "[data] must configure either the synthesizer or a csv, not both".into(),
            ));
        }
        if self.split.target_size < 4 {
            return Err(Error::Config("split.target_size must be at least 4".into()));
        }
        if self.split.shadow_size < 2 || self.split.shadow_size % 2 != 0 {
            return Err(Error::Config("split.shadow_size must be even and positive".into()));
        }
        self.models.target.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(shadow) = &self.models.shadow {
            shadow.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        for spec in self.models.all_family_specs() {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep)?;
        }
        if let Some(defense) = &self.defense {
            defense.reg_kinds()?;
            defense.reg_form()?;
            if defense.kinds.is_empty() {
                return Err(Error::Config("defense.kinds must be nonempty".into()));
            }
            if defense.seeds.len() < 3 {
                return Err(Error::Config("defense.seeds needs at least 3 entries".into()));
            }
            if defense.epochs == 0 || defense.probes == 0 || defense.sample_size == 0 {
                return Err(Error::Config(
                    "defense epochs, probes and sample_size must be positive".into(),
                ));
            }
            if defense.lambda < 0.0 {
                return Err(Error::Config("defense.lambda must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn validate_sweep(&self, sweep: &SweepConfig) -> Result<()> {
        if sweep.repetitions == 0 {
            return Err(Error::Config("sweep.repetitions must be at least 1".into()));
        }
        if sweep.values.is_empty() && sweep.axis != Axis::FamilyMatrix {
            return Err(Error::Config("sweep.values must be nonempty".into()));
        }
        let needs_ann_target = matches!(
            sweep.axis,
            Axis::Depth | Axis::Width | Axis::LearningRate | Axis::L2Lambda | Axis::RegularizerKind
        );
        if needs_ann_target && !matches!(self.models.target, ModelSpec::Ann(_)) {
            return Err(Error::Config(format!(
                "the {} axis needs an ann target model",
                sweep.axis
            )));
        }
        match sweep.rebalance.as_str() {
            "pool" => {}
            "members" => {
                if sweep.axis != Axis::ClassBalance {
                    return Err(Error::Config(format!(
                        "rebalance = \"members\" only applies to the class_balance axis, \
                         not {}",
                        sweep.axis
                    )));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "sweep.rebalance must be \"pool\" or \"members\", got \"{other}\""
                )))
            }
        }
        for v in &sweep.values {
            match sweep.axis {
                Axis::ShadowSize => {
                    let s = v.as_size()?;
                    if s < 2 || s % 2 != 0 {
                        return Err(Error::Config(format!(
                            "shadow_size values must be even and positive, got {s}"
                        )));
                    }
                }
                Axis::TargetSize => {
                    if v.as_size()? < 4 {
                        return Err(Error::Config("target_size values must be at least 4".into()));
                    }
                }
                Axis::NumFeatures | Axis::Width => {
                    if v.as_size()? == 0 {
                        return Err(Error::Config(format!(
                            "{} values must be at least 1",
                            sweep.axis
                        )));
                    }
                }
                Axis::EntropyBucket => {
                    if v.as_size()? < 2 {
                        return Err(Error::Config(
                            "entropy_bucket values are alphabet sizes and must be at least 2"
                                .into(),
                        ));
                    }
                }
                Axis::Depth => {
                    v.as_size()?;
                }
                Axis::ClassBalance | Axis::FeatureBalance => {
                    let b = v.as_f64()?;
                    if !(b > 0.0 && b < 1.0) {
                        return Err(Error::Config(format!(
                            "{} values must lie in (0,1), got {b}",
                            sweep.axis
                        )));
                    }
                }
                Axis::LearningRate => {
                    if v.as_f64()? <= 0.0 {
                        return Err(Error::Config("learning_rate values must be positive".into()));
                    }
                }
                Axis::L2Lambda => {
                    if v.as_f64()? < 0.0 {
                        return Err(Error::Config("l2_lambda values must be nonnegative".into()));
                    }
                }
                Axis::FamilyMatrix => {
                    v.as_family_pair()?;
                }
                Axis::RegularizerKind => {
                    v.as_reg_kind()?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sweep_config_parses() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [sweep]
            axis = "shadow_size"
            values = [1000, 2000]
            repetitions = 3
            seed = 7
            "#,
        )
        .unwrap();
        let sweep = cfg.sweep().unwrap();
        assert_eq!(sweep.axis, Axis::ShadowSize);
        assert_eq!(sweep.values, vec![AxisValue::Int(1000), AxisValue::Int(2000)]);
        assert!(cfg.data.is_synthetic());
        assert_eq!(cfg.split.target_size, 10_000);
    }

    #[test]
    fn model_overrides_merge_with_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [models.target]
            family = "ann"
            learning_rate = 0.01
            epochs = 150

            [models.knn]
            k = 5

            [sweep]
            axis = "class_balance"
            values = [0.1, 0.5]
            repetitions = 2
            "#,
        )
        .unwrap();
        let ModelSpec::Ann(mlp) = &cfg.models.target else { panic!() };
        assert_eq!(mlp.learning_rate, 0.01);
        assert_eq!(mlp.epochs, 150);
        assert_eq!(mlp.hidden_layers, vec![50]);
        let ModelSpec::Knn(knn) = cfg.models.family_spec(Family::Knn) else { panic!() };
        assert_eq!(knn.k, 5);
        let ModelSpec::Rf(rf) = cfg.models.family_spec(Family::Rf) else { panic!() };
        assert_eq!(rf.n_estimators, 100);
    }

    #[test]
    fn axis_value_types_are_checked() {
        let err = ExperimentConfig::from_toml(
            r#"
            [sweep]
            axis = "shadow_size"
            values = [1001]
            repetitions = 1
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("even"), "{err}");

        let err = ExperimentConfig::from_toml(
            r#"
            [sweep]
            axis = "class_balance"
            values = [0.0]
            repetitions = 1
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");

        let err = ExperimentConfig::from_toml(
            r#"
            [sweep]
            axis = "family_matrix"
            values = ["ann/quantum"]
            repetitions = 1
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown family"), "{err}");
    }

    #[test]
    fn depth_axis_requires_ann_target() {
        let err = ExperimentConfig::from_toml(
            r#"
            [models.target]
            family = "knn"

            [sweep]
            axis = "depth"
            values = [1, 5]
            repetitions = 1
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ann target"), "{err}");
    }

    #[test]
    fn family_pair_parsing() {
        let v = AxisValue::Text("rf/all".into());
        assert_eq!(v.as_family_pair().unwrap(), (Family::Rf, None));
        let v = AxisValue::Text("ann/svm".into());
        assert_eq!(v.as_family_pair().unwrap(), (Family::Ann, Some(Family::Svm)));
        assert!(AxisValue::Text("nope".into()).as_family_pair().is_err());
    }

    #[test]
    fn both_data_sources_rejected() {
        let err = ExperimentConfig::from_toml(
            r#"
            [data.synthetic]
            num_records = 100

            [data.csv]
            path = "x.csv"
            label_column = "y"

            [sweep]
            axis = "shadow_size"
            values = [10]
            repetitions = 1
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("not both"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml(
            r#"
            [sweep]
            axis = "shadow_size"
            values = [10]
            repetitions = 1
            typo_knob = 3
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("typo_knob"), "{err}");
    }

    #[test]
    fn resolved_json_round_trips() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [defense]
            kinds = ["none", "group_fair"]
            lambda = 0.02
            seeds = [1, 2, 3]
            "#,
        )
        .unwrap();
        let json = cfg.resolved_json();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(
            cfg.defense().reg_kinds().unwrap(),
            vec![RegKind::None, RegKind::GroupFair]
        );
    }
}
