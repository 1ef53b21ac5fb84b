//! Experiment configuration: TOML text in, validated run descriptors out.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fc_minimal::{FcParams, SocParams};
use crate::gcmg::GcmgParams;
use crate::lux_marchesi::LmParams;
use crate::model::ModelError;
use crate::stylized_facts::SfConfig;
use crate::thurner::ThurnerParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn from_toml(text: &str, e: toml::de::Error) -> Self {
        let (line, column) = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (line, column)
            }
            None => (0, 0),
        };
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    }

    fn from_model(prefix: &str, e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { name, reason } => ConfigError::invalid(format!("{prefix}.{name}"), reason),
            other => ConfigError::invalid(prefix, other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FcMinimal,
    LuxMarchesi,
    Gcmg,
    Thurner,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FcMinimal => "fc_minimal",
            ModelKind::LuxMarchesi => "lux_marchesi",
            ModelKind::Gcmg => "gcmg",
            ModelKind::Thurner => "thurner",
        }
    }
}

/// Parameters of one of the four models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelParams {
    FcMinimal(FcParams),
    LuxMarchesi(LmParams),
    Gcmg(GcmgParams),
    Thurner(ThurnerParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::FcMinimal(_) => ModelKind::FcMinimal,
            ModelParams::LuxMarchesi(_) => ModelKind::LuxMarchesi,
            ModelParams::Gcmg(_) => ModelKind::Gcmg,
            ModelParams::Thurner(_) => ModelKind::Thurner,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelParams::FcMinimal(p) => p.validate(),
            ModelParams::LuxMarchesi(p) => p.validate(),
            ModelParams::Gcmg(p) => p.validate(),
            ModelParams::Thurner(p) => p.validate(),
        }
    }

    fn to_table(&self) -> toml::Table {
        match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("model parameters serialize to a table"),
        }
    }

    fn from_table(kind: ModelKind, table: toml::Table) -> Result<Self, String> {
        fn de<T: DeserializeOwned>(t: toml::Table) -> Result<T, String> {
            toml::Value::Table(t).try_into().map_err(|e: toml::de::Error| e.message().to_string())
        }
        Ok(match kind {
            ModelKind::FcMinimal => ModelParams::FcMinimal(de(table)?),
            ModelKind::LuxMarchesi => ModelParams::LuxMarchesi(de(table)?),
            ModelKind::Gcmg => ModelParams::Gcmg(de(table)?),
            ModelKind::Thurner => ModelParams::Thurner(de(table)?),
        })
    }
}

/// A sweep value, kept as written so integer parameters stay integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
}

impl SweepValue {
    pub fn as_f64(self) -> f64 {
        match self {
            SweepValue::Int(i) => i as f64,
            SweepValue::Float(f) => f,
        }
    }
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Int(i) => write!(f, "{i}"),
            SweepValue::Float(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Key in `[params]`, or `soc.<key>` for the SOC section.
    pub param: String,
    pub values: Vec<SweepValue>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub params: ModelParams,
    pub soc: Option<SocParams>,
    /// Total ticks simulated per run.
    pub steps: u64,
    /// Leading ticks left out of the analysis.
    pub burn_in: u64,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub analysis: SfConfig,
    pub output_dir: PathBuf,
}

/// One concrete run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDescriptor {
    /// Position in the sweep; also the RNG stream id.
    pub index: usize,
    pub label: String,
    pub value: Option<SweepValue>,
    pub params: ModelParams,
    pub soc: Option<SocParams>,
}

#[derive(Deserialize)]
struct Head {
    model: ModelKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw<P> {
    #[allow(dead_code)]
    model: ModelKind,
    params: P,
    #[serde(default)]
    soc: Option<SocParams>,
    steps: u64,
    #[serde(default)]
    burn_in: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    sweep: Option<Sweep>,
    #[serde(default)]
    analysis: SfConfig,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
}

fn parse_raw<P: DeserializeOwned>(text: &str, wrap: fn(P) -> ModelParams) -> Result<ExperimentConfig, ConfigError> {
    let raw: Raw<P> = toml::from_str(text).map_err(|e| ConfigError::from_toml(text, e))?;
    let params = wrap(raw.params);
    Ok(ExperimentConfig {
        model: params.kind(),
        params,
        soc: raw.soc,
        steps: raw.steps,
        burn_in: raw.burn_in,
        seed: raw.seed,
        sweep: raw.sweep,
        analysis: raw.analysis,
        output_dir: raw.output_dir,
    })
}

/// Parses and validates an experiment config.
///
/// Unknown keys anywhere are errors. Every sweep point is checked, so a run
/// that starts will not fail on a bad parameter halfway through.
pub fn load_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let head: Head = toml::from_str(text).map_err(|e| ConfigError::from_toml(text, e))?;
    let config = match head.model {
        ModelKind::FcMinimal => parse_raw(text, ModelParams::FcMinimal)?,
        ModelKind::LuxMarchesi => parse_raw(text, ModelParams::LuxMarchesi)?,
        ModelKind::Gcmg => parse_raw(text, ModelParams::Gcmg)?,
        ModelKind::Thurner => parse_raw(text, ModelParams::Thurner)?,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.params.kind() != self.model {
            return Err(ConfigError::invalid("params", "do not match `model`"));
        }
        if self.steps == 0 {
            return Err(ConfigError::invalid("steps", "must be at least 1"));
        }
        if self.burn_in >= self.steps {
            return Err(ConfigError::invalid("burn_in", "must be smaller than `steps`"));
        }
        if self.soc.is_some() && self.model != ModelKind::FcMinimal {
            return Err(ConfigError::invalid("soc", "only applies to fc_minimal"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(ConfigError::invalid("sweep.values", "needs at least one value"));
            }
            if let Some(v) = s.values.iter().find(|v| !v.as_f64().is_finite()) {
                return Err(ConfigError::invalid("sweep.values", format!("{v} is not finite")));
            }
        }
        let a = &self.analysis;
        if !(a.tail_fraction > 0.0 && a.tail_fraction < 1.0) {
            return Err(ConfigError::invalid("analysis.tail_fraction", "must lie in (0, 1)"));
        }
        if a.max_lag == 0 {
            return Err(ConfigError::invalid("analysis.max_lag", "must be at least 1"));
        }
        if a.aggregation_lags.contains(&0) {
            return Err(ConfigError::invalid("analysis.aggregation_lags", "lags must be at least 1"));
        }
        self.runs().map(|_| ())
    }

    /// One descriptor per sweep value, or a single descriptor without a sweep.
    pub fn runs(&self) -> Result<Vec<RunDescriptor>, ConfigError> {
        let Some(sweep) = &self.sweep else {
            self.params.validate().map_err(|e| ConfigError::from_model("params", e))?;
            if let Some(soc) = &self.soc {
                soc.validate().map_err(|e| ConfigError::from_model("soc", e))?;
            }
            return Ok(vec![RunDescriptor {
                index: 0,
                label: "run".into(),
                value: None,
                params: self.params.clone(),
                soc: self.soc.clone(),
            }]);
        };
        let width = sweep.values.len().to_string().len().max(2);
        sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let (params, soc) = self.with_value(&sweep.param, v)?;
                params
                    .validate()
                    .map_err(|e| ConfigError::from_model("params", e))?;
                if let Some(soc) = &soc {
                    soc.validate().map_err(|e| ConfigError::from_model("soc", e))?;
                }
                Ok(RunDescriptor {
                    index: i,
                    label: format!("{i:0width$}_{}={v}", sweep.param.replace('.', "_")),
                    value: Some(v),
                    params,
                    soc,
                })
            })
            .collect()
    }

    fn with_value(&self, param: &str, v: SweepValue) -> Result<(ModelParams, Option<SocParams>), ConfigError> {
        let field = String::from("sweep.param");
        if let Some(key) = param.strip_prefix("soc.") {
            let Some(soc) = &self.soc else {
                return Err(ConfigError::invalid(field, "sweeps a `soc` key but there is no [soc] section"));
            };
            let toml::Value::Table(mut table) = toml::Value::try_from(soc).expect("soc serializes") else {
                unreachable!()
            };
            set_number(&mut table, key, v).map_err(|r| ConfigError::invalid(&field, r))?;
            let soc: SocParams = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::invalid(&field, e.message().to_string()))?;
            return Ok((self.params.clone(), Some(soc)));
        }
        let mut table = self.params.to_table();
        set_number(&mut table, param, v).map_err(|r| ConfigError::invalid(&field, r))?;
        let params = ModelParams::from_table(self.model, table).map_err(|r| ConfigError::invalid(&field, r))?;
        Ok((params, self.soc.clone()))
    }

    /// SHA-256 of the config with the output directory left out, so moving
    /// the output does not change the identity of the experiment.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn set_number(table: &mut toml::Table, key: &str, v: SweepValue) -> Result<(), String> {
    let slot = table
        .get_mut(key)
        .ok_or_else(|| format!("`{key}` is not a set parameter"))?;
    *slot = match (&*slot, v) {
        (toml::Value::Integer(_), SweepValue::Int(i)) => toml::Value::Integer(i),
        (toml::Value::Integer(_), SweepValue::Float(f)) => {
            return Err(format!("`{key}` is an integer but the sweep has {f}"));
        }
        (toml::Value::Float(_), v) => toml::Value::Float(v.as_f64()),
        _ => return Err(format!("`{key}` is not a number")),
    };
    Ok(())
}
