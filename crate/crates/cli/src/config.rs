//! Run configuration: one TOML document holding exactly one payload table.

use std::path::{Path, PathBuf};

use distreg_core::distributions::ReferenceMeasure;
use distreg_core::embeddings::{DirectionScheme, EmbeddingConfig};
use distreg_core::experiments::{
    BiasProbeConfig, EcoExperimentConfig, GmmExperimentConfig, ProbeVector, RateConfig, TrueDistribution,
    TruthModel,
};
use distreg_core::io::load_reference;
use distreg_core::kernel_ridge::{CvConfig, KernelConfig};
use distreg_core::sinkhorn::SinkhornMethod;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// Where Sinkhorn reference atoms come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Samples-layout CSV with an optional trailing `weight` column.
    File(PathBuf),
    /// `count` uniform points in the unit ball, uniform weights.
    UnitBall { count: usize, seed: u64 },
}

fn default_reg() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    2000
}

/// Embedding configuration as written in a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSpec {
    // Braces so that stray keys are rejected like in the other variants.
    MeanLinear {},
    MeanRff {
        num_features: usize,
        bandwidth: f64,
        seed: u64,
    },
    SlicedWasserstein {
        num_directions: usize,
        num_quantiles: usize,
        #[serde(default)]
        trim: f64,
        seed: u64,
        #[serde(default)]
        directions: DirectionScheme,
    },
    Sinkhorn {
        reference: ReferenceSpec,
        #[serde(default = "default_reg")]
        reg: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default)]
        method: SinkhornMethod,
    },
}

impl EmbeddingSpec {
    /// Materializes the reference measure (if any) for ambient dimension `dim`.
    pub fn resolve(&self, dim: usize, base: &Path) -> Result<EmbeddingConfig, CliError> {
        Ok(match self.clone() {
            EmbeddingSpec::MeanLinear {} => EmbeddingConfig::MeanLinear,
            EmbeddingSpec::MeanRff { num_features, bandwidth, seed } => {
                EmbeddingConfig::MeanRff { num_features, bandwidth, seed }
            }
            EmbeddingSpec::SlicedWasserstein { num_directions, num_quantiles, trim, seed, directions } => {
                EmbeddingConfig::SlicedWasserstein { num_directions, num_quantiles, trim, seed, directions }
            }
            EmbeddingSpec::Sinkhorn { reference, reg, tol, max_iter, method } => {
                let reference = match reference {
                    ReferenceSpec::File(p) => load_reference(&base.join(p))?,
                    ReferenceSpec::UnitBall { count, seed } => ReferenceMeasure::uniform_ball(dim, count, seed)?,
                };
                EmbeddingConfig::Sinkhorn { reference, reg, tol, max_iter, method }
            }
        })
    }

    pub fn input_files(&self) -> Vec<PathBuf> {
        match self {
            EmbeddingSpec::Sinkhorn { reference: ReferenceSpec::File(p), .. } => vec![p.clone()],
            _ => Vec::new(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            EmbeddingSpec::MeanRff { seed, .. } | EmbeddingSpec::SlicedWasserstein { seed, .. } => vec![*seed],
            EmbeddingSpec::Sinkhorn { reference: ReferenceSpec::UnitBall { seed, .. }, .. } => vec![*seed],
            _ => Vec::new(),
        }
    }
}

fn default_embeddings_name() -> String {
    "embeddings.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedPayload {
    pub samples: PathBuf,
    pub embedding: EmbeddingSpec,
    #[serde(default = "default_embeddings_name")]
    pub output: String,
}

fn default_length_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitPayload {
    pub samples: PathBuf,
    pub labels: PathBuf,
    pub embedding: EmbeddingSpec,
    /// Fixed ridge parameter; ignored when `cv` is present.
    pub lambda: Option<f64>,
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    /// Grid search over `(lambda, length_scale)`.
    pub cv: Option<CvConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictPayload {
    pub model: PathBuf,
    pub samples: PathBuf,
    pub embedding: EmbeddingSpec,
}

fn default_replicates_rate() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePayload {
    pub embedding: EmbeddingSpec,
    #[serde(default)]
    pub truth: TruthModel,
    pub n_grid: Vec<usize>,
    pub sample_grid: Vec<usize>,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_replicates_rate")]
    pub replicates: usize,
    pub seed: u64,
}

impl RatePayload {
    pub fn resolve(&self, base: &Path) -> Result<RateConfig, CliError> {
        Ok(RateConfig {
            embedding: self.embedding.resolve(self.truth.dim(), base)?,
            truth: self.truth.clone(),
            n_grid: self.n_grid.clone(),
            sample_grid: self.sample_grid.clone(),
            lambdas: self.lambdas.clone(),
            kernel: self.kernel,
            replicates: self.replicates,
            seed: self.seed,
        })
    }
}

fn default_train_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmPayload {
    pub dim: usize,
    pub max_modes: usize,
    pub n_grid: Vec<usize>,
    pub sample_grid: Vec<usize>,
    pub embedding: EmbeddingSpec,
    pub cv: CvConfig,
    pub replicates: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub seed: u64,
}

impl GmmPayload {
    pub fn resolve(&self, base: &Path) -> Result<GmmExperimentConfig, CliError> {
        Ok(GmmExperimentConfig {
            dim: self.dim,
            max_modes: self.max_modes,
            n_grid: self.n_grid.clone(),
            sample_grid: self.sample_grid.clone(),
            embedding: self.embedding.resolve(self.dim, base)?,
            cv: self.cv.clone(),
            replicates: self.replicates,
            train_fraction: self.train_fraction,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasPayload {
    pub embedding: EmbeddingSpec,
    pub truth: TrueDistribution,
    pub sample_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_probes")]
    pub probes: Vec<ProbeVector>,
    pub seed: u64,
}

fn default_probes() -> Vec<ProbeVector> {
    vec![ProbeVector::Ones]
}

impl BiasPayload {
    pub fn resolve(&self, base: &Path) -> Result<BiasProbeConfig, CliError> {
        Ok(BiasProbeConfig {
            embedding: self.embedding.resolve(self.truth.dim(), base)?,
            truth: self.truth.clone(),
            sample_grid: self.sample_grid.clone(),
            replicates: self.replicates,
            probes: self.probes.clone(),
            seed: self.seed,
        })
    }
}

/// The parsed run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictPayload>,
    #[serde(rename = "experiment-rate", skip_serializing_if = "Option::is_none")]
    pub experiment_rate: Option<RatePayload>,
    #[serde(rename = "experiment-gmm", skip_serializing_if = "Option::is_none")]
    pub experiment_gmm: Option<GmmPayload>,
    #[serde(rename = "experiment-bias", skip_serializing_if = "Option::is_none")]
    pub experiment_bias: Option<BiasPayload>,
    #[serde(rename = "experiment-eco", skip_serializing_if = "Option::is_none")]
    pub experiment_eco: Option<EcoExperimentConfig>,
}

/// The single payload of a run file.
#[derive(Debug, Clone)]
pub enum Payload {
    Embed(EmbedPayload),
    Fit(FitPayload),
    Predict(PredictPayload),
    Rate(RatePayload),
    Gmm(GmmPayload),
    Bias(BiasPayload),
    Eco(EcoExperimentConfig),
}

impl Payload {
    pub fn table_name(&self) -> &'static str {
        match self {
            Payload::Embed(_) => "embed",
            Payload::Fit(_) => "fit",
            Payload::Predict(_) => "predict",
            Payload::Rate(_) => "experiment-rate",
            Payload::Gmm(_) => "experiment-gmm",
            Payload::Bias(_) => "experiment-bias",
            Payload::Eco(_) => "experiment-eco",
        }
    }

    pub fn is_experiment(&self) -> bool {
        self.table_name().starts_with("experiment-")
    }
}

impl RunConfig {
    pub fn into_payload(self) -> Result<Payload, CliError> {
        let mut found: Vec<Payload> = Vec::new();
        found.extend(self.embed.map(Payload::Embed));
        found.extend(self.fit.map(Payload::Fit));
        found.extend(self.predict.map(Payload::Predict));
        found.extend(self.experiment_rate.map(Payload::Rate));
        found.extend(self.experiment_gmm.map(Payload::Gmm));
        found.extend(self.experiment_bias.map(Payload::Bias));
        found.extend(self.experiment_eco.map(Payload::Eco));
        match found.len() {
            1 => Ok(found.pop().expect("one payload")),
            0 => Err(CliError::usage("config holds no payload table")),
            _ => Err(CliError::usage(format!(
                "config must hold exactly one payload table, found: {}",
                found.iter().map(Payload::table_name).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn from_payload(p: &Payload) -> RunConfig {
        let mut rc = RunConfig {
            embed: None,
            fit: None,
            predict: None,
            experiment_rate: None,
            experiment_gmm: None,
            experiment_bias: None,
            experiment_eco: None,
        };
        match p.clone() {
            Payload::Embed(x) => rc.embed = Some(x),
            Payload::Fit(x) => rc.fit = Some(x),
            Payload::Predict(x) => rc.predict = Some(x),
            Payload::Rate(x) => rc.experiment_rate = Some(x),
            Payload::Gmm(x) => rc.experiment_gmm = Some(x),
            Payload::Bias(x) => rc.experiment_bias = Some(x),
            Payload::Eco(x) => rc.experiment_eco = Some(x),
        }
        rc
    }
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_owned()),
    }
}

/// Applies `a.b.c=value`, creating intermediate tables.
pub fn apply_override(doc: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--set expects key=value, got {assignment:?}")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("invalid --set key {key:?}")));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("--set key {key:?}: {part} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn parse(text: &str, overrides: &[String]) -> Result<Payload, CliError> {
    let mut doc: Table = text.parse().map_err(|e: toml::de::Error| CliError::usage(format!("invalid config: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let rc: RunConfig = Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::usage(format!("invalid config: {e}")))?;
    rc.into_payload()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_and_replace() {
        let mut t: Table = "[fit]\nlambda = 1.0\n".parse().unwrap();
        apply_override(&mut t, "fit.lambda=0.5").unwrap();
        apply_override(&mut t, "fit.cv.lambdas=[0.1, 1.0]").unwrap();
        apply_override(&mut t, "fit.samples=data/s.csv").unwrap();
        assert_eq!(t["fit"]["lambda"].as_float(), Some(0.5));
        assert_eq!(t["fit"]["cv"]["lambdas"].as_array().unwrap().len(), 2);
        assert_eq!(t["fit"]["samples"].as_str(), Some("data/s.csv"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "fit.lambda.x=1").is_err());
    }

    #[test]
    fn exactly_one_payload() {
        let two = "[experiment-eco]\nseed = 1\n[experiment-bias]\nseed = 1\n";
        assert!(parse(two, &[]).is_err());
        assert!(parse("", &[]).is_err());
        let p = parse("[experiment-eco]\nseed = 4\n", &[]).unwrap();
        match p {
            Payload::Eco(c) => {
                assert_eq!(c.seed, 4);
                assert_eq!(c.dims, vec![5, 10, 15, 20]);
            }
            _ => panic!("wrong payload"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[experiment-eco]\nseeds = 1\n", &[]).is_err());
        assert!(parse("[other]\nx = 1\n", &[]).is_err());
        let e = "[embed]\nsamples = \"s.csv\"\nembedding = { kind = \"mean_linear\", extra = 1 }\n";
        assert!(parse(e, &[]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "[embed]\nsamples = \"s.csv\"\n[embed.embedding]\nkind = \"sinkhorn\"\nreference = { unit_ball = { count = 5, seed = 2 } }\n";
        let p = parse(text, &[]).unwrap();
        let echoed = toml::to_string(&RunConfig::from_payload(&p)).unwrap();
        assert!(echoed.contains("max_iter = 2000"), "{echoed}");
        let again = parse(&echoed, &[]).unwrap();
        assert_eq!(
            toml::to_string(&RunConfig::from_payload(&again)).unwrap(),
            echoed
        );
    }

    #[test]
    fn shipped_configs_parse() {
        for (name, text) in [
            ("rate", include_str!("../configs/rate.toml")),
            ("bias", include_str!("../configs/bias.toml")),
            ("gmm", include_str!("../configs/gmm.toml")),
            ("eco", include_str!("../configs/eco.toml")),
        ] {
            let p = parse(text, &[]).unwrap_or_else(|e| panic!("{name}: {}", e.message));
            assert!(p.is_experiment());
            assert_eq!(p.table_name(), format!("experiment-{name}"));
        }
    }
}
