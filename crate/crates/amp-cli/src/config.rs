//! Experiment configuration: a sectioned TOML file, schema-validated before
//! any work. Unknown keys are rejected with the offending key named.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use amp_core::anchoring::{AnchorTransform, ConsistencySpec};
use amp_core::datasets::{self, CorruptionKind, SyntheticDataset};
use amp_core::nn::{Activation, MlpModel, SgdConfig};
use amp_core::scoring::TemperatureMode;
use amp_core::seeding::{self, SeedSplit};
use amp_core::Tensor2D;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub sgd: SgdSection,
    pub inference: InferenceConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub consistency: Option<ConsistencyConfig>,
    #[serde(default)]
    pub ood: Option<OodConfig>,
    #[serde(default)]
    pub ntk: Option<NtkConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: String,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub anchored: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub schedule: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyConfig {
    #[serde(default = "default_apply_every")]
    pub apply_every: usize,
    pub transforms: Vec<TransformConfig>,
}

fn default_apply_every() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind")]
pub enum TransformConfig {
    #[serde(rename = "gaussian_noise")]
    GaussianNoise { sigma: f64 },
    #[serde(rename = "random_scale")]
    RandomScale { lo: f64, hi: f64 },
    #[serde(rename = "random_mask")]
    RandomMask { p: f64 },
    #[serde(rename = "identity")]
    Identity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub k_anchors: usize,
    pub temperature_mode: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    TemperatureMode::DEFAULT_EPSILON
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodConfig {
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub rotation_deg: Option<f64>,
    #[serde(default)]
    pub corruption: Option<String>,
    #[serde(default)]
    pub level: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtkConfig {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_seeds_per_width")]
    pub seeds_per_width: usize,
    #[serde(default = "default_anchor_scale")]
    pub anchor_scale: f64,
    #[serde(default = "default_demo_train_n")]
    pub demo_train_n: usize,
    #[serde(default = "default_demo_anchors")]
    pub demo_anchors: usize,
    #[serde(default = "default_demo_grid")]
    pub demo_grid: usize,
}

fn default_grid_points() -> usize {
    64
}
fn default_widths() -> Vec<usize> {
    vec![64, 256, 1024, 4096]
}
fn default_pairs() -> usize {
    20
}
fn default_seeds_per_width() -> usize {
    10
}
fn default_anchor_scale() -> f64 {
    0.3
}
fn default_demo_train_n() -> usize {
    80
}
fn default_demo_anchors() -> usize {
    5
}
fn default_demo_grid() -> usize {
    25
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.dataset.kind.as_str() {
            "two_moons" => {
                if self.dataset.noise.is_none() {
                    return Err(CliError::Config(
                        "dataset.noise is required for kind \"two_moons\"".into(),
                    ));
                }
            }
            "gaussian_blobs" => {
                if self.dataset.centers.is_none() || self.dataset.sigma.is_none() {
                    return Err(CliError::Config(
                        "dataset.centers and dataset.sigma are required for kind \"gaussian_blobs\""
                            .into(),
                    ));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "dataset.kind \"{other}\" is not one of: two_moons, gaussian_blobs"
                )));
            }
        }
        match self.inference.temperature_mode.as_str() {
            "softened" | "direct" => {}
            other => {
                return Err(CliError::Config(format!(
                    "inference.temperature_mode \"{other}\" is not one of: softened, direct"
                )));
            }
        }
        if let Some(ood) = &self.ood {
            match ood.kind.as_str() {
                "ring" => {
                    if ood.radius.is_none() {
                        return Err(CliError::Config(
                            "ood.radius is required for kind \"ring\"".into(),
                        ));
                    }
                }
                "rotated_moons" => {
                    if ood.rotation_deg.is_none() {
                        return Err(CliError::Config(
                            "ood.rotation_deg is required for kind \"rotated_moons\"".into(),
                        ));
                    }
                }
                "corruption" => {
                    if ood.corruption.is_none() {
                        return Err(CliError::Config(
                            "ood.corruption is required for kind \"corruption\"".into(),
                        ));
                    }
                }
                other => {
                    return Err(CliError::Config(format!(
                        "ood.kind \"{other}\" is not one of: ring, rotated_moons, corruption"
                    )));
                }
            }
        }
        if let Some(c) = &self.consistency {
            self.consistency_spec_from(c).validate().map_err(|e| {
                CliError::Config(format!("consistency section invalid: {e}"))
            })?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> SeedSplit {
        SeedSplit::from_global(self.seed)
    }

    /// Generate the ID train and test splits (raw coordinates).
    pub fn generate_id_data(&self) -> Result<(SyntheticDataset, SyntheticDataset), CliError> {
        let split = self.seeds();
        let train_seed = seeding::derive(split.data, &[1]);
        let test_seed = seeding::derive(split.data, &[2]);
        let gen = |n: usize, seed: u64| -> Result<SyntheticDataset, CliError> {
            match self.dataset.kind.as_str() {
                "two_moons" => datasets::gen_two_moons(n, self.dataset.noise.unwrap(), seed)
                    .map_err(CliError::from),
                "gaussian_blobs" => datasets::gen_gaussian_blobs(
                    n,
                    self.dataset.centers.as_ref().unwrap(),
                    self.dataset.sigma.unwrap(),
                    seed,
                )
                .map_err(CliError::from),
                _ => unreachable!("validated"),
            }
        };
        Ok((gen(self.dataset.n_train, train_seed)?, gen(self.dataset.n_test, test_seed)?))
    }

    pub fn num_classes(&self) -> usize {
        match self.dataset.kind.as_str() {
            "gaussian_blobs" => self.dataset.centers.as_ref().map_or(2, Vec::len),
            _ => 2,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.dataset.kind.as_str() {
            "gaussian_blobs" => self
                .dataset
                .centers
                .as_ref()
                .and_then(|c| c.first())
                .map_or(2, Vec::len),
            _ => 2,
        }
    }

    /// Layer sizes implied by the dataset and model sections.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let d = self.input_dim();
        let input = if self.model.anchored { 2 * d } else { d };
        let mut sizes = vec![input];
        sizes.extend(&self.model.hidden);
        sizes.push(self.num_classes());
        sizes
    }

    pub fn build_model(&self) -> Result<MlpModel, CliError> {
        let split = self.seeds();
        MlpModel::new(&self.layer_sizes(), Activation::Relu, split.init).map_err(CliError::from)
    }

    pub fn sgd_config(&self) -> SgdConfig {
        let split = self.seeds();
        SgdConfig {
            lr: self.sgd.lr,
            momentum: self.sgd.momentum,
            weight_decay: self.sgd.weight_decay,
            schedule: self.sgd.schedule.clone(),
            epochs: self.sgd.epochs,
            batch_size: self.sgd.batch_size,
            shuffle_seed: split.shuffle,
        }
    }

    fn consistency_spec_from(&self, c: &ConsistencyConfig) -> ConsistencySpec {
        let split = self.seeds();
        ConsistencySpec {
            transforms: c.transforms.iter().map(TransformConfig::to_transform).collect(),
            apply_every: c.apply_every,
            rng_seed: seeding::derive(split.shuffle, &[0x7f]),
        }
    }

    pub fn consistency_spec(&self) -> ConsistencySpec {
        match &self.consistency {
            Some(c) => self.consistency_spec_from(c),
            None => ConsistencySpec::none(),
        }
    }

    pub fn temperature_mode(&self) -> TemperatureMode {
        match self.inference.temperature_mode.as_str() {
            "direct" => TemperatureMode::Direct {
                epsilon: self.inference.epsilon,
            },
            _ => TemperatureMode::Softened,
        }
    }

    /// Generate the OOD feature set in normalized coordinates, given the raw
    /// ID test features and the fitted normalizer. Ring samples are drawn
    /// directly in normalized space; rotations and corruptions act on the raw
    /// ID test features and then receive the identical normalization.
    pub fn generate_ood(
        &self,
        raw_test_features: &Tensor2D,
        normalizer: &datasets::Normalizer,
    ) -> Result<Tensor2D, CliError> {
        let ood = self.ood.as_ref().ok_or_else(|| {
            CliError::Config("this command requires an [ood] section".into())
        })?;
        let split = self.seeds();
        let ood_seed = seeding::derive(split.eval, &[0x0d]);
        match ood.kind.as_str() {
            "ring" => {
                let radius = ood.radius.unwrap();
                let width = ood.width.unwrap_or(0.0);
                datasets::gen_ood_ring(ood.n, radius, width, self.input_dim(), ood_seed)
                    .map_err(CliError::from)
            }
            "rotated_moons" => {
                let theta = ood.rotation_deg.unwrap().to_radians();
                let center = datasets::centroid(raw_test_features);
                let rotated =
                    datasets::rotate_2d(raw_test_features, theta, (center[0], center[1]))?;
                let rows: Vec<usize> = (0..rotated.rows().min(ood.n)).collect();
                Ok(normalizer.apply(&rotated.select_rows(&rows))?)
            }
            "corruption" => {
                let kind = CorruptionKind::parse(ood.corruption.as_deref().unwrap())?;
                let level = ood.level.unwrap_or(3);
                let corrupted = datasets::corrupt(raw_test_features, kind, level, ood_seed)?;
                let rows: Vec<usize> = (0..corrupted.rows().min(ood.n)).collect();
                Ok(normalizer.apply(&corrupted.select_rows(&rows))?)
            }
            _ => unreachable!("validated"),
        }
    }
}

impl TransformConfig {
    pub fn to_transform(&self) -> AnchorTransform {
        match *self {
            TransformConfig::GaussianNoise { sigma } => AnchorTransform::GaussianNoise { sigma },
            TransformConfig::RandomScale { lo, hi } => AnchorTransform::RandomScale { lo, hi },
            TransformConfig::RandomMask { p } => AnchorTransform::RandomMask { p },
            TransformConfig::Identity => AnchorTransform::Identity,
        }
    }
}
