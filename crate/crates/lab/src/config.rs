//! Experiment configuration documents.

use std::fs;
use std::path::Path;

use coordgate::datagen::{BoundaryVariant, PsfParams};
use coordgate::metrics::SsimConfig;
use coordgate::nn::ModelSpec;
use coordgate::optim::TrainConfig;
use coordgate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Boundary,
    Conv1d,
    Ablation,
    Deblur,
    Report,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Boundary => "boundary",
            Self::Conv1d => "conv1d",
            Self::Ablation => "ablation",
            Self::Deblur => "deblur",
            Self::Report => "report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Signals for the 1D experiments.
    pub samples: usize,
    /// Signal length of the 1D experiments.
    pub n: usize,
    /// Side of the square deblur images.
    pub size: usize,
    /// Number of deblur images (split by the train config fractions).
    pub images: usize,
    pub psf_k: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            n: 30,
            size: 64,
            images: 400,
            psf_k: 11,
            sigma_min: 0.5,
            sigma_max: 2.5,
        }
    }
}

impl DatasetConfig {
    pub fn psf(&self) -> PsfParams {
        PsfParams {
            h: self.size,
            w: self.size,
            k: self.psf_k,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRun {
    pub name: String,
    pub size: usize,
    pub variant: BoundaryVariant,
}

fn default_boundary() -> Vec<BoundaryRun> {
    vec![
        BoundaryRun {
            name: "plain".into(),
            size: 12,
            variant: BoundaryVariant::Plain { layers: 5 },
        },
        BoundaryRun {
            name: "unet2".into(),
            size: 12,
            variant: BoundaryVariant::UNet {
                steps: 2,
                convs: 2,
                middle: 2,
            },
        },
        BoundaryRun {
            name: "unet4".into(),
            size: 16,
            variant: BoundaryVariant::UNet {
                steps: 4,
                convs: 1,
                middle: 2,
            },
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Empty means the default roster of `kind`.
    pub models: Vec<ModelSpec>,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub seed: u64,
    /// Ablation seeds.
    pub seeds: Vec<u64>,
    pub boundary: Vec<BoundaryRun>,
    pub ssim: SsimConfig,
    /// Timed forward passes per model.
    pub timing_repeats: usize,
    /// Samples per timed forward pass.
    pub timing_batch: usize,
    /// Example reconstructions written per deblur model.
    pub triptychs: usize,
    /// Report: run directories expected under the output directory.
    pub runs: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Conv1d,
            models: Vec::new(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
            seeds: vec![0, 1, 2],
            boundary: default_boundary(),
            ssim: SsimConfig::default(),
            timing_repeats: 100,
            timing_batch: 16,
            triptychs: 3,
            runs: Vec::new(),
        }
    }
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn desk(kind: ExperimentKind) -> Self {
        let mut c = Self {
            kind,
            ..Default::default()
        };
        match kind {
            ExperimentKind::Conv1d | ExperimentKind::Ablation => {
                c.train.epochs = 200;
                c.train.batch_size = 32;
                c.train.lr = 3e-3;
                c.train.patience = 20;
            }
            ExperimentKind::Deblur => {
                c.train.epochs = 40;
                c.train.batch_size = 4;
                c.train.lr = 1e-3;
                c.train.patience = 10;
                c.train.train_fraction = 0.75;
                c.train.val_fraction = 0.25;
                c.timing_repeats = 10;
                c.timing_batch = 4;
            }
            _ => {}
        }
        c
    }

    /// Parses a config document. Fields it omits take the desk-scale
    /// defaults of its `kind`.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg_err = |e: serde_json::Error| Error::Config(e.to_string());
        let doc: Value = serde_json::from_str(text).map_err(cfg_err)?;
        let kind: ExperimentKind = match doc.get("kind") {
            Some(k) => serde_json::from_value(k.clone()).map_err(cfg_err)?,
            None => return Err(Error::Config("config needs a `kind`".into())),
        };
        let mut base = serde_json::to_value(Self::desk(kind)).map_err(cfg_err)?;
        merge(&mut base, doc);
        let cfg: Self = serde_json::from_value(base).map_err(cfg_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Full-scale epochs, sample counts and patience.
    pub fn full_scale(mut self) -> Self {
        self.train.epochs = 600;
        self.train.patience = 20;
        match self.kind {
            ExperimentKind::Conv1d | ExperimentKind::Ablation => self.dataset.samples = 10_000,
            ExperimentKind::Deblur => self.dataset.images = 20_000,
            _ => {}
        }
        self
    }

    /// Roster with defaults filled in and extents matching the dataset.
    pub fn roster(&self) -> Vec<ModelSpec> {
        if !self.models.is_empty() {
            return self.models.clone();
        }
        let n = [self.dataset.n];
        let s = [self.dataset.size, self.dataset.size];
        match self.kind {
            ExperimentKind::Conv1d => vec![
                ModelSpec::cnn(1, 7, 1, &n),
                ModelSpec::cnn(3, 7, 4, &n),
                ModelSpec::cnn(4, 7, 4, &n),
                ModelSpec::cnn(4, 7, 20, &n),
                ModelSpec::cnn(8, 7, 4, &n),
                ModelSpec::ccnn(4, 7, 4, &n),
                ModelSpec::cg(1, 7, 3, 3, &n),
            ],
            ExperimentKind::Ablation => vec![ModelSpec::cg(1, 7, 3, 3, &n)],
            ExperimentKind::Deblur => {
                let res = |m: ModelSpec| ModelSpec { residual: true, ..m };
                vec![
                    res(ModelSpec::unet(2, &s)),
                    res(ModelSpec::unet(3, &s)),
                    res(ModelSpec::unet(4, &s)),
                    res(ModelSpec::cg_unet(2, &s)),
                    res(ModelSpec::cg_unet(4, &s)),
                    res(ModelSpec::coordconv_unet(4, &s)),
                ]
            }
            ExperimentKind::Boundary | ExperimentKind::Report => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_training = matches!(
            self.kind,
            ExperimentKind::Conv1d | ExperimentKind::Ablation | ExperimentKind::Deblur
        );
        if needs_training {
            self.train.validate()?;
            for m in self.roster() {
                m.validate()?;
            }
        }
        if self.kind == ExperimentKind::Ablation && self.seeds.is_empty() {
            return Err(Error::Config("ablation needs at least one seed".into()));
        }
        if self.kind == ExperimentKind::Deblur {
            let field = self.dataset.psf();
            if field.k.is_multiple_of(2) || !(field.sigma_min > 0.0) || field.sigma_max < field.sigma_min {
                return Err(Error::Config(format!("invalid PSF parameters {field:?}")));
            }
        }
        if self.timing_repeats == 0 || self.timing_batch == 0 {
            return Err(Error::Config("timing needs at least one repeat and sample".into()));
        }
        Ok(())
    }
}
