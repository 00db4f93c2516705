//! Experiment configuration: one TOML document, every section optional,
//! unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use diner::lensless::{Illumination, Parameterization};
use diner::model::{BackboneConfig, BackboneKind, PositionalEncoding};
use diner::{HashInit, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Fit,
    DisorderTest,
    WidthSweep,
    Spectrum,
    Lensless,
    BenchHash,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Fit => "fit",
            Task::DisorderTest => "disorder-test",
            Task::WidthSweep => "width-sweep",
            Task::Spectrum => "spectrum",
            Task::Lensless => "lensless",
            Task::BenchHash => "bench-hash",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional guard: must match the subcommand when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub seed: u64,
    pub precision: Precision,
    pub out_dir: PathBuf,
    pub input: InputConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub disorder: DisorderSection,
    pub sweep: SweepSection,
    pub spectrum: SpectrumSection,
    pub lensless: LenslessSection,
    pub bench: BenchSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: None,
            seed: 0,
            precision: Precision::F64,
            out_dir: PathBuf::from("out"),
            input: InputConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            disorder: DisorderSection::default(),
            sweep: SweepSection::default(),
            spectrum: SpectrumSection::default(),
            lensless: LenslessSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Where the signal comes from; at most one source may be set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// PGM/PPM image, or a raw `.ding` grid of any dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Equal-size frames stacked into a 3D grid.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticInput>,
}

/// Procedural images from the built-in generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticInput {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Defaults to the run seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// When set, only this many channels are independent; the rest are
    /// convex combinations of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Shuffle the elements with a seeded random permutation.
    pub permute: bool,
    /// Number of images (the spectrum task fits each one).
    pub count: usize,
}

impl Default for SyntheticInput {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            channels: 3,
            seed: None,
            rank: None,
            permute: false,
            count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Diner,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneName {
    #[default]
    Mlp,
    Siren,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitName {
    #[default]
    Zeros,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub backbone: BackboneName,
    pub omega0: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Fourier feature frequencies `K` applied to the backbone input.
    pub pe_frequencies: usize,
    pub pe_include_input: bool,
    /// Hash-table width `L`; defaults to the signal's attribute rank.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_width: Option<usize>,
    pub init: InitName,
    pub init_low: f64,
    pub init_high: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Diner,
            backbone: BackboneName::Mlp,
            omega0: 30.0,
            hidden_layers: 2,
            hidden_width: 64,
            pe_frequencies: 0,
            pe_include_input: true,
            table_width: None,
            init: InitName::Zeros,
            init_low: -1e-2,
            init_high: 1e-2,
        }
    }
}

impl ModelConfig {
    pub fn backbone_config(&self) -> BackboneConfig {
        BackboneConfig {
            kind: match self.backbone {
                BackboneName::Mlp => BackboneKind::Mlp,
                BackboneName::Siren => BackboneKind::Siren { omega0: self.omega0 },
            },
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            encoding: PositionalEncoding {
                num_frequencies: self.pe_frequencies,
                include_input: self.pe_include_input,
            },
        }
    }

    pub fn hash_init(&self) -> HashInit {
        match self.init {
            InitName::Zeros => HashInit::Zeros,
            InitName::Uniform => HashInit::Uniform {
                low: self.init_low,
                high: self.init_high,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub lr_net: f64,
    pub lr_hash: f64,
    pub log_every: usize,
    /// Record wall-clock time in the metrics log; off gives byte-stable CSVs.
    pub record_time: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr_net: d.lr_net,
            lr_hash: d.lr_hash,
            log_every: d.log_every,
            record_time: d.record_time,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderSection {
    /// Number of seeded random arrangements besides the original and sorted ones.
    pub permutations: usize,
}

impl Default for DisorderSection {
    fn default() -> Self {
        Self { permutations: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Table widths to fit; empty means `1..=d_out + 2`.
    pub widths: Vec<usize>,
    /// Allowed PSNR drop between consecutive widths below the rank.
    pub noise_db: f64,
    /// Required PSNR gain per width step below the rank.
    pub gain_db: f64,
    /// Allowed PSNR spread over widths at or above the rank.
    pub spread_db: f64,
    /// Relative singular-value tolerance for the attribute rank.
    pub rank_tol: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            widths: Vec::new(),
            noise_db: 0.5,
            gain_db: 3.0,
            spread_db: 1.0,
            rank_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub bands: usize,
    /// Learned-INR mesh size `[rows, cols]`; defaults to the image size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<[usize; 2]>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { bands: 4, resolution: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterizationName {
    #[default]
    RealImag,
    AmpPhase,
}

impl From<ParameterizationName> for Parameterization {
    fn from(p: ParameterizationName) -> Self {
        match p {
            ParameterizationName::RealImag => Parameterization::RealImag,
            ParameterizationName::AmpPhase => Parameterization::AmpPhase,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LenslessSection {
    /// Recorded measurement directory; when absent a synthetic object is
    /// measured and the set is written under the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurements: Option<PathBuf>,
    pub height: usize,
    pub width: usize,
    /// Pixel pitch in meters.
    pub pitch: f64,
    /// Wavelength in meters.
    pub wavelength: f64,
    /// Specimen-to-sensor distances in meters.
    pub distances: Vec<f64>,
    pub illumination: Illumination,
    pub parameterization: ParameterizationName,
    /// Seed of the synthetic object; defaults to the run seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_seed: Option<u64>,
}

impl Default for LenslessSection {
    fn default() -> Self {
        Self {
            measurements: None,
            height: 64,
            width: 64,
            pitch: 2e-6,
            wavelength: 532e-9,
            distances: vec![0.5e-3, 1e-3, 1.5e-3, 2e-3],
            illumination: Illumination::Uniform,
            parameterization: ParameterizationName::RealImag,
            object_seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Image size for the matched training comparison.
    pub height: usize,
    pub width: usize,
    /// Alternating timing rounds; the fastest round of each model counts.
    pub rounds: usize,
    /// Table lengths for the scatter-and-update timing.
    pub lengths: Vec<usize>,
    /// Rows touched per scatter-and-update step.
    pub batch: usize,
    /// Timed steps per length; the fastest counts.
    pub repeats: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            rounds: 3,
            lengths: vec![1_000, 100_000],
            batch: 1024,
            repeats: 50,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub precision: Option<Precision>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub no_timing: bool,
}

impl ExperimentConfig {
    /// Reads `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = &mut self.input.path {
            fix(p);
        }
        self.input.frames.iter_mut().for_each(fix);
        if let Some(p) = &mut self.lensless.measurements {
            fix(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.precision {
            self.precision = p;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(i) = &o.input {
            self.input = InputConfig {
                path: Some(i.clone()),
                ..InputConfig::default()
            };
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if o.no_timing {
            self.train.record_time = false;
        }
    }

    /// Checks values and that referenced inputs exist. Missing inputs are
    /// data errors; everything else is a configuration error.
    pub fn validate(&self, task: Task) -> Result<()> {
        if let Some(t) = self.task {
            if t != task {
                return Err(CliError::Config(format!(
                    "configuration is for task {:?} but {:?} was requested",
                    t.name(),
                    task.name()
                )));
            }
        }
        let sources = usize::from(self.input.path.is_some())
            + usize::from(!self.input.frames.is_empty())
            + usize::from(self.input.synthetic.is_some());
        if sources > 1 {
            return Err(CliError::Config("input: set only one of path, frames, synthetic".into()));
        }
        let t = &self.train;
        if t.log_every == 0 {
            return Err(CliError::Config("train.log_every must be at least 1".into()));
        }
        for (name, lr) in [("lr_net", t.lr_net), ("lr_hash", t.lr_hash)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(CliError::Config(format!("train.{name} must be positive, got {lr}")));
            }
        }
        let m = &self.model;
        if m.table_width == Some(0) {
            return Err(CliError::Config("model.table_width must be at least 1".into()));
        }
        if m.init == InitName::Uniform && (m.init_low.is_nan() || m.init_high.is_nan() || m.init_low >= m.init_high) {
            return Err(CliError::Config("model.init_low must be below model.init_high".into()));
        }
        if m.backbone == BackboneName::Siren && (m.omega0.is_nan() || m.omega0 <= 0.0) {
            return Err(CliError::Config("model.omega0 must be positive".into()));
        }
        if let Some(s) = &self.input.synthetic {
            if s.height == 0 || s.width == 0 || s.channels == 0 || s.count == 0 {
                return Err(CliError::Config("input.synthetic sizes and count must be positive".into()));
            }
            if let Some(r) = s.rank {
                if r == 0 || r > s.channels {
                    return Err(CliError::Config(format!("input.synthetic.rank must be in 1..={}", s.channels)));
                }
            }
        }
        if self.sweep.widths.contains(&0) {
            return Err(CliError::Config("sweep.widths must not contain 0".into()));
        }
        if self.spectrum.bands == 0 {
            return Err(CliError::Config("spectrum.bands must be at least 1".into()));
        }
        let l = &self.lensless;
        if l.distances.is_empty() || !(l.pitch > 0.0 && l.wavelength > 0.0) || l.height == 0 || l.width == 0 {
            return Err(CliError::Config("lensless needs positive sizes, pitch, wavelength and at least one distance".into()));
        }
        let b = &self.bench;
        if b.rounds == 0 || b.repeats == 0 || b.batch == 0 || b.lengths.is_empty() || b.lengths.contains(&0) {
            return Err(CliError::Config("bench rounds, repeats, batch and lengths must be positive".into()));
        }
        let mut paths: Vec<&PathBuf> = self.input.path.iter().chain(&self.input.frames).collect();
        if task == Task::Lensless {
            paths.extend(&self.lensless.measurements);
        }
        for p in paths {
            if !p.exists() {
                return Err(CliError::Data(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            lr_net: self.train.lr_net,
            lr_hash: self.train.lr_hash,
            log_every: self.train.log_every,
            record_time: self.train.record_time,
            ..TrainConfig::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// SHA-256 of the canonical TOML form of the effective configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.precision, Precision::F64);
        assert_eq!(cfg.train.epochs, TrainConfig::default().epochs);
        assert_eq!(cfg.model.hidden_width, 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for doc in ["bogus = 1", "[train]\nepoch = 3", "[model]\nwidth = 2", "[lensless.illumination]\nkind = \"uniform\"\nsigma = 1.0"] {
            assert!(matches!(ExperimentConfig::parse(doc), Err(CliError::Config(_))), "{doc}");
        }
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::parse(
            r#"
            task = "width-sweep"
            seed = 9
            precision = "f32"
            [input.synthetic]
            channels = 6
            rank = 2
            [model]
            backbone = "siren"
            table_width = 2
            init = "uniform"
            [sweep]
            widths = [1, 2, 3]
            [lensless]
            illumination = { kind = "gaussian", sigma = 12.0 }
            parameterization = "amp-phase"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.task, Some(Task::WidthSweep));
        assert_eq!(cfg.precision, Precision::F32);
        assert_eq!(cfg.input.synthetic.as_ref().unwrap().rank, Some(2));
        assert_eq!(cfg.model.backbone_config().kind, BackboneKind::Siren { omega0: 30.0 });
        assert_eq!(cfg.sweep.widths, vec![1, 2, 3]);
        assert_eq!(cfg.lensless.illumination, Illumination::Gaussian { sigma: 12.0 });
        assert!(cfg.validate(Task::WidthSweep).is_ok());
        assert!(matches!(cfg.validate(Task::Fit), Err(CliError::Config(_))));
    }

    #[test]
    fn echo_round_trips_and_hash_tracks_content() {
        let mut cfg = ExperimentConfig::parse("[input.synthetic]\nheight = 8\n").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back.to_toml(), cfg.to_toml());
        let h = cfg.hash();
        assert_eq!(h.len(), 64);
        cfg.seed = 1;
        assert_ne!(cfg.hash(), h);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = ExperimentConfig::parse("seed = 3\n[input.synthetic]\n").unwrap();
        cfg.apply(&Overrides {
            seed: Some(5),
            epochs: Some(7),
            input: Some(PathBuf::from("a.pgm")),
            no_timing: true,
            ..Overrides::default()
        });
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.train.epochs, 7);
        assert!(!cfg.train.record_time);
        assert!(cfg.input.synthetic.is_none());
        assert_eq!(cfg.input.path, Some(PathBuf::from("a.pgm")));
    }

    #[test]
    fn validation_classifies_errors() {
        let cfg = ExperimentConfig::parse("[sweep]\nwidths = [0, 1]").unwrap();
        assert!(matches!(cfg.validate(Task::WidthSweep), Err(CliError::Config(_))));
        let cfg = ExperimentConfig::parse("[input]\npath = \"/definitely/missing.pgm\"").unwrap();
        assert!(matches!(cfg.validate(Task::Fit), Err(CliError::Data(_))));
        let cfg = ExperimentConfig::parse("[train]\nlog_every = 0").unwrap();
        assert!(matches!(cfg.validate(Task::Fit), Err(CliError::Config(_))));
    }
}
