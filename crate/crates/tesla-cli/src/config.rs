//! Run configuration: documented defaults, overridden by an optional
//! JSON config file, overridden in turn by command-line flags.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use tesla::binning::BinMode;
use tesla::data::Feature;
use tesla::model::{AggregatorMode, EmbeddingMode, TeslaConfig, Variant};
use tesla::numerics::AdamHyper;
use tesla::training::TrainConfig;
use tesla::{Error, Result};

/// Keys accepted in a `--config` file. Every key is optional and mirrors
/// the flag of the same name; `lr`, `sensors` and `len` have no flag
/// counterparts on every subcommand but follow the same precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub variant: Option<String>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub heads: Option<usize>,
    pub binning: Option<String>,
    pub embedding: Option<String>,
    pub aggregator: Option<String>,
    pub feature: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub sensors: Option<usize>,
    pub len: Option<usize>,
}

/// Flags shared by the model-bearing subcommands. All optional; unset
/// flags fall back to the config file and then to defaults.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON file with the same keys as these flags.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Seed for model initialization, shuffling, and data synthesis.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model family: tesla, linear, nlinear, dlinear, transformer.
    #[arg(long)]
    pub variant: Option<String>,
    /// Window length (number of past readings).
    #[arg(long)]
    pub n: Option<usize>,
    /// Embedding width.
    #[arg(long)]
    pub d: Option<usize>,
    /// Attention heads.
    #[arg(long)]
    pub heads: Option<usize>,
    /// Bin schedule: log or uniform.
    #[arg(long)]
    pub binning: Option<String>,
    /// Embedding term set: local or local_global.
    #[arg(long)]
    pub embedding: Option<String>,
    /// Output head: linear or ffn.
    #[arg(long)]
    pub aggregator: Option<String>,
    /// Measured quantity: pm10, pm2_5, or pm1.
    #[arg(long)]
    pub feature: Option<String>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

/// Fully resolved configuration, embedded verbatim in every artifact the
/// run produces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub variant: Variant,
    pub n: usize,
    pub d: usize,
    pub heads: usize,
    pub binning: BinMode,
    pub embedding: EmbeddingMode,
    pub aggregator: AggregatorMode,
    pub feature: Feature,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub sensors: usize,
    pub len: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = TeslaConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            seed: 0,
            variant: Variant::Tesla,
            n: model.n,
            d: model.d,
            heads: model.heads,
            binning: model.binning,
            embedding: model.embedding,
            aggregator: model.aggregator,
            feature: Feature::Pm10,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.hyper.lr,
            sensors: 4,
            len: 20_000,
        }
    }
}

fn parse_field<T>(value: Option<&str>, current: T) -> Result<T>
where
    T: FromStr<Err = Error>,
{
    match value {
        Some(text) => text.parse(),
        None => Ok(current),
    }
}

impl RunConfig {
    /// Apply precedence: defaults, then the config file, then flags.
    pub fn resolve(args: &CommonArgs) -> Result<RunConfig> {
        let mut run = RunConfig::default();
        if let Some(path) = &args.config {
            run.apply_file(path)?;
        }
        run.apply_flags(args)?;
        run.model_config().validate()?;
        if run.epochs == 0 || run.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be positive".to_string(),
            ));
        }
        Ok(run)
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        let file: FileConfig = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidConfig(format!("config file {}: {e}", path.display()))
        })?;
        self.seed = file.seed.unwrap_or(self.seed);
        self.variant = parse_field(file.variant.as_deref(), self.variant)?;
        self.n = file.n.unwrap_or(self.n);
        self.d = file.d.unwrap_or(self.d);
        self.heads = file.heads.unwrap_or(self.heads);
        self.binning = parse_field(file.binning.as_deref(), self.binning)?;
        self.embedding = parse_field(file.embedding.as_deref(), self.embedding)?;
        self.aggregator = parse_field(file.aggregator.as_deref(), self.aggregator)?;
        self.feature = parse_field(file.feature.as_deref(), self.feature)?;
        self.epochs = file.epochs.unwrap_or(self.epochs);
        self.batch_size = file.batch_size.unwrap_or(self.batch_size);
        self.lr = file.lr.unwrap_or(self.lr);
        self.sensors = file.sensors.unwrap_or(self.sensors);
        self.len = file.len.unwrap_or(self.len);
        Ok(())
    }

    fn apply_flags(&mut self, args: &CommonArgs) -> Result<()> {
        self.seed = args.seed.unwrap_or(self.seed);
        self.variant = parse_field(args.variant.as_deref(), self.variant)?;
        self.n = args.n.unwrap_or(self.n);
        self.d = args.d.unwrap_or(self.d);
        self.heads = args.heads.unwrap_or(self.heads);
        self.binning = parse_field(args.binning.as_deref(), self.binning)?;
        self.embedding = parse_field(args.embedding.as_deref(), self.embedding)?;
        self.aggregator = parse_field(args.aggregator.as_deref(), self.aggregator)?;
        self.feature = parse_field(args.feature.as_deref(), self.feature)?;
        self.epochs = args.epochs.unwrap_or(self.epochs);
        self.batch_size = args.batch_size.unwrap_or(self.batch_size);
        Ok(())
    }

    pub fn model_config(&self) -> TeslaConfig {
        TeslaConfig {
            n: self.n,
            d: self.d,
            heads: self.heads,
            binning: self.binning,
            embedding: self.embedding,
            aggregator: self.aggregator,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            hyper: AdamHyper { lr: self.lr, ..AdamHyper::default() },
        }
    }

    pub fn provenance(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}
