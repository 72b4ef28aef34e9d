use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::fail::Failure;

#[derive(Parser, Debug)]
#[command(name = "periscope", version, about = "Periocular verification experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Global {
    /// Root of the artifact tree; relative paths resolve against it.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 means one per logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Validate inputs and report what would be written, without writing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// JSON run config. Flags given on the command line take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Align, crop and resize images around the sclera.
    Normalize(NormalizeArgs),
    /// Split a corpus under a protocol and enumerate its pairs.
    Partition(PartitionArgs),
    /// Extract hand-crafted or tapped-layer features.
    Extract(ExtractArgs),
    /// Score the genuine and impostor pairs of partitions.
    Score(ScoreArgs),
    /// Print the EER of score files as a percentage.
    Eval(EvalArgs),
    /// Evaluate every layer of a graph on partitions.
    Sweep(SweepArgs),
    /// Apply best layers chosen on some partitions to others.
    Transfer(TransferArgs),
    /// Redraw a graph's weights from seeded initializers.
    Randomize(RandomizeArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 124)]
    pub identities: usize,
    #[arg(long, default_value_t = 5)]
    pub per_id: usize,
    /// Perturbation strength, 0 for identical samples per identity.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Full,
    ResizeOnly,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    Global,
    PerSession,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct NormalizeArgs {
    /// Input manifest [default: corpus/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "normalized")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 224)]
    pub side: u32,
    #[arg(long, default_value_t = 30.0)]
    pub target_radius: f64,
    #[arg(long, default_value_t = 7.6)]
    pub crop_factor: f64,
    /// Scale each distance group by its mean annotated radius instead of
    /// each image by its own.
    #[arg(long, value_enum)]
    pub radius_scope: Option<ScopeArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolArg {
    Complete,
    Cw,
    Ow,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PartitionArgs {
    /// Input manifest [default: normalized/manifest.csv, else corpus/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Complete)]
    pub protocol: ProtocolArg,
    /// CW: samples per identity held out for test.
    #[arg(long, default_value_t = 2)]
    pub test_per_identity: usize,
    /// OW: identities in the train half [default: half, rounded down to even].
    #[arg(long)]
    pub train_identities: Option<usize>,
    /// OW: allow a subject's two eyes to land in different halves.
    #[arg(long)]
    pub split_subjects: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescriptorArg {
    Lbph,
    Hog,
    Sift,
    Deep,
}

impl DescriptorArg {
    pub fn name(self) -> &'static str {
        match self {
            DescriptorArg::Lbph => "lbph",
            DescriptorArg::Hog => "hog",
            DescriptorArg::Sift => "sift",
            DescriptorArg::Deep => "deep",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingArg {
    Popcount,
    Raw,
}

/// Settings of the hand-crafted descriptors.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct HandArgs {
    #[arg(long, default_value_t = 8)]
    pub grid_rows: usize,
    #[arg(long, default_value_t = 8)]
    pub grid_cols: usize,
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = MappingArg::Popcount)]
    pub lbp_mapping: MappingArg,
    /// SIFT: keep only the strongest keypoints.
    #[arg(long)]
    pub max_keypoints: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExtractArgs {
    #[arg(long, value_enum, default_value_t = DescriptorArg::Lbph)]
    pub descriptor: DescriptorArg,
    /// Input manifest [default: normalized/manifest.csv, else corpus/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Restrict extraction to the samples of one partition.
    #[arg(long)]
    pub partition: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hand: HandArgs,
    /// Deep: ONNX graph with tap outputs.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Deep: layer index (1-based) or name.
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Output store [default: features/<descriptor>.feat or .kpts].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// Descriptor whose store under features/ is scored; hand-crafted
    /// descriptors are extracted on the fly when the store is absent.
    #[arg(long, value_enum, default_value_t = DescriptorArg::Lbph)]
    pub descriptor: DescriptorArg,
    /// Score this store instead (`.kpts` for keypoints).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Partitions to score [default: all under pairs/].
    #[arg(long, value_delimiter = ',')]
    pub partition: Vec<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hand: HandArgs,
    /// Side of the sample tiles pairs are scored in.
    #[arg(long, default_value_t = 4096)]
    pub tile: usize,
    /// SIFT: lower bound of the match-ratio denominator.
    #[arg(long, default_value_t = 1.0)]
    pub sift_epsilon: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Interpolated,
    Midpoint,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Score files [default: all under scores/].
    #[arg(value_name = "SCORES")]
    pub scores: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Interpolated)]
    pub method: MethodArg,
    /// Also print the FRR at these FAR targets.
    #[arg(long, value_delimiter = ',')]
    pub far: Vec<f64>,
    /// Write each FAR/FRR curve to curves/<name>.csv.
    #[arg(long)]
    pub curve: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Partitions to sweep [default: all under pairs/].
    #[arg(long, value_delimiter = ',')]
    pub partition: Vec<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub first: usize,
    #[arg(long)]
    pub last: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Re-evaluate layers skipped by the stride around the best one.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 4)]
    pub layers_per_pass: usize,
    /// Label for the weights, e.g. `pretrained` or `random`.
    #[arg(long, default_value = "pretrained")]
    pub strategy: String,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TransferArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Partitions whose swept best layer is applied.
    #[arg(long, value_delimiter = ',')]
    pub selectors: Vec<String>,
    /// Partitions evaluated [default: all under pairs/].
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "pretrained")]
    pub strategy: String,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RandomizeArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything a run depends on. Written next to the artifacts and accepted
/// back through `--config`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(flatten)]
    pub global: Global,
    pub args: Value,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Normalize(_) => "normalize",
            Command::Partition(_) => "partition",
            Command::Extract(_) => "extract",
            Command::Score(_) => "score",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Transfer(_) => "transfer",
            Command::Randomize(_) => "randomize",
        }
    }

    fn args_value(&self) -> Value {
        let v = serde_json::to_value(self).expect("arguments serialize");
        match v {
            Value::Object(mut m) => m.remove(self.name()).unwrap_or(Value::Null),
            other => other,
        }
    }

    fn overlay(&mut self, file: &Map<String, Value>, given: &dyn Fn(&str) -> bool) -> anyhow::Result<()> {
        match self {
            Command::Synth(a) => merge(a, file, given),
            Command::Normalize(a) => merge(a, file, given),
            Command::Partition(a) => merge(a, file, given),
            Command::Extract(a) => merge(a, file, given),
            Command::Score(a) => merge(a, file, given),
            Command::Eval(a) => merge(a, file, given),
            Command::Sweep(a) => merge(a, file, given),
            Command::Transfer(a) => merge(a, file, given),
            Command::Randomize(a) => merge(a, file, given),
        }
    }
}

impl Cli {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            command: self.command.name(),
            global: self.global.clone(),
            args: self.command.args_value(),
        }
    }

    /// Parses the command line and folds in `--config`, keeping every value
    /// that was typed on the command line.
    pub fn parse_with_config() -> anyhow::Result<Self> {
        use clap::{CommandFactory, FromArgMatches};
        let matches = Self::command().get_matches();
        let mut cli = Self::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
        let Some(path) = cli.global.config.clone() else {
            return Ok(cli);
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| Failure::usage(format!("{e:#}")))?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        let Value::Object(mut file) = file else {
            return Err(Failure::usage(format!("config {}: expected a JSON object", path.display())).into());
        };
        let (_, sub) = matches.subcommand().expect("subcommand is required");
        if let Some(command) = file.remove("command") {
            if command.as_str() != Some(cli.command.name()) {
                return Err(Failure::usage(format!(
                    "config {} is for `{}`, not `{}`",
                    path.display(),
                    command,
                    cli.command.name()
                ))
                .into());
            }
        }
        let args = match file.remove("args") {
            Some(Value::Object(m)) => m,
            None => Map::new(),
            Some(_) => return Err(Failure::usage("config `args` must be an object").into()),
        };
        let config = cli.global.config.take();
        merge(&mut cli.global, &file, &|id| given(&matches, id) || given(sub, id))
            .map_err(|e| Failure::usage(format!("config {}: {e:#}", path.display())))?;
        cli.global.config = config;
        cli.command
            .overlay(&args, &|id| given(sub, id))
            .map_err(|e| Failure::usage(format!("config {}: {e:#}", path.display())))?;
        Ok(cli)
    }
}

fn given(matches: &ArgMatches, id: &str) -> bool {
    matches.try_get_raw(id).ok().flatten().is_some() && matches.value_source(id) == Some(ValueSource::CommandLine)
}

/// Replaces fields of `target` with the file's values, except those the
/// command line set explicitly. Unknown keys are rejected.
fn merge<T: Serialize + DeserializeOwned>(
    target: &mut T,
    file: &Map<String, Value>,
    given: &dyn Fn(&str) -> bool,
) -> anyhow::Result<()> {
    let Value::Object(mut current) = serde_json::to_value(&*target)? else {
        bail!("arguments are not an object");
    };
    for (key, value) in file {
        if !current.contains_key(key) {
            bail!("unknown key `{key}`");
        }
        if !given(key) {
            current.insert(key.clone(), value.clone());
        }
    }
    *target = serde_json::from_value(Value::Object(current))?;
    Ok(())
}
