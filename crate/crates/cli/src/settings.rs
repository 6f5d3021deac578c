//! Layered run settings: command-line flags override `LIQD_*` environment
//! variables, which override the TOML config file, which overrides built-in
//! defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use liqd_core::diff::DiffParams;
use liqd_core::image::GrayParams;
use liqd_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

/// Flags accepted by every subcommand.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML settings file; flags and LIQD_* variables override its values.
    #[arg(long, global = true, env = "LIQD_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Base seed for stages that draw randomness.
    #[arg(long, global = true, env = "LIQD_SEED", value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads for batch stages; 0 means one per CPU.
    #[arg(long, global = true, env = "LIQD_JOBS", value_name = "N")]
    pub jobs: Option<usize>,

    /// Weight of the luma-chroma grayscale term.
    #[arg(long, global = true, env = "LIQD_ALPHA", value_name = "W")]
    pub alpha: Option<f64>,

    /// Weight of the quadratic-mean grayscale term.
    #[arg(long, global = true, env = "LIQD_BETA", value_name = "W")]
    pub beta: Option<f64>,

    /// Per-pixel difference threshold, 1-254.
    #[arg(long, global = true, env = "LIQD_THRESHOLD", value_name = "T")]
    pub threshold: Option<u8>,

    /// Elliptical structuring-element size for mask repair (odd).
    #[arg(long, global = true, env = "LIQD_SE_SIZE", value_name = "N")]
    pub se_size: Option<u32>,

    /// Motion-block edge length in pixels.
    #[arg(long, global = true, env = "LIQD_BLOCK_SIZE", value_name = "N")]
    pub block_size: Option<u32>,

    /// White fraction a block needs to count as motion.
    #[arg(long, global = true, env = "LIQD_BLOCK_FILL_RATIO", value_name = "R")]
    pub block_fill_ratio: Option<f64>,

    /// White-pixel count at or below which a pair counts as static.
    #[arg(long, global = true, env = "LIQD_NOISE_FLOOR", value_name = "N")]
    pub noise_floor: Option<usize>,

    /// Frame step between the two frames of a pair.
    #[arg(long, global = true, env = "LIQD_STRIDE", value_name = "N")]
    pub stride: Option<usize>,

    /// Directory for commands that write files.
    #[arg(long, global = true, env = "LIQD_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Write PNG snapshots of intermediate stages under the output directory.
    #[arg(long, global = true, env = "LIQD_DUMP_INTERMEDIATES")]
    pub dump_intermediates: bool,
}

/// Optional values read from the TOML config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    threshold: Option<u8>,
    se_size: Option<u32>,
    block_size: Option<u32>,
    block_fill_ratio: Option<f64>,
    noise_floor: Option<usize>,
    stride: Option<usize>,
    out: Option<PathBuf>,
    model: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// The scalar settings a run resolved to, echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedValues {
    pub seed: u64,
    pub jobs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub threshold: u8,
    pub se_size: u32,
    pub block_size: u32,
    pub block_fill_ratio: f64,
    pub noise_floor: usize,
    pub stride: usize,
}

/// Fully resolved settings for one invocation.
#[derive(Debug)]
pub struct Settings {
    pub values: ResolvedValues,
    pub pipeline: PipelineConfig,
    pub out: Option<PathBuf>,
    /// Model path from the config file; subcommand flags take precedence.
    pub model: Option<PathBuf>,
    pub dump_intermediates: bool,
}

impl Settings {
    /// Merges flags, environment, and config file into concrete settings.
    pub fn resolve(globals: &GlobalArgs) -> Result<Settings> {
        let file = match &globals.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };

        let values = ResolvedValues {
            seed: globals.seed.or(file.seed).unwrap_or(0),
            jobs: globals.jobs.or(file.jobs).unwrap_or(0),
            alpha: globals.alpha.or(file.alpha).unwrap_or(0.5),
            beta: globals.beta.or(file.beta).unwrap_or(0.5),
            threshold: globals.threshold.or(file.threshold).unwrap_or(50),
            se_size: globals.se_size.or(file.se_size).unwrap_or(5),
            block_size: globals.block_size.or(file.block_size).unwrap_or(8),
            block_fill_ratio: globals
                .block_fill_ratio
                .or(file.block_fill_ratio)
                .unwrap_or(0.1),
            noise_floor: globals.noise_floor.or(file.noise_floor).unwrap_or(64),
            stride: globals.stride.or(file.stride).unwrap_or(1),
        };

        let pipeline = PipelineConfig {
            gray: GrayParams::new(values.alpha, values.beta)?,
            diff: DiffParams::new(values.threshold, values.block_size, values.block_fill_ratio)?,
            se_size: values.se_size,
            noise_floor: values.noise_floor,
            stride: values.stride,
            jobs: values.jobs,
        };
        pipeline.validate()?;

        Ok(Settings {
            values,
            pipeline,
            out: globals.out.clone().or(file.out),
            model: file.model,
            dump_intermediates: globals.dump_intermediates,
        })
    }

    /// The output directory, required by commands that write files.
    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!("this command writes files; pass --out DIR or set LIQD_OUT"))
    }

    /// Model path resolution: subcommand flag (or LIQD_MODEL), then config file.
    pub fn model_path(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.model.clone())
    }
}
