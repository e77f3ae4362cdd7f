//! Experiment parameters: defaults, an optional TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use opfbasis::{window_size, TableFormat};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SIGMA: f64 = 0.03;
pub const DEFAULT_SAMPLES: usize = 5000;
pub const DEFAULT_EPSILON: f64 = 0.02;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_N_TEST: usize = 5000;
pub const DEFAULT_K: [usize; 6] = [1, 5, 10, 20, 50, 100];
pub const DEFAULT_OUT: &str = "out";

/// Flags shared by the experiment subcommands. Every flag overrides the
/// matching key of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// TOML file with any of the keys below (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MATPOWER case file.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Load standard deviation as a fraction of each bus's nominal load.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Training samples in total (M plus the discovery window).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Unobserved probability mass to certify.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Allowed failure probability of the coverage certificate.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Ensemble sizes to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Fresh scenarios for out-of-sample evaluation.
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 lets the runtime decide).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "OPFBASIS_OUT")]
    pub out: Option<PathBuf>,
    /// Table format: csv, json or text.
    #[arg(long)]
    pub format: Option<String>,
}

/// The same keys as [`ExperimentArgs`], read from a file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    case: Option<PathBuf>,
    sigma: Option<f64>,
    samples: Option<usize>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    k: Option<Vec<usize>>,
    n_test: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: Option<String>,
}

impl ConfigFile {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut file: ConfigFile =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // case paths in a config file are relative to the file
        if let (Some(case), Some(dir)) = (&file.case, path.parent()) {
            if case.is_relative() {
                file.case = Some(dir.join(case));
            }
        }
        Ok(file)
    }
}

/// Fully resolved parameters of one run. Serialized into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub case_path: PathBuf,
    pub sigma_scaling: f64,
    pub samples: usize,
    pub m: usize,
    pub window: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub k_list: Vec<usize>,
    pub n_test: usize,
    pub seed: u64,
    pub format: String,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Whether sigma and seed were given explicitly rather than defaulted.
    #[serde(skip)]
    pub sigma_given: bool,
    #[serde(skip)]
    pub seed_given: bool,
}

impl ExperimentConfig {
    pub fn resolve(args: &ExperimentArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => ConfigFile::read(path)?,
            None => ConfigFile::default(),
        };
        let Some(case_path) = args.case.clone().or(file.case) else {
            bail!("no case file given (use --case or `case` in the config file)");
        };
        let sigma = args.sigma.or(file.sigma);
        let seed = args.seed.or(file.seed);
        let epsilon = args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);
        let delta = args.delta.or(file.delta).unwrap_or(DEFAULT_DELTA);
        let samples = args.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES);
        let mut k_list = args
            .k
            .clone()
            .or(file.k)
            .unwrap_or_else(|| DEFAULT_K.to_vec());
        k_list.sort_unstable();
        k_list.dedup();
        let format = args
            .format
            .clone()
            .or(file.format)
            .unwrap_or_else(|| "csv".into());

        let window = window_size(epsilon, delta)?;
        if samples <= window {
            bail!("{samples} samples leave no training samples: the discovery window alone needs {window}");
        }
        if k_list.is_empty() || k_list[0] == 0 {
            bail!("ensemble sizes must be at least 1");
        }
        let n_test = args.n_test.or(file.n_test).unwrap_or(DEFAULT_N_TEST);
        if n_test == 0 {
            bail!("--n-test must be at least 1");
        }
        if let Some(s) = sigma {
            if !(s.is_finite() && s > 0.0) {
                bail!("sigma must be positive, got {s}");
            }
        }
        format.parse::<TableFormat>()?;
        Ok(ExperimentConfig {
            case_path,
            sigma_scaling: sigma.unwrap_or(DEFAULT_SIGMA),
            samples,
            m: samples - window,
            window,
            epsilon,
            delta,
            k_list,
            n_test,
            seed: seed.unwrap_or(0),
            format,
            threads: args.threads.or(file.threads).unwrap_or(0),
            output_dir: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| DEFAULT_OUT.into()),
            sigma_given: sigma.is_some(),
            seed_given: seed.is_some(),
        })
    }

    pub fn table_format(&self) -> TableFormat {
        self.format.parse().expect("validated in resolve")
    }

    pub fn k_max(&self) -> usize {
        *self.k_list.last().expect("validated in resolve")
    }

    /// `{case_id}_{sigma}_{seed}`, the prefix of every artifact of this run.
    pub fn stem(&self, case_id: &str) -> String {
        format!("{case_id}_{}_{}", self.sigma_scaling, self.seed)
    }

    pub fn artifact(&self, case_id: &str, suffix: &str) -> PathBuf {
        self.output_dir
            .join(format!("{}_{suffix}", self.stem(case_id)))
    }
}
