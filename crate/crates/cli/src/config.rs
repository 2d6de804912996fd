use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use visage_core::trainer::{parse_key_values, TrainConfig};
use visage_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arch {
    Deepvisage,
    Mnist2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// `key = value` config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub arch: Option<Arch>,
    /// Feature normalization before the loss
    #[arg(long = "fn", global = true, value_enum)]
    pub fn_on: Option<Toggle>,
    /// Center loss
    #[arg(long = "cl", global = true, value_enum)]
    pub cl_on: Option<Toggle>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Serial execution everywhere
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Comma-separated FAR operating points
    #[arg(long, global = true)]
    pub far_targets: Option<String>,
}

/// Everything a command needs, with documented defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub seed: u64,
    /// `deepvisage` or `mnist2d` (default).
    pub arch: Arch,
    pub fn_on: bool,
    pub cl_on: bool,
    /// mnist2d conv widths, default `32,64,128`.
    pub widths: [usize; 3],
    /// Directory with `train-*` and `t10k-*` IDX files, default `data/mnist`.
    pub data: PathBuf,
    /// Use only the first N training images; 0 uses all.
    pub train_limit: usize,
    /// Default `runs`.
    pub out: PathBuf,
    pub deterministic: bool,
    /// Default `0.01,0.001`.
    pub far_targets: Vec<f64>,
    pub kfolds: usize,
    /// Gradient-check relative tolerance, default 1e-4.
    pub tolerance: f64,
    /// Restrict the gradient check to one operation.
    pub op: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub image_root: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub folds: Option<PathBuf>,
    /// Classifier outputs for deepvisage, default 10.
    pub num_classes: usize,
    /// features2d: dump at most N test samples; 0 dumps all.
    pub limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            seed: 0,
            arch: Arch::Mnist2d,
            fn_on: true,
            cl_on: false,
            widths: [32, 64, 128],
            data: PathBuf::from("data/mnist"),
            train_limit: 0,
            out: PathBuf::from("runs"),
            deterministic: false,
            far_targets: vec![0.01, 0.001],
            kfolds: 10,
            tolerance: 1e-4,
            op: None,
            checkpoint: None,
            manifest: None,
            image_root: None,
            store: None,
            pairs: None,
            folds: None,
            num_classes: 10,
            limit: 0,
        }
    }
}

fn bad_value(key: &str, value: &str) -> Error {
    Error::Usage(format!("invalid value {value:?} for {key}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad_value(key, value))
}

fn parse_toggle(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(bad_value(key, value)),
    }
}

pub fn parse_far_targets(value: &str) -> Result<Vec<f64>> {
    let targets = value
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad_value("far_targets", value)))
        .collect::<Result<Vec<_>>>()?;
    if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Usage(format!("FAR targets must lie in [0, 1]: {value}")));
    }
    Ok(targets)
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.train.set(key, value)? {
            if key == "seed" {
                self.seed = self.train.sampler.seed;
            }
            return Ok(());
        }
        let path = || Some(PathBuf::from(value));
        match key {
            "arch" => self.arch = Arch::from_str(value, true).map_err(|_| bad_value(key, value))?,
            "fn" => self.fn_on = parse_toggle(key, value)?,
            "cl" => self.cl_on = parse_toggle(key, value)?,
            "widths" => {
                let w: Vec<usize> = value.split(',').map(|v| parse_num(key, v.trim())).collect::<Result<_>>()?;
                self.widths = w.try_into().map_err(|_| bad_value(key, value))?;
            }
            "data" => self.data = PathBuf::from(value),
            "train_limit" => self.train_limit = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "deterministic" => self.deterministic = parse_toggle(key, value)?,
            "far_targets" => self.far_targets = parse_far_targets(value)?,
            "kfolds" => self.kfolds = parse_num(key, value)?,
            "tolerance" => self.tolerance = parse_num(key, value)?,
            "op" => self.op = Some(value.to_string()),
            "checkpoint" => self.checkpoint = path(),
            "manifest" => self.manifest = path(),
            "image_root" => self.image_root = path(),
            "store" => self.store = path(),
            "pairs" => self.pairs = path(),
            "folds" => self.folds = path(),
            "num_classes" => self.num_classes = parse_num(key, value)?,
            "limit" => self.limit = parse_num(key, value)?,
            _ => return Err(Error::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn load(file: Option<&Path>) -> Result<Self> {
        let mut config = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for kv in parse_key_values(&text)? {
                config
                    .set(&kv.key, &kv.value)
                    .map_err(|e| Error::Usage(format!("{}:{}: {e}", path.display(), kv.line)))?;
            }
        }
        Ok(config)
    }

    pub fn apply_flags(&mut self, flags: &CommonFlags) -> Result<()> {
        if let Some(seed) = flags.seed {
            self.seed = seed;
            self.train.sampler.seed = seed;
        }
        if let Some(arch) = flags.arch {
            self.arch = arch;
        }
        if let Some(t) = flags.fn_on {
            self.fn_on = t == Toggle::On;
        }
        if let Some(t) = flags.cl_on {
            self.cl_on = t == Toggle::On;
        }
        if let Some(e) = flags.epochs {
            self.train.schedule.total_epochs = e;
        }
        if let Some(b) = flags.batch {
            self.train.sampler.batch_size = b;
        }
        if let Some(out) = &flags.out {
            self.out = out.clone();
        }
        self.deterministic |= flags.deterministic;
        if let Some(list) = &flags.far_targets {
            self.far_targets = parse_far_targets(list)?;
        }
        Ok(())
    }

    /// Worker count for parallel stages.
    pub fn threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            visage_core::verification::worker_count()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "arch = deepvisage\nfn = off\nwidths = 4,8,16\nbase_lr = 0.02\nseed = 3\n").unwrap();
        let mut c = RunConfig::load(Some(&path)).unwrap();
        assert_eq!((c.arch, c.fn_on, c.widths, c.seed), (Arch::Deepvisage, false, [4, 8, 16], 3));
        assert_eq!(c.train.schedule.base_lr, 0.02);
        let flags = CommonFlags { seed: Some(9), fn_on: Some(Toggle::On), epochs: Some(2), ..Default::default() };
        c.apply_flags(&flags).unwrap();
        assert_eq!((c.seed, c.train.sampler.seed, c.fn_on, c.train.schedule.total_epochs), (9, 9, true, 2));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "colour = blue\n").unwrap();
        assert!(matches!(RunConfig::load(Some(&path)), Err(Error::Usage(_))));
        assert!(parse_far_targets("0.1,x").is_err());
        assert!(parse_far_targets("1.5").is_err());
        assert_eq!(parse_far_targets("0.01, 0.001").unwrap(), vec![0.01, 0.001]);
    }
}
