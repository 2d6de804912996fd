use crate::error::{Error, Result};

use super::{BatchSampler, LrSchedule, OptimizerConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// `key = value` lines; blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> Result<Vec<KeyValue>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push(KeyValue { key: key.to_string(), value: value.trim().to_string(), line: i + 1 });
    }
    Ok(out)
}

/// Every numeric knob of the training recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub schedule: LrSchedule,
    pub sampler: BatchSampler,
    pub train_fraction: f64,
    /// Images per forward pass when scoring the monitor set.
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            schedule: LrSchedule::default(),
            sampler: BatchSampler::default(),
            train_fraction: 0.95,
            eval_batch: 500,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Usage(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "base_lr",
        "momentum",
        "weight_decay",
        "warm_epochs",
        "decay_factor",
        "epochs",
        "batch_size",
        "flip_prob",
        "seed",
        "train_fraction",
        "eval_batch",
    ];

    /// Applies one setting; `Ok(false)` when the key is not a training key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "base_lr" => self.schedule.base_lr = parse(key, value)?,
            "momentum" => self.optimizer.momentum = parse(key, value)?,
            "weight_decay" => self.optimizer.weight_decay = parse(key, value)?,
            "warm_epochs" => self.schedule.warm_epochs = parse(key, value)?,
            "decay_factor" => self.schedule.decay_factor = parse(key, value)?,
            "epochs" => self.schedule.total_epochs = parse(key, value)?,
            "batch_size" => self.sampler.batch_size = parse(key, value)?,
            "flip_prob" => self.sampler.flip_prob = parse(key, value)?,
            "seed" => self.sampler.seed = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "eval_batch" => self.eval_batch = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Builds a config from `key = value` text, rejecting unknown keys.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for kv in parse_key_values(text)? {
            if !config.set(&kv.key, &kv.value)? {
                return Err(Error::Usage(format!("config line {}: unknown key {:?}", kv.line, kv.key)));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.schedule.validate()?;
        self.sampler.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Invalid(format!("train fraction {} outside (0, 1]", self.train_fraction)));
        }
        if self.eval_batch == 0 {
            return Err(Error::Invalid("eval_batch must be positive".into()));
        }
        Ok(())
    }
}
