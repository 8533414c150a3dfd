//! Line-oriented `key = value` configuration files for models, training,
//! and synthetic data generation. Unknown keys are rejected.

use crate::featuremap::{tile_dims, FilterSpec, Resolution};
use crate::features::synth::SyntheticSpec;
use crate::{Error, Result};
use std::path::Path;

/// Model and training configuration.
///
/// Key reference (one `key = value` per line, `#` starts a comment):
///
/// ```text
/// feature_dim    input feature dimension D_c
/// window         context width w in frames
/// kernel_width   temporal filter kernel width
/// kernel_stride  temporal filter stride
/// res_time       time-axis tile count
/// res_freq       frequency-axis tile count
/// embed_dim      graph embedding dimension
/// hidden_width   hidden layer width of every MLP
/// alphabet       path to the label alphabet file
/// beta           KL weight
/// kl_ramp_epochs linear KL warm-up epochs (0 = none)
/// learning_rate  SGD learning rate
/// momentum       SGD momentum
/// grad_clip      global gradient-norm clip (0 = off)
/// epochs         training epochs
/// batch_size     utterances per parameter update
/// seed           master seed
/// use_graph      true/false; false trains the r = 0 baseline
/// checkpoint_every  capture a checkpoint every N epochs (0 = final only)
/// activation     hidden nonlinearity; only "tanh" is implemented
/// weight_init    initialization scheme; only "scaled_uniform" is implemented
/// ```
///
/// `activation` and `weight_init` exist so configuration files state these
/// choices explicitly; other values are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub window: usize,
    pub kernel_width: usize,
    pub kernel_stride: usize,
    pub res_time: usize,
    pub res_freq: usize,
    pub embed_dim: usize,
    pub hidden_width: usize,
    pub alphabet_path: String,
    pub beta: f64,
    pub kl_ramp_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub grad_clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub use_graph: bool,
    pub checkpoint_every: usize,
    pub activation: String,
    pub weight_init: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: 16,
            window: 20,
            kernel_width: 5,
            kernel_stride: 2,
            res_time: 2,
            res_freq: 4,
            embed_dim: 32,
            hidden_width: 128,
            alphabet_path: String::new(),
            beta: 1.0,
            kl_ramp_epochs: 0,
            learning_rate: 0.05,
            momentum: 0.9,
            grad_clip: 5.0,
            epochs: 30,
            batch_size: 1,
            seed: 1,
            use_graph: true,
            checkpoint_every: 0,
            activation: "tanh".into(),
            weight_init: "scaled_uniform".into(),
        }
    }
}

fn config_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(n, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((n + 1, line))
        }
    })
}

fn split_kv(line_no: usize, line: &str) -> Result<(&str, &str)> {
    line.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| {
            Error::Config(format!(
                "line {line_no}: expected 'key = value', got '{line}'"
            ))
        })
}

macro_rules! parse_into {
    ($field:expr, $key:expr, $value:expr) => {
        $field = $value
            .parse()
            .map_err(|_| Error::Config(format!("bad value '{}' for key '{}'", $value, $key)))?
    };
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (n, line) in config_lines(text) {
            let (key, value) = split_kv(n, line)?;
            match key {
                "feature_dim" => parse_into!(cfg.feature_dim, key, value),
                "window" => parse_into!(cfg.window, key, value),
                "kernel_width" => parse_into!(cfg.kernel_width, key, value),
                "kernel_stride" => parse_into!(cfg.kernel_stride, key, value),
                "res_time" => parse_into!(cfg.res_time, key, value),
                "res_freq" => parse_into!(cfg.res_freq, key, value),
                "embed_dim" => parse_into!(cfg.embed_dim, key, value),
                "hidden_width" => parse_into!(cfg.hidden_width, key, value),
                "alphabet" => cfg.alphabet_path = value.to_string(),
                "beta" => parse_into!(cfg.beta, key, value),
                "kl_ramp_epochs" => parse_into!(cfg.kl_ramp_epochs, key, value),
                "learning_rate" => parse_into!(cfg.learning_rate, key, value),
                "momentum" => parse_into!(cfg.momentum, key, value),
                "grad_clip" => parse_into!(cfg.grad_clip, key, value),
                "epochs" => parse_into!(cfg.epochs, key, value),
                "batch_size" => parse_into!(cfg.batch_size, key, value),
                "seed" => parse_into!(cfg.seed, key, value),
                "use_graph" => parse_into!(cfg.use_graph, key, value),
                "checkpoint_every" => parse_into!(cfg.checkpoint_every, key, value),
                "activation" => cfg.activation = value.to_string(),
                "weight_init" => cfg.weight_init = value.to_string(),
                other => {
                    return Err(Error::Config(format!(
                        "unknown configuration key '{other}' (line {n})"
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ModelConfig::parse(&text)
    }

    /// Canonical serialization; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        format!(
            "feature_dim = {}\nwindow = {}\nkernel_width = {}\nkernel_stride = {}\n\
             res_time = {}\nres_freq = {}\nembed_dim = {}\nhidden_width = {}\n\
             alphabet = {}\nbeta = {}\nkl_ramp_epochs = {}\nlearning_rate = {}\n\
             momentum = {}\ngrad_clip = {}\nepochs = {}\nbatch_size = {}\nseed = {}\n\
             use_graph = {}\ncheckpoint_every = {}\nactivation = {}\nweight_init = {}\n",
            self.feature_dim,
            self.window,
            self.kernel_width,
            self.kernel_stride,
            self.res_time,
            self.res_freq,
            self.embed_dim,
            self.hidden_width,
            self.alphabet_path,
            self.beta,
            self.kl_ramp_epochs,
            self.learning_rate,
            self.momentum,
            self.grad_clip,
            self.epochs,
            self.batch_size,
            self.seed,
            self.use_graph,
            self.checkpoint_every,
            self.activation,
            self.weight_init,
        )
    }

    pub fn filter(&self) -> Result<FilterSpec> {
        FilterSpec::new(self.kernel_width, self.kernel_stride)
    }

    /// Filtered map width under this configuration.
    pub fn filtered_width(&self) -> Result<usize> {
        self.filter()?.output_width(self.window)
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.res_time, self.res_freq)
    }

    pub fn node_count(&self) -> usize {
        self.resolution().node_count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.feature_dim == 0 {
            return Err(Error::Config("window and feature_dim must be >= 1".into()));
        }
        if self.embed_dim == 0 || self.hidden_width == 0 {
            return Err(Error::Config(
                "embed_dim and hidden_width must be >= 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::Config("beta must be >= 0".into()));
        }
        if self.activation != "tanh" {
            return Err(Error::Config(format!(
                "unsupported activation '{}' (only tanh is implemented)",
                self.activation
            )));
        }
        if self.weight_init != "scaled_uniform" {
            return Err(Error::Config(format!(
                "unsupported weight_init '{}' (only scaled_uniform is implemented)",
                self.weight_init
            )));
        }
        let w_check = self.filtered_width()?;
        if self.use_graph {
            tile_dims(self.feature_dim, w_check, self.resolution())?;
        }
        Ok(())
    }

    /// Effective KL weight for an epoch under the linear warm-up.
    pub fn beta_at_epoch(&self, epoch: usize) -> f64 {
        if self.kl_ramp_epochs == 0 {
            self.beta
        } else {
            self.beta * ((epoch + 1) as f64 / self.kl_ramp_epochs as f64).min(1.0)
        }
    }
}

/// Synthetic data generation configuration.
///
/// Keys: `classes, feature_dim, template_len, noise_level, boost, pairs,
/// duration_min, duration_max, len_min, len_max, train_count, dev_count,
/// test_count, seed`. `pairs` is a comma-separated list of `a-b` ordered
/// class pairs (or empty).
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub classes: usize,
    pub feature_dim: usize,
    pub template_len: usize,
    pub noise_level: f64,
    pub boost: f64,
    pub pairs: Vec<(usize, usize)>,
    pub duration_min: usize,
    pub duration_max: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub train_count: usize,
    pub dev_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            classes: 8,
            feature_dim: 16,
            template_len: 6,
            noise_level: 0.25,
            boost: 3.0,
            pairs: vec![(0, 2), (1, 5), (4, 6)],
            duration_min: 4,
            duration_max: 8,
            len_min: 3,
            len_max: 6,
            train_count: 24,
            dev_count: 8,
            test_count: 8,
            seed: 7,
        }
    }
}

impl DataSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = DataSpec::default();
        for (n, line) in config_lines(text) {
            let (key, value) = split_kv(n, line)?;
            match key {
                "classes" => parse_into!(spec.classes, key, value),
                "feature_dim" => parse_into!(spec.feature_dim, key, value),
                "template_len" => parse_into!(spec.template_len, key, value),
                "noise_level" => parse_into!(spec.noise_level, key, value),
                "boost" => parse_into!(spec.boost, key, value),
                "pairs" => spec.pairs = parse_pairs(value)?,
                "duration_min" => parse_into!(spec.duration_min, key, value),
                "duration_max" => parse_into!(spec.duration_max, key, value),
                "len_min" => parse_into!(spec.len_min, key, value),
                "len_max" => parse_into!(spec.len_max, key, value),
                "train_count" => parse_into!(spec.train_count, key, value),
                "dev_count" => parse_into!(spec.dev_count, key, value),
                "test_count" => parse_into!(spec.test_count, key, value),
                "seed" => parse_into!(spec.seed, key, value),
                other => {
                    return Err(Error::Config(format!(
                        "unknown data spec key '{other}' (line {n})"
                    )))
                }
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        DataSpec::parse(&text)
    }

    pub fn to_synthetic_spec(&self) -> Result<SyntheticSpec> {
        SyntheticSpec::new(
            self.classes,
            self.feature_dim,
            self.template_len,
            self.pairs.clone(),
            self.boost,
            self.noise_level,
            self.seed,
        )?
        .with_durations(self.duration_min, self.duration_max)
    }
}

fn parse_pairs(value: &str) -> Result<Vec<(usize, usize)>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|p| {
            let p = p.trim();
            let (a, b) = p
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("bad pair '{p}', expected 'a-b'")))?;
            let a = a
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad pair class '{a}'")))?;
            let b = b
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad pair class '{b}'")))?;
            Ok((a, b))
        })
        .collect()
}
