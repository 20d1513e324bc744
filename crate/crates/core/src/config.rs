//! Training configuration and the flat key-value config file format.
//!
//! Format: one `key = value` pair per line, `#` comments, blank lines
//! ignored. Unknown keys are rejected. Lists are comma-separated.

use crate::error::{Error, Result};
use crate::losses::LossVariant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Linear,
    Exponential,
}

impl ScheduleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "linear" => Ok(ScheduleKind::Linear),
            "exponential" => Ok(ScheduleKind::Exponential),
            other => Err(Error::Config(format!(
                "unknown schedule '{other}' (expected constant, linear, exponential)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Exponential => "exponential",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    // Model
    pub m: usize,
    pub k: usize,
    pub d_z: usize,
    pub variant: LossVariant,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub leaky_slope: f64,

    // Loss weights
    pub alpha: f64,
    pub beta_d: f64,
    pub beta_g: f64,
    pub gamma: f64,
    pub tau: f64,
    pub soft_label: f64,
    pub schedule: ScheduleKind,
    pub half_life: u64,

    // Optimization
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub n_d: usize,
    pub n_g: usize,
    pub disc_steps_per_gen: usize,
    pub steps: u64,
    pub seed: u64,

    // Data
    pub n_components: usize,
    pub radius: f64,
    pub std: f64,

    // Evaluation
    pub eval_interval: u64,
    pub eval_samples: usize,
    pub prd_samples: usize,
    pub prd_bins: usize,
    pub snapshot_steps: Vec<u64>,
    pub utilization_window: u64,
    pub coverage_dist_sigma: f64,
    pub coverage_count_threshold: f64,
    pub activity_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            m: 8,
            k: 1,
            d_z: 2,
            variant: LossVariant::Standard,
            gen_hidden: vec![128, 128, 128],
            disc_hidden: vec![128, 128, 128],
            leaky_slope: 0.2,
            alpha: 0.01,
            beta_d: 0.5,
            beta_g: 0.0,
            gamma: 0.0,
            tau: 1.0,
            soft_label: 0.5,
            schedule: ScheduleKind::Exponential,
            half_life: 5000,
            lr_g: 2e-4,
            lr_d: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            n_d: 64,
            n_g: 128,
            disc_steps_per_gen: 1,
            steps: 50_000,
            seed: 1,
            n_components: 8,
            radius: std::f64::consts::SQRT_2,
            std: 0.05,
            eval_interval: 1000,
            eval_samples: 10_000,
            prd_samples: 2000,
            prd_bins: 20,
            snapshot_steps: vec![1000, 5000, 50_000],
            utilization_window: 20,
            coverage_dist_sigma: 3.0,
            coverage_count_threshold: 0.01,
            activity_threshold: 0.01,
        }
    }
}

impl TrainConfig {
    /// Least-squares runs use the lower learning rate and temperature.
    pub fn default_least_squares() -> Self {
        TrainConfig {
            variant: LossVariant::LeastSquares,
            lr_g: 1e-4,
            lr_d: 1e-4,
            tau: 0.1,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.m {
            return Err(Error::Config(format!("k = {} out of range for m = {}", self.k, self.m)));
        }
        if self.n_d == 0 || self.n_g == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        if self.disc_steps_per_gen == 0 {
            return Err(Error::Config("disc_steps_per_gen must be >= 1".into()));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta_d", self.beta_d),
            ("beta_g", self.beta_g),
            ("gamma", self.gamma),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.gen_hidden.is_empty() || self.disc_hidden.is_empty() {
            return Err(Error::Config("hidden layer lists must be non-empty".into()));
        }
        if self.n_components == 0 || self.radius <= 0.0 || self.std <= 0.0 {
            return Err(Error::Config("mixture parameters invalid".into()));
        }
        if !(0.0..=1.0).contains(&self.soft_label) {
            return Err(Error::Config("soft_label must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Set a single field by its config-file key; used by `sweep`.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for key '{key}'")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(|x| num(key, x))
                .collect()
        }
        let v = value.trim();
        match key {
            "m" => self.m = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "d_z" => self.d_z = num(key, v)?,
            "variant" => self.variant = LossVariant::parse(v)?,
            "gen_hidden" => self.gen_hidden = list(key, v)?,
            "disc_hidden" => self.disc_hidden = list(key, v)?,
            "leaky_slope" => self.leaky_slope = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "beta_d" => self.beta_d = num(key, v)?,
            "beta_g" => self.beta_g = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "soft_label" => self.soft_label = num(key, v)?,
            "schedule" => self.schedule = ScheduleKind::parse(v)?,
            "half_life" => self.half_life = num(key, v)?,
            "lr_g" => self.lr_g = num(key, v)?,
            "lr_d" => self.lr_d = num(key, v)?,
            "adam_beta1" => self.adam_beta1 = num(key, v)?,
            "adam_beta2" => self.adam_beta2 = num(key, v)?,
            "adam_eps" => self.adam_eps = num(key, v)?,
            "n_d" => self.n_d = num(key, v)?,
            "n_g" => self.n_g = num(key, v)?,
            "disc_steps_per_gen" => self.disc_steps_per_gen = num(key, v)?,
            "steps" => self.steps = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "n_components" => self.n_components = num(key, v)?,
            "radius" => self.radius = num(key, v)?,
            "std" => self.std = num(key, v)?,
            "eval_interval" => self.eval_interval = num(key, v)?,
            "eval_samples" => self.eval_samples = num(key, v)?,
            "prd_samples" => self.prd_samples = num(key, v)?,
            "prd_bins" => self.prd_bins = num(key, v)?,
            "snapshot_steps" => self.snapshot_steps = list(key, v)?,
            "utilization_window" => self.utilization_window = num(key, v)?,
            "coverage_dist_sigma" => self.coverage_dist_sigma = num(key, v)?,
            "coverage_count_threshold" => self.coverage_count_threshold = num(key, v)?,
            "activity_threshold" => self.activity_threshold = num(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parse the flat key-value format, starting from defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut saw_variant_ls = false;
        // First pass just for the variant, so variant-dependent defaults
        // apply before explicit keys override them.
        for line in text.lines() {
            let line = line.split('#').next().unwrap().trim();
            if let Some((key, value)) = line.split_once('=') {
                if key.trim() == "variant" && value.trim() == "least_squares" {
                    saw_variant_ls = true;
                }
            }
        }
        if saw_variant_ls {
            cfg = TrainConfig::default_least_squares();
        }
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            cfg.set_key(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        TrainConfig::parse(&text)
    }

    /// Full key-value echo of the effective configuration.
    pub fn echo(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let list64 = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("m", self.m.to_string());
        push("k", self.k.to_string());
        push("d_z", self.d_z.to_string());
        push("variant", self.variant.name().to_string());
        push("gen_hidden", list(&self.gen_hidden));
        push("disc_hidden", list(&self.disc_hidden));
        push("leaky_slope", self.leaky_slope.to_string());
        push("alpha", self.alpha.to_string());
        push("beta_d", self.beta_d.to_string());
        push("beta_g", self.beta_g.to_string());
        push("gamma", self.gamma.to_string());
        push("tau", self.tau.to_string());
        push("soft_label", self.soft_label.to_string());
        push("schedule", self.schedule.name().to_string());
        push("half_life", self.half_life.to_string());
        push("lr_g", self.lr_g.to_string());
        push("lr_d", self.lr_d.to_string());
        push("adam_beta1", self.adam_beta1.to_string());
        push("adam_beta2", self.adam_beta2.to_string());
        push("adam_eps", self.adam_eps.to_string());
        push("n_d", self.n_d.to_string());
        push("n_g", self.n_g.to_string());
        push("disc_steps_per_gen", self.disc_steps_per_gen.to_string());
        push("steps", self.steps.to_string());
        push("seed", self.seed.to_string());
        push("n_components", self.n_components.to_string());
        push("radius", self.radius.to_string());
        push("std", self.std.to_string());
        push("eval_interval", self.eval_interval.to_string());
        push("eval_samples", self.eval_samples.to_string());
        push("prd_samples", self.prd_samples.to_string());
        push("prd_bins", self.prd_bins.to_string());
        push("snapshot_steps", list64(&self.snapshot_steps));
        push("utilization_window", self.utilization_window.to_string());
        push("coverage_dist_sigma", self.coverage_dist_sigma.to_string());
        push("coverage_count_threshold", self.coverage_count_threshold.to_string());
        push("activity_threshold", self.activity_threshold.to_string());
        out
    }
}
