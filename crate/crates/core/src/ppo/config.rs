use serde::{Deserialize, Serialize};

use crate::dim::DimTrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Recurrent dynamics encoder, trained offline between PPO rounds.
    Pal,
    /// Explicit morphology/body-state regressor trained alongside PPO.
    Moral,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Pal => "pal",
            Variant::Moral => "moral",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pal" => Ok(Variant::Pal),
            "moral" => Ok(Variant::Moral),
            _ => Err(format!("unknown variant {s:?} (expected pal or moral)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub n_env: usize,
    pub steps_per_iter: usize,
    /// Minibatches per epoch. Each holds whole env streams.
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub clip: f64,
    pub value_clip: f64,
    pub bptt_window: usize,
    /// Simulated seconds between robot-set resamples.
    pub resample_period: f64,
    pub resample_fraction: f64,
    pub lr: f64,
    pub kl_target: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub max_grad_norm: f64,
    pub init_std: f64,
    pub learn_std: bool,
    pub policy_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub velocity_hidden: Vec<usize>,
    pub moral_hidden: usize,
    pub estimator_lr: f64,
    pub iterations: usize,
    pub checkpoint_every: usize,
    /// PAL only: alternating encoder/policy rounds; `iterations` is split across them.
    pub dim_rounds: usize,
    /// PAL only: transitions collected for each offline encoder fit.
    pub dim_transitions: usize,
    pub dim_train: DimTrainConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9962,
            gae_lambda: 0.95,
            epochs: 4,
            n_env: 450,
            steps_per_iter: 140,
            minibatches: 8,
            entropy_coef: 0.0,
            value_coef: 0.5,
            clip: 0.2,
            value_clip: 0.2,
            bptt_window: 50,
            resample_period: 25.0,
            resample_fraction: 0.2,
            lr: 1e-3,
            kl_target: 0.01,
            lr_min: 1e-6,
            lr_max: 1e-2,
            max_grad_norm: 1.0,
            init_std: 0.6,
            learn_std: false,
            policy_hidden: vec![512, 512],
            critic_hidden: vec![512, 512],
            velocity_hidden: vec![512, 256],
            moral_hidden: 256,
            estimator_lr: 1e-3,
            iterations: 1500,
            checkpoint_every: 50,
            dim_rounds: 3,
            dim_transitions: 30_000,
            dim_train: DimTrainConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.n_env * self.steps_per_iter
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64, n: &str| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(format!("{n} must be positive")) };
        if self.n_env == 0 || self.steps_per_iter == 0 || self.epochs == 0 || self.minibatches == 0 {
            return Err("n_env, steps_per_iter, epochs and minibatches must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err("gamma and gae_lambda must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.resample_fraction) {
            return Err("resample_fraction must lie in [0, 1]".into());
        }
        pos(self.lr, "lr")?;
        pos(self.lr_min, "lr_min")?;
        pos(self.clip, "clip")?;
        pos(self.init_std, "init_std")?;
        pos(self.resample_period, "resample_period")?;
        pos(self.estimator_lr, "estimator_lr")?;
        if self.lr_min > self.lr_max {
            return Err("lr_min exceeds lr_max".into());
        }
        if self.dim_rounds == 0 {
            return Err("dim_rounds must be at least 1".into());
        }
        Ok(())
    }
}
