//! The training coordinator: collect, advantages, PPO, estimators, robot
//! resampling, metrics and checkpoints. For PAL it also runs the
//! alternating encoder/policy rounds.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::agent::Agent;
use super::buffer::{collect_rollouts, RolloutState, TrajectoryBatch};
use super::config::{PpoConfig, Variant};
use super::gae::{compute_gae, normalize};
use super::update::{estimator_update, ppo_update, Optimizers};
use super::PpoError;
use crate::dim::{train_offline, DimDataset, DimTrainReport, LabelSpace, SequenceRecorder};
use crate::env::{Env, EnvConfig, EnvSnapshot, VecEnv};
use crate::morphology::{resample_fraction, GenerationConfig, RobotModel, RobotSet};
use crate::nn::{Checkpoint, Params};
use crate::seeding::{rng_for, tag, Rng};

pub const CHECKPOINT: &str = "checkpoint.json";
pub const TRAIN_CSV: &str = "train.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const DIM_CSV: &str = "dim_rounds.csv";

/// Everything a run is reproducible from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub variant: Variant,
    pub seed: u64,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub generation: GenerationConfig,
}

/// One row of `train.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Transitions collected so far, over all envs.
    pub env_steps: u64,
    /// Mean per-step reward over the iteration's batch.
    pub mean_reward: f64,
    /// Mean length of episodes that ended this iteration; if none ended,
    /// the mean length of the episodes still running.
    pub mean_episode_length: f64,
    pub episodes_done: usize,
    /// `1 − failures / episodes_done`, 1 when no episode ended.
    pub success_proxy: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub estimator_loss: f64,
    /// `policy_loss + value_coef · value_loss + estimator_loss`.
    pub total_loss: f64,
    pub kl: f64,
    pub lr: f64,
    pub action_std: f64,
    pub resample_events: u64,
    pub aborted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimRoundRow {
    pub round: usize,
    pub iteration: usize,
    pub transitions: usize,
    pub train_loss: f64,
    pub heldout_loss: f64,
    pub heldout_baseline: f64,
    pub latent_mean: f64,
    pub latent_std: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Meta {
    spec: TrainSpec,
    iteration: usize,
    lr: f64,
    rng: Rng,
    rollout: RolloutState,
    envs: Vec<EnvSnapshot>,
    robots: RobotSet,
    resample_events: u64,
    dim_round_done: Option<usize>,
}

pub struct Trainer {
    pub spec: TrainSpec,
    pub agent: Agent,
    pub opt: Optimizers,
    pub lr: f64,
    pub iteration: usize,
    pub robots: RobotSet,
    pub labels: LabelSpace,
    pub resample_events: u64,
    pub dim_round_done: Option<usize>,
    pub dim_reports: Vec<DimRoundRow>,
    venv: VecEnv,
    state: RolloutState,
    rng: Rng,
}

fn models(set: &RobotSet) -> Result<Vec<Arc<RobotModel>>, PpoError> {
    Ok(set.build_all()?.into_iter().map(Arc::new).collect())
}

fn io<E: std::fmt::Display>(e: E) -> PpoError {
    PpoError::Io(e.to_string())
}

/// Rolls the agent out on a fresh batch of envs and records every episode's
/// `x_t` sequence with its robot's label.
pub fn collect_dim_dataset(
    agent: &Agent,
    robots: Vec<Arc<RobotModel>>,
    env_cfg: &EnvConfig,
    n_env: usize,
    n_transitions: usize,
    labels: &LabelSpace,
    seed: u64,
) -> Result<DimDataset, PpoError> {
    let mut venv = VecEnv::new(robots, n_env, env_cfg, seed)?;
    let mut state = RolloutState::new(n_env);
    let mut rng = rng_for(seed, &[tag("dim_collect")]);
    let mut rec = SequenceRecorder::new(n_env);
    let steps = n_transitions.div_ceil(n_env.max(1));
    collect_rollouts(agent, &mut venv, &mut state, steps, labels, &env_cfg.scales, &mut rng, Some(&mut rec), &mut |_, _| Ok(()))?;
    Ok(rec.finish())
}

impl Trainer {
    pub fn new(spec: TrainSpec, robots: RobotSet) -> Result<Self, PpoError> {
        spec.ppo.validate().map_err(PpoError::Config)?;
        let mut init = rng_for(spec.seed, &[tag("init")]);
        let agent = Agent::new(spec.variant, &spec.ppo, &mut init);
        let opt = Optimizers::new(&agent);
        let venv = VecEnv::new(models(&robots)?, spec.ppo.n_env, &spec.env, spec.seed)?;
        Ok(Self {
            labels: LabelSpace::all_references(spec.generation.sampling.latency),
            lr: spec.ppo.lr,
            state: RolloutState::new(spec.ppo.n_env),
            rng: rng_for(spec.seed, &[tag("trainer")]),
            spec,
            agent,
            opt,
            iteration: 0,
            robots,
            resample_events: 0,
            dim_round_done: None,
            dim_reports: Vec::new(),
            venv,
        })
    }

    pub fn venv(&self) -> &VecEnv {
        &self.venv
    }

    pub fn rollout_state(&self) -> &RolloutState {
        &self.state
    }

    fn period_steps(&self) -> u64 {
        (self.spec.ppo.resample_period / self.spec.env.control_dt).round().max(1.0) as u64
    }

    /// First iteration of each encoder round.
    pub fn round_starts(&self) -> Vec<usize> {
        let rounds = self.spec.ppo.dim_rounds.max(1);
        let per = self.spec.ppo.iterations / rounds;
        (0..rounds).map(|r| r * per).collect()
    }

    /// Refits the encoder on data from the current policy.
    pub fn fit_dim(&mut self, round: usize) -> Result<DimTrainReport, PpoError> {
        let seed = crate::seeding::derive_seed(self.spec.seed, &[tag("dim_round"), round as u64]);
        let ds = collect_dim_dataset(
            &self.agent,
            models(&self.robots)?,
            &self.spec.env,
            self.spec.ppo.n_env,
            self.spec.ppo.dim_transitions,
            &self.labels,
            seed,
        )?;
        let rep = train_offline(&mut self.agent.dim, &ds, &self.spec.ppo.dim_train, seed)?;
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
        for s in &ds.sequences {
            let mut h = crate::nn::Mat::zeros(crate::env::LATENT_DIM, 1);
            for t in 0..s.len() {
                let x = crate::nn::Mat::from_column_slice(crate::env::X_DIM, 1, s.row(t));
                h = self.agent.dim.gru.step(&x, &h)?;
                sum += h.sum();
                sq += h.norm_squared();
                n += h.len();
            }
        }
        let mean = sum / n.max(1) as f64;
        let last = rep.epochs.last();
        let row = DimRoundRow {
            round,
            iteration: self.iteration,
            transitions: ds.n_transitions(),
            train_loss: last.map_or(f64::NAN, |e| e.train_loss),
            heldout_loss: last.and_then(|e| e.heldout_loss).unwrap_or(f64::NAN),
            heldout_baseline: rep.heldout_baseline.unwrap_or(f64::NAN),
            latent_mean: mean,
            latent_std: (sq / n.max(1) as f64 - mean * mean).max(0.0).sqrt(),
        };
        log::info!(
            "dim round {round}: {} transitions, train {:.4}, held-out {:.4} (mean predictor {:.4}), latent {:.3} ± {:.3}",
            row.transitions, row.train_loss, row.heldout_loss, row.heldout_baseline, row.latent_mean, row.latent_std
        );
        self.dim_reports.push(row);
        self.dim_round_done = Some(round);
        Ok(rep)
    }

    /// Collect, advantages, PPO update and estimator update.
    pub fn iterate(&mut self) -> Result<(IterationMetrics, TrajectoryBatch), PpoError> {
        let cfg = self.spec.ppo.clone();
        let period = self.period_steps();
        let seed = self.spec.seed;
        let frac = cfg.resample_fraction;
        let gen = self.spec.generation.clone();
        let robots = &mut self.robots;
        let events = &mut self.resample_events;
        let mut hook = |venv: &mut VecEnv, steps: u64| -> Result<(), PpoError> {
            if steps.is_multiple_of(period) && frac > 0.0 {
                let mut r = rng_for(seed, &[tag("resample"), *events]);
                let (next, idx) = resample_fraction(robots, frac, &mut r, &gen)?;
                if !idx.is_empty() {
                    venv.set_robots(models(&next)?)?;
                    *robots = next;
                }
                *events += 1;
                log::debug!("resampled {} robots at env step {steps}", idx.len());
            }
            Ok(())
        };
        let batch = collect_rollouts(
            &self.agent,
            &mut self.venv,
            &mut self.state,
            cfg.steps_per_iter,
            &self.labels,
            &self.spec.env.scales,
            &mut self.rng,
            None,
            &mut hook,
        )?;

        let n = batch.len();
        let mut adv = vec![0.0; n];
        let mut ret = vec![0.0; n];
        for e in 0..batch.n_env {
            let (r, v, d, nv) = batch.stream(e);
            let (a, rt) = compute_gae(&r, &v, &d, &nv, cfg.gamma, cfg.gae_lambda);
            for t in 0..batch.steps {
                adv[batch.col(t, e)] = a[t];
                ret[batch.col(t, e)] = rt[t];
            }
        }
        normalize(&mut adv);

        let st = ppo_update(&mut self.agent, &mut self.opt, &batch, &adv, &ret, &cfg, &mut self.lr, &mut self.rng)?;
        let est = estimator_update(&mut self.agent, &mut self.opt, &batch, &cfg, &mut self.rng)?;
        if !est.is_finite() {
            return Err(PpoError::Diverged(format!("estimator loss {est} at iteration {}", self.iteration)));
        }

        let done = batch.episodes.len();
        let failures = batch.episodes.iter().filter(|e| e.cause.is_failure()).count();
        let mean_len = if done > 0 {
            batch.episodes.iter().map(|e| e.length as f64).sum::<f64>() / done as f64
        } else {
            self.state.episode_len.iter().sum::<usize>() as f64 / self.state.episode_len.len().max(1) as f64
        };
        let m = IterationMetrics {
            iteration: self.iteration,
            env_steps: self.state.env_steps * batch.n_env as u64,
            mean_reward: batch.rewards.iter().sum::<f64>() / n.max(1) as f64,
            mean_episode_length: mean_len,
            episodes_done: done,
            success_proxy: if done > 0 { 1.0 - failures as f64 / done as f64 } else { 1.0 },
            policy_loss: st.policy_loss,
            value_loss: st.value_loss,
            estimator_loss: est,
            total_loss: st.policy_loss + cfg.value_coef * st.value_loss + est,
            kl: st.kl,
            lr: self.lr,
            action_std: self.agent.head.log_std.iter().map(|l| l.exp()).sum::<f64>() / self.agent.head.dim() as f64,
            resample_events: self.resample_events,
            aborted: st.aborted,
        };
        self.iteration += 1;
        Ok((m, batch))
    }

    /// Trains until `self.spec.ppo.iterations`, writing CSVs into `metrics`
    /// and checkpoints into `checkpoints` every `checkpoint_every` iterations. Setting `stop`
    /// checkpoints and returns [`PpoError::Interrupted`].
    pub fn run(&mut self, metrics: &Path, checkpoints: &Path, stop: Option<&AtomicBool>) -> Result<Vec<IterationMetrics>, PpoError> {
        std::fs::create_dir_all(metrics).map_err(io)?;
        std::fs::create_dir_all(checkpoints).map_err(io)?;
        let mut sink = MetricsSink::open(metrics, self.iteration)?;
        let starts = self.round_starts();
        let mut rows = Vec::new();
        let mut aborted_streak = 0usize;
        while self.iteration < self.spec.ppo.iterations {
            if stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
                self.save(&checkpoints.join(CHECKPOINT))?;
                return Err(PpoError::Interrupted);
            }
            if self.spec.variant == Variant::Pal {
                if let Some(round) = starts.iter().position(|&s| s == self.iteration) {
                    if self.dim_round_done.is_none_or(|d| d < round) {
                        self.fit_dim(round)?;
                        sink.dim_row(self.dim_reports.last().expect("just pushed"))?;
                    }
                }
            }
            let t0 = Instant::now();
            let (m, _) = self.iterate()?;
            sink.row(&m, t0.elapsed().as_secs_f64())?;
            log::info!(
                "iter {:>5}  reward {:>8.4}  ep_len {:>6.1}  kl {:.4}  lr {:.2e}  loss {:.4}",
                m.iteration, m.mean_reward, m.mean_episode_length, m.kl, m.lr, m.total_loss
            );
            aborted_streak = if m.aborted { aborted_streak + 1 } else { 0 };
            rows.push(m);
            if aborted_streak >= 5 {
                return Err(PpoError::Diverged("five consecutive updates aborted on non-finite losses".into()));
            }
            let every = self.spec.ppo.checkpoint_every;
            if (every > 0 && self.iteration.is_multiple_of(every)) || self.iteration == self.spec.ppo.iterations {
                self.save(&checkpoints.join(CHECKPOINT))?;
                if every > 0 && self.iteration.is_multiple_of(every) {
                    self.save(&checkpoints.join(format!("checkpoint_{:06}.json", self.iteration)))?;
                }
            }
        }
        sink.flush()?;
        Ok(rows)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        self.agent.put(&mut ck);
        ck.put_optimizer("actor", &self.opt.actor);
        ck.put_optimizer("log_std", &self.opt.head);
        ck.put_optimizer("critic", &self.opt.critic);
        ck.put_optimizer("velocity", &self.opt.velocity);
        ck.put_optimizer("moral", &self.opt.moral);
        let meta = Meta {
            spec: self.spec.clone(),
            iteration: self.iteration,
            lr: self.lr,
            rng: self.rng.clone(),
            rollout: self.state.clone(),
            envs: self.venv.envs().iter().map(Env::snapshot).collect(),
            robots: self.robots.clone(),
            resample_events: self.resample_events,
            dim_round_done: self.dim_round_done,
        };
        ck.meta = serde_json::to_value(meta).expect("meta serializes");
        ck
    }

    pub fn save(&self, path: &Path) -> Result<(), PpoError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, PpoError> {
        let meta: Meta = serde_json::from_value(ck.meta.clone()).map_err(|e| PpoError::Config(format!("checkpoint meta: {e}")))?;
        let spec = meta.spec;
        spec.ppo.validate().map_err(PpoError::Config)?;
        let mut init = rng_for(spec.seed, &[tag("init")]);
        let mut agent = Agent::new(spec.variant, &spec.ppo, &mut init);
        agent.get(ck)?;
        let mut opt = Optimizers::new(&agent);
        ck.get_optimizer("actor", &mut opt.actor)?;
        ck.get_optimizer("log_std", &mut opt.head)?;
        ck.get_optimizer("critic", &mut opt.critic)?;
        ck.get_optimizer("velocity", &mut opt.velocity)?;
        ck.get_optimizer("moral", &mut opt.moral)?;
        if meta.envs.len() != spec.ppo.n_env || meta.rollout.episode_len.len() != spec.ppo.n_env {
            return Err(PpoError::Config("checkpoint env count does not match its config".into()));
        }
        let envs = meta.envs.into_iter().map(|s| Env::restore(s, spec.env.clone())).collect::<Result<Vec<_>, _>>()?;
        let venv = VecEnv::from_envs(envs, models(&meta.robots)?)?;
        Ok(Self {
            labels: LabelSpace::all_references(spec.generation.sampling.latency),
            spec,
            agent,
            opt,
            lr: meta.lr,
            iteration: meta.iteration,
            robots: meta.robots,
            resample_events: meta.resample_events,
            dim_round_done: meta.dim_round_done,
            dim_reports: Vec::new(),
            venv,
            state: meta.rollout,
            rng: meta.rng,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PpoError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// The agent alone, for evaluation.
    pub fn load_agent(path: &Path) -> Result<(Agent, TrainSpec), PpoError> {
        let t = Self::load(path)?;
        Ok((t.agent, t.spec))
    }

    pub fn n_params(&self) -> usize {
        self.agent.actor.n_params() + self.agent.critic.n_params()
    }
}

struct MetricsSink {
    train: csv::Writer<std::fs::File>,
    timing: csv::Writer<std::fs::File>,
    dim: csv::Writer<std::fs::File>,
}

fn open_csv(path: PathBuf, append: bool) -> Result<csv::Writer<std::fs::File>, PpoError> {
    let exists = append && path.exists() && std::fs::metadata(&path).map(|m| m.len() > 0).unwrap_or(false);
    let f = std::fs::OpenOptions::new().create(true).append(append).write(true).truncate(!append).open(&path).map_err(io)?;
    Ok(csv::WriterBuilder::new().has_headers(!exists).from_writer(f))
}

/// Drops rows whose `iteration` column is `>= from`, so a resumed run that
/// restarts from an older checkpoint does not duplicate rows.
fn truncate_csv(path: &Path, from: usize) -> Result<(), PpoError> {
    if !path.exists() {
        return Ok(());
    }
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let headers = r.headers().map_err(io)?.clone();
    if headers.is_empty() {
        return std::fs::remove_file(path).map_err(io);
    }
    let Some(col) = headers.iter().position(|h| h == "iteration") else {
        return Err(PpoError::Io(format!("{}: no iteration column", path.display())));
    };
    let mut keep = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let it: usize = rec.get(col).and_then(|v| v.parse().ok()).ok_or_else(|| PpoError::Io(format!("{}: bad iteration", path.display())))?;
        if it < from {
            keep.push(rec);
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&headers).map_err(io)?;
    for rec in keep {
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(io)
}

impl MetricsSink {
    fn open(dir: &Path, resume_from: usize) -> Result<Self, PpoError> {
        let append = resume_from > 0;
        if append {
            for name in [TRAIN_CSV, TIMING_CSV, DIM_CSV] {
                truncate_csv(&dir.join(name), resume_from)?;
            }
        }
        Ok(Self {
            train: open_csv(dir.join(TRAIN_CSV), append)?,
            timing: open_csv(dir.join(TIMING_CSV), append)?,
            dim: open_csv(dir.join(DIM_CSV), append)?,
        })
    }

    fn row(&mut self, m: &IterationMetrics, seconds: f64) -> Result<(), PpoError> {
        #[derive(Serialize)]
        struct Timing {
            iteration: usize,
            wall_seconds: f64,
        }
        self.train.serialize(m).map_err(io)?;
        self.timing.serialize(Timing { iteration: m.iteration, wall_seconds: seconds }).map_err(io)?;
        self.flush()
    }

    fn dim_row(&mut self, r: &DimRoundRow) -> Result<(), PpoError> {
        self.dim.serialize(r).map_err(io)?;
        self.dim.flush().map_err(io)
    }

    fn flush(&mut self) -> Result<(), PpoError> {
        self.train.flush().map_err(io)?;
        self.timing.flush().map_err(io)
    }
}

/// Reads `train.csv` back.
pub fn read_metrics(path: &Path) -> Result<Vec<IterationMetrics>, PpoError> {
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    r.deserialize().map(|row| row.map_err(io)).collect()
}
