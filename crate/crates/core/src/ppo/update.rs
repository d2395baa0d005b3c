//! Clipped-surrogate PPO update, the KL-driven learning-rate rule, and the
//! supervised estimator steps that share the coordinator phase.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::agent::Agent;
use super::buffer::TrajectoryBatch;
use super::config::{PpoConfig, Variant};
use crate::dim::{mse, LABEL_DIM};
use crate::nn::{clip_global_norm, Adam, AdamConfig, GaussianHead, Mat, Mlp, NnError, Params};

/// Adam state for every trained network.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub actor: Adam,
    pub head: Adam,
    pub critic: Adam,
    pub velocity: Adam,
    pub moral: Adam,
}

impl Optimizers {
    pub fn new(agent: &Agent) -> Self {
        let c = AdamConfig::default();
        Self {
            actor: Adam::new(&agent.actor, c),
            head: Adam::new(&agent.head, c),
            critic: Adam::new(&agent.critic, c),
            velocity: Adam::new(&agent.velocity, c),
            moral: Adam::new(&agent.moral.net, c),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// KL(old ‖ new) over the whole batch after the last epoch.
    pub kl: f64,
    pub clip_fraction: f64,
    pub lr: f64,
    pub aborted: bool,
}

/// `lr / 1.5` above twice the target, `lr · 1.5` below half of it, clamped.
pub fn adapt_lr(kl: f64, lr: f64, kl_target: f64, lr_min: f64, lr_max: f64) -> f64 {
    let next = if kl > 2.0 * kl_target {
        lr / 1.5
    } else if kl < 0.5 * kl_target {
        lr * 1.5
    } else {
        lr
    };
    next.clamp(lr_min, lr_max)
}

/// Clipped surrogate loss `−mean min(r A, clip(r) A)` and its gradient with
/// respect to each new log-probability.
pub fn surrogate(new_logp: &[f64], old_logp: &[f64], adv: &[f64], clip: f64) -> (f64, Vec<f64>, f64) {
    let m = new_logp.len() as f64;
    let mut loss = 0.0;
    let mut clipped = 0usize;
    let grad = new_logp
        .iter()
        .zip(old_logp)
        .zip(adv)
        .map(|((&n, &o), &a)| {
            let r = (n - o).exp();
            let rc = r.clamp(1.0 - clip, 1.0 + clip);
            loss -= (r * a).min(rc * a) / m;
            let active = (a >= 0.0 && r <= 1.0 + clip) || (a < 0.0 && r >= 1.0 - clip);
            if active {
                -a * r / m
            } else {
                clipped += 1;
                0.0
            }
        })
        .collect();
    (loss, grad, clipped as f64 / m)
}

/// Clipped value loss `mean max((v − R)², (v_clip − R)²)` and `∂/∂v`.
pub fn value_loss(v: &[f64], old_v: &[f64], ret: &[f64], clip: f64) -> (f64, Vec<f64>) {
    let m = v.len() as f64;
    let mut loss = 0.0;
    let grad = v
        .iter()
        .zip(old_v)
        .zip(ret)
        .map(|((&v, &o), &r)| {
            let d = v - o;
            let vc = o + d.clamp(-clip, clip);
            let (a, b) = ((v - r).powi(2), (vc - r).powi(2));
            loss += a.max(b) / m;
            if a >= b {
                2.0 * (v - r) / m
            } else if d.abs() < clip {
                2.0 * (vc - r) / m
            } else {
                0.0
            }
        })
        .collect();
    (loss, grad)
}

/// Mean over columns of KL(old ‖ new) for diagonal Gaussians.
pub fn gaussian_kl(old_mean: &Mat, old_log_std: &Mat, new_mean: &Mat, new_log_std: &Mat) -> f64 {
    let n = old_mean.ncols().max(1) as f64;
    let mut kl = 0.0;
    for j in 0..old_mean.ncols() {
        for i in 0..old_mean.nrows() {
            let (lo, ln) = (old_log_std[(i, 0)], new_log_std[(i, 0)]);
            let (so2, sn2) = ((2.0 * lo).exp(), (2.0 * ln).exp());
            let dm = old_mean[(i, j)] - new_mean[(i, j)];
            kl += ln - lo + (so2 + dm * dm) / (2.0 * sn2) - 0.5;
        }
    }
    kl / n
}

/// Env-stream minibatches: shuffled env ids split into at most `k` groups.
pub fn stream_minibatches<R: Rng + ?Sized>(n_env: usize, k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut envs: Vec<usize> = (0..n_env).collect();
    envs.shuffle(rng);
    let k = k.clamp(1, n_env.max(1));
    let (base, extra) = (n_env / k, n_env % k);
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for g in 0..k {
        let len = base + usize::from(g < extra);
        out.push(envs[at..at + len].to_vec());
        at += len;
    }
    out
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

struct Snapshot {
    actor: Mlp,
    head: GaussianHead,
    critic: Mlp,
    opt: (Adam, Adam, Adam),
}

/// Losses and gradients of one minibatch; exposed for gradient checks.
pub struct MinibatchGrads {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub actor: Mlp,
    pub head: GaussianHead,
    pub critic: Mlp,
    pub new_mean: Mat,
}

/// Loss `policy + c_v · value − c_e · entropy` on the given columns, with gradients.
#[allow(clippy::too_many_arguments)]
pub fn minibatch_grads(
    agent: &Agent,
    actor_obs: &Mat,
    critic_obs: &Mat,
    actions: &Mat,
    old_logp: &[f64],
    old_values: &[f64],
    adv: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
) -> Result<MinibatchGrads, NnError> {
    let cache = agent.actor.forward(actor_obs)?;
    let mean = cache.output.clone();
    let new_logp = agent.head.log_prob(&mean, actions);
    let (policy_loss, dlogp, clip_fraction) = surrogate(&new_logp, old_logp, adv, cfg.clip);
    let (dmean, dls) = agent.head.log_prob_grads(&mean, actions, &dlogp);
    let (g_actor, _) = agent.actor.backward(&cache, &dmean);
    let mut g_head = agent.head.clone();
    g_head.log_std = if agent.head.learn_std { dls.add_scalar(-cfg.entropy_coef) } else { dls * 0.0 };

    let ccache = agent.critic.forward(critic_obs)?;
    let v: Vec<f64> = ccache.output.iter().copied().collect();
    let (vl, dv) = value_loss(&v, old_values, returns, cfg.value_clip);
    let dv = Mat::from_row_slice(1, dv.len(), &dv) * cfg.value_coef;
    let (g_critic, _) = agent.critic.backward(&ccache, &dv);
    Ok(MinibatchGrads {
        policy_loss,
        value_loss: vl,
        entropy: agent.head.entropy(),
        clip_fraction,
        actor: g_actor,
        head: g_head,
        critic: g_critic,
        new_mean: mean,
    })
}

/// `epochs` passes over env-stream minibatches. `adv` must already be
/// normalized. Adapts `lr` once from the KL of the whole update. A non-finite loss or
/// parameter restores the networks to their state on entry.
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut Agent,
    opt: &mut Optimizers,
    batch: &TrajectoryBatch,
    adv: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
    lr: &mut f64,
    rng: &mut R,
) -> Result<UpdateStats, NnError> {
    let snap = Snapshot {
        actor: agent.actor.clone(),
        head: agent.head.clone(),
        critic: agent.critic.clone(),
        opt: (opt.actor.clone(), opt.head.clone(), opt.critic.clone()),
    };
    let lr_in = *lr;
    let old_log_std = agent.head.log_std.clone();
    let mut st = UpdateStats::default();
    let mut n_mb = 0usize;
    for _ in 0..cfg.epochs {
        for envs in stream_minibatches(batch.n_env, cfg.minibatches, rng) {
            let idx = batch.stream_columns(&envs);
            let g = minibatch_grads(
                agent,
                &batch.actor_obs.select_columns(&idx),
                &batch.critic_obs.select_columns(&idx),
                &batch.actions.select_columns(&idx),
                &gather(&batch.logp, &idx),
                &gather(&batch.values, &idx),
                &gather(adv, &idx),
                &gather(returns, &idx),
                cfg,
            )?;
            let total = g.policy_loss + cfg.value_coef * g.value_loss;
            if !total.is_finite() {
                log::warn!("non-finite PPO loss; restoring the networks");
                return Ok(restore(agent, opt, snap, lr, lr_in));
            }
            let MinibatchGrads { mut actor, mut head, mut critic, .. } = g;
            clip_global_norm(&mut [&mut actor, &mut head], cfg.max_grad_norm);
            clip_global_norm(&mut [&mut critic], cfg.max_grad_norm);
            opt.actor.step(&mut agent.actor, &actor, *lr)?;
            opt.critic.step(&mut agent.critic, &critic, *lr)?;
            if agent.head.learn_std {
                opt.head.step(&mut agent.head, &head, *lr)?;
            }
            st.policy_loss += g.policy_loss;
            st.value_loss += g.value_loss;
            st.clip_fraction += g.clip_fraction;
            n_mb += 1;
        }
    }
    let new_mean = agent.actor.predict(&batch.actor_obs)?;
    st.kl = gaussian_kl(&batch.means, &old_log_std, &new_mean, &agent.head.log_std);
    if !st.kl.is_finite() {
        log::warn!("non-finite KL after PPO update; restoring the networks");
        return Ok(restore(agent, opt, snap, lr, lr_in));
    }
    *lr = adapt_lr(st.kl, *lr, cfg.kl_target, cfg.lr_min, cfg.lr_max);
    if !(agent.actor.is_finite() && agent.critic.is_finite() && agent.head.is_finite()) {
        log::warn!("non-finite parameters after PPO update; restoring the networks");
        return Ok(restore(agent, opt, snap, lr, lr_in));
    }
    let k = n_mb.max(1) as f64;
    st.policy_loss /= k;
    st.value_loss /= k;
    st.clip_fraction /= k;
    st.entropy = agent.head.entropy();
    st.lr = *lr;
    Ok(st)
}

fn restore(agent: &mut Agent, opt: &mut Optimizers, snap: Snapshot, lr: &mut f64, lr_in: f64) -> UpdateStats {
    agent.actor = snap.actor;
    agent.head = snap.head;
    agent.critic = snap.critic;
    (opt.actor, opt.head, opt.critic) = snap.opt;
    *lr = lr_in;
    UpdateStats { aborted: true, lr: lr_in, entropy: agent.head.entropy(), ..UpdateStats::default() }
}

/// One supervised pass over env-stream minibatches for the velocity
/// estimator (both variants) and the morphology estimator (MorAL).
/// Returns the mean loss across minibatches.
pub fn estimator_update<R: Rng + ?Sized>(
    agent: &mut Agent,
    opt: &mut Optimizers,
    batch: &TrajectoryBatch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<f64, NnError> {
    let mut total = 0.0;
    let mut n_mb = 0usize;
    for envs in stream_minibatches(batch.n_env, cfg.minibatches, rng) {
        let idx = batch.stream_columns(&envs);
        let target_v = batch.v_true.select_columns(&idx);
        let cache = agent.velocity.forward(&batch.est_obs.select_columns(&idx))?;
        let (lv, gv) = mse(&cache.output, &target_v);
        let (mut grads, _) = agent.velocity.backward(&cache, &gv);
        clip_global_norm(&mut [&mut grads], cfg.max_grad_norm);
        opt.velocity.step(&mut agent.velocity, &grads, cfg.estimator_lr)?;
        total += lv;
        if agent.variant == Variant::Moral {
            let (lm, mut g) = moral_grads(agent, &batch.moral_in.select_columns(&idx), &batch.labels.select_columns(&idx), &target_v)?;
            clip_global_norm(&mut [&mut g], cfg.max_grad_norm);
            opt.moral.step(&mut agent.moral.net, &g, cfg.estimator_lr)?;
            total += lm;
        }
        n_mb += 1;
    }
    Ok(total / n_mb.max(1) as f64)
}

/// Label MSE plus velocity MSE, weighted 1:1.
pub fn moral_grads(agent: &Agent, input: &Mat, labels: &Mat, v: &Mat) -> Result<(f64, Mlp), NnError> {
    let cache = agent.moral.net.forward(input)?;
    let out = &cache.output;
    let (ll, gl) = mse(&out.rows(0, LABEL_DIM).into_owned(), labels);
    let (lv, gv) = mse(&out.rows(LABEL_DIM, 3).into_owned(), v);
    let mut g = Mat::zeros(out.nrows(), out.ncols());
    g.rows_mut(0, LABEL_DIM).copy_from(&gl);
    g.rows_mut(LABEL_DIM, 3).copy_from(&gv);
    Ok((ll + lv, agent.moral.net.backward(&cache, &g).0))
}
