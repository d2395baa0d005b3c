//! Subcommand implementations. Flags override the config file, which
//! overrides the defaults; the merged config is echoed next to the outputs.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use pal_core::eval::{
    estimator_rmse, parse_grid, reference_models, robustness_sweep, tracking_eval, tracking_rmse, write_csv,
    zero_shot::model_seeds, zero_shot_eval, EstimatorRow, EvalModel, PolicyUnderTest, SweepKind, SweepRow, SweepSpec,
    ZeroShotProtocol,
};
use pal_core::morphology::{
    assemble_model, generate_robot_set, reference, reference_by_name, RobotEntry, RobotModel, RobotSet, N_LEGS,
};
use pal_core::ppo::trainer::{TrainSpec, Trainer, CHECKPOINT, TRAIN_CSV};
use pal_core::ppo::{PpoError, Variant};

use crate::config::RunConfig;

pub const METRICS_ENV: &str = "PAL_METRICS_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that failed while running; exit code 1.
    #[error("{0:#}")]
    Failed(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Failed(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "pal", version, about = "Procedural quadrupeds, adaptive locomotion training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a viable robot set from reference ids.
    GenRobots(GenRobotsArgs),
    /// Train a policy (PAL or MorAL) on a robot set.
    Train(TrainArgs),
    /// Evaluate checkpoints: perturbation sweeps, tracking, zero-shot tables.
    Eval(EvalArgs),
    /// Print the mass, offset and nominal-height summary of one robot.
    InspectRobot(InspectArgs),
}

fn parse_ref(s: &str) -> Result<u32, String> {
    let id: u32 = s.trim().parse().map_err(|_| format!("not a reference id: {s:?}"))?;
    reference(id).map_err(|e| e.to_string())?;
    Ok(id)
}

#[derive(Args, Debug)]
pub struct GenRobotsArgs {
    /// JSON run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated reference ids (1, 2, 4, 5).
    #[arg(long, value_delimiter = ',', value_parser = parse_ref)]
    pub refs: Option<Vec<u32>>,
    /// Robots per reference id.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output robot file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Comma-separated reference ids to train on; robots of other ids in the
    /// robot file are ignored.
    #[arg(long, value_delimiter = ',', value_parser = parse_ref)]
    pub ids: Option<Vec<u32>>,
    /// Robot file from gen-robots.
    #[arg(long)]
    pub robots: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total PPO iterations (also extends a resumed run).
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, env = METRICS_ENV)]
    pub metrics_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from `<checkpoint-dir>/checkpoint.json`.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint file; repeat for zero-shot tables. Defaults to the
    /// config's checkpoint directory.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Success-rate sweep: push_force, friction, latency or base_mass_delta.
    #[arg(long)]
    pub sweep: Option<SweepKind>,
    /// Sweep grid, `lo:hi:n` or a comma list.
    #[arg(long, requires = "sweep")]
    pub grid: Option<String>,
    /// Log command tracking and velocity estimates on `--robot`.
    #[arg(long)]
    pub tracking: bool,
    /// Zero-shot table over every checkpoint and `--models`.
    #[arg(long)]
    pub zero_shot: bool,
    /// Model for sweeps and tracking, e.g. `a1_ref`.
    #[arg(long)]
    pub robot: Option<String>,
    /// Comma-separated unseen models for the zero-shot table.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Rollouts per condition.
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Rollout horizon (s).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the report CSVs.
    #[arg(long, env = METRICS_ENV)]
    pub metrics_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Reference stand-in by name or id, e.g. `anymal_c_ref`.
    #[arg(long, conflicts_with = "robots")]
    pub robot: Option<String>,
    /// Robot file; use with `--index`.
    #[arg(long, requires = "index")]
    pub robots: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) if !p.exists() => Err(CliError::Failed(anyhow!("config file {} not found", p.display()))),
        Some(p) => RunConfig::load(p).map_err(usage),
        None => Ok(RunConfig::default()),
    }
}

fn echo_config(cfg: &RunConfig, dir: &Path, name: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json()).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli, stop: &'static AtomicBool) -> Result<(), CliError> {
    match cli.command {
        Command::GenRobots(a) => gen_robots(a),
        Command::Train(a) => train(a, stop),
        Command::Eval(a) => eval(a),
        Command::InspectRobot(a) => inspect(a),
    }
}

fn gen_robots(a: GenRobotsArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config)?;
    if let Some(r) = a.refs {
        cfg.ids = r;
    }
    if let Some(c) = a.count {
        cfg.count = c;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = a.out {
        cfg.paths.robots = o;
    }
    cfg.validate().map_err(usage)?;
    let (set, report) = generate_robot_set(&cfg.ids, cfg.count, cfg.seed, &cfg.generation).context("robot generation")?;
    let out = &cfg.paths.robots;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    set.save(out).with_context(|| format!("writing {}", out.display()))?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("robots");
    let report_path = dir.join(format!("{stem}.report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes"))
        .with_context(|| format!("writing {}", report_path.display()))?;
    echo_config(&cfg, dir, &format!("{stem}.config.json"))?;
    for (id, r) in &report.per_reference {
        println!("ref {id}: {} accepted of {} attempts ({:.1}%)", r.accepted, r.attempts, 100.0 * r.acceptance_rate);
    }
    println!("wrote {} robots to {}", set.len(), out.display());
    Ok(())
}

/// The robots of `ids`, in file order.
fn select_ids(set: &RobotSet, ids: &[u32]) -> anyhow::Result<RobotSet> {
    for id in ids {
        if !set.robots.iter().any(|r| r.ref_id == *id) {
            bail!("robot file has no robots of reference id {id}");
        }
    }
    Ok(RobotSet {
        refs: ids.to_vec(),
        robots: set.robots.iter().filter(|r| ids.contains(&r.ref_id)).cloned().collect(),
        ..set.clone()
    })
}

fn train(a: TrainArgs, stop: &'static AtomicBool) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config)?;
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(ids) = a.ids {
        cfg.ids = ids;
    }
    if let Some(r) = a.robots {
        cfg.paths.robots = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.iterations {
        cfg.ppo.iterations = n;
    }
    if let Some(d) = a.metrics_dir {
        cfg.paths.metrics = d;
    }
    if let Some(d) = a.checkpoint_dir {
        cfg.paths.checkpoints = d;
    }
    cfg.validate().map_err(usage)?;
    let (metrics, ckdir) = (cfg.paths.metrics.clone(), cfg.paths.checkpoints.clone());

    let mut trainer = if a.resume {
        let path = ckdir.join(CHECKPOINT);
        if !path.exists() {
            return Err(anyhow!("nothing to resume: {} not found", path.display()).into());
        }
        let mut t = Trainer::load(&path).with_context(|| format!("loading {}", path.display()))?;
        // The checkpoint's spec is authoritative; only the length may change.
        let spec = TrainSpec { variant: cfg.variant, seed: cfg.seed, ppo: cfg.ppo.clone(), env: cfg.env.clone(), generation: cfg.generation.clone() };
        let mut want = spec.clone();
        want.ppo.iterations = t.spec.ppo.iterations;
        if want != t.spec {
            log::warn!("config differs from the checkpoint; continuing with the checkpoint's settings");
        }
        t.spec.ppo.iterations = cfg.ppo.iterations;
        cfg.variant = t.spec.variant;
        cfg.seed = t.spec.seed;
        cfg.ppo = t.spec.ppo.clone();
        cfg.env = t.spec.env.clone();
        cfg.generation = t.spec.generation.clone();
        println!("resuming at iteration {}", t.iteration);
        t
    } else {
        let latency = cfg.generation.sampling.latency;
        let set = RobotSet::load(&cfg.paths.robots, &latency).with_context(|| format!("loading {}", cfg.paths.robots.display()))?;
        let robots = select_ids(&set, &cfg.ids)?;
        let spec = TrainSpec { variant: cfg.variant, seed: cfg.seed, ppo: cfg.ppo.clone(), env: cfg.env.clone(), generation: cfg.generation.clone() };
        Trainer::new(spec, robots).context("setting up training")?
    };
    echo_config(&cfg, &metrics, "train.config.json")?;
    match trainer.run(&metrics, &ckdir, Some(stop)) {
        Ok(rows) => {
            if let Some(m) = rows.last() {
                println!(
                    "finished iteration {}: reward {:.4}, episode length {:.1}",
                    m.iteration, m.mean_reward, m.mean_episode_length
                );
            }
            println!("metrics in {}, checkpoint {}", metrics.join(TRAIN_CSV).display(), ckdir.join(CHECKPOINT).display());
            Ok(())
        }
        Err(PpoError::Interrupted) => {
            println!("interrupted at iteration {}; checkpoint saved to {}", trainer.iteration, ckdir.join(CHECKPOINT).display());
            Ok(())
        }
        Err(e) => Err(anyhow::Error::new(e).context("training").into()),
    }
}

struct Loaded {
    trainer: Trainer,
    ids: Vec<u32>,
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Loaded> {
    if !path.exists() {
        bail!("checkpoint {} not found", path.display());
    }
    let trainer = Trainer::load(path).with_context(|| format!("loading {}", path.display()))?;
    let mut ids: Vec<u32> = trainer.robots.robots.iter().map(|r| r.ref_id).collect();
    ids.sort_unstable();
    ids.dedup();
    Ok(Loaded { trainer, ids })
}

fn model(name: &str) -> Result<EvalModel, CliError> {
    let r = reference_by_name(name).map_err(|e| usage(e.to_string()))?;
    Ok(reference_models(&[r.id]).map_err(anyhow::Error::new)?.remove(0))
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config)?;
    if let Some(r) = a.robot {
        cfg.eval.robot = r;
    }
    if let Some(m) = a.models {
        cfg.eval.models = m;
    }
    if let Some(n) = a.rollouts {
        cfg.eval.protocol.rollouts = n;
    }
    if let Some(d) = a.duration {
        cfg.eval.protocol.duration = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.metrics_dir {
        cfg.paths.metrics = d;
    }
    let mut sweeps = Vec::new();
    if let Some(kind) = a.sweep {
        let grid = match &a.grid {
            Some(g) => parse_grid(g).map_err(|e| usage(e.to_string()))?,
            None => kind.default_grid(),
        };
        sweeps.push(SweepSpec { kind, grid, protocol: cfg.eval.protocol, seed: cfg.seed });
    } else if !a.tracking && !a.zero_shot {
        sweeps = cfg.eval.sweeps.clone();
    }
    cfg.eval.sweeps = sweeps.clone();
    cfg.validate().map_err(usage)?;
    if sweeps.is_empty() && !a.tracking && !a.zero_shot {
        return Err(usage("nothing to evaluate: pass --sweep, --tracking or --zero-shot, or list sweeps in the config"));
    }
    let checkpoints = if a.checkpoint.is_empty() { vec![cfg.paths.checkpoints.join(CHECKPOINT)] } else { a.checkpoint.clone() };
    if checkpoints.len() > 1 && (!sweeps.is_empty() || a.tracking) {
        return Err(usage("sweeps and tracking take a single --checkpoint"));
    }
    let loaded = checkpoints.iter().map(|p| load_checkpoint(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let out = cfg.paths.metrics.clone();
    echo_config(&cfg, &out, "eval.config.json")?;
    let first = &loaded[0];
    let env = &first.trainer.spec.env;

    if !sweeps.is_empty() {
        let robot = model(&cfg.eval.robot)?;
        let mut rows: Vec<SweepRow> = Vec::new();
        for spec in &sweeps {
            let res = robustness_sweep(&first.trainer.agent, &robot.entry, env, spec).context("sweep")?;
            for p in &res.points {
                println!("{} {:>10.4}  SR {:.3}  ({} of {} failed)", spec.kind, p.value, p.sr, p.n_fail, p.n_total);
            }
            if let Some(ok) = res.nominal_dominates(spec.kind.nominal(&robot.entry)) {
                println!("{}: nominal point at least as good as both grid ends: {ok}", spec.kind);
            }
            rows.extend(res.rows());
        }
        write_csv(&out.join("sweep.csv"), &rows).context("writing sweep.csv")?;
    }

    if a.tracking {
        let robot = model(&cfg.eval.robot)?;
        let proto = ZeroShotProtocol { rollouts: cfg.eval.protocol, seed: cfg.seed };
        let (_, seeds) = model_seeds(&proto, &robot.name);
        let (causes, log) = tracking_eval(&first.trainer.agent, &robot.entry, env, &cfg.eval.protocol, &seeds).context("tracking")?;
        write_csv(&out.join("tracking.csv"), &log).context("writing tracking.csv")?;
        let est: Vec<EstimatorRow> = log.iter().map(EstimatorRow::from).collect();
        write_csv(&out.join("estimator.csv"), &est).context("writing estimator.csv")?;
        let t = tracking_rmse(&log).context("tracking RMSE")?;
        let e = estimator_rmse(&log).context("estimator RMSE")?;
        let fails = causes.iter().filter(|c| c.is_failure()).count();
        println!("{}: {} rollouts, {fails} failed, {} steps", robot.name, causes.len(), log.len());
        println!("tracking RMSE x {:.4} y {:.4} yaw {:.4}", t[0], t[1], t[2]);
        println!("estimator RMSE x {:.4} y {:.4} z {:.4}", e[0], e[1], e[2]);
    }

    if a.zero_shot {
        let models = cfg.eval.models.iter().map(|m| model(m)).collect::<Result<Vec<_>, _>>()?;
        let policies: Vec<PolicyUnderTest<'_>> = loaded
            .iter()
            .map(|l| PolicyUnderTest { variant: l.trainer.spec.variant, ids: l.ids.clone(), agent: &l.trainer.agent, training: &l.trainer.robots })
            .collect();
        let proto = ZeroShotProtocol { rollouts: cfg.eval.protocol, seed: cfg.seed };
        let rows = zero_shot_eval(&policies, &models, &proto, env).context("zero-shot evaluation")?;
        write_csv(&out.join("report.csv"), &rows).context("writing report.csv")?;
        println!("{:<6} {:<8} {:<13} {:>6} {:>8} {:>8} {:>8}", "var", "ids", "model", "SR", "rmse_x", "rmse_y", "rmse_yaw");
        for r in &rows {
            println!(
                "{:<6} {:<8} {:<13} {:>6.3} {:>8.4} {:>8.4} {:>8.4}",
                r.variant, r.ids, r.model, r.sr, r.rmse_x, r.rmse_y, r.rmse_yaw
            );
        }
    }
    Ok(())
}

fn print_robot(name: &str, e: &RobotEntry, m: &RobotModel) {
    let p = &e.params;
    println!("{name} (reference {}, configuration {:?}, actuator {:?})", e.ref_id, p.configuration, p.actuator);
    println!("  base mass      {:.4} kg", p.base_mass);
    println!("  total mass     {:.4} kg", m.total_mass());
    println!("  r_n            {:.5} m", m.r_n);
    println!("  kp / kd / tau  {:.3} / {:.3} / {:.3}", p.kp, p.kd, p.tau_max);
    println!("  latency        {:.4} s", p.latency);
    const LEGS: [&str; N_LEGS] = ["FL", "FR", "HL", "HR"];
    for (leg, name) in LEGS.iter().enumerate() {
        let j = 3 * leg;
        let off: Vec<String> = (j..j + 3)
            .map(|k| {
                let c = p.signed_offset(k);
                format!("({:+.3} {:+.3} {:+.3})", c.x, c.y, c.z)
            })
            .collect();
        println!(
            "  {name}  masses {:.3} {:.3} {:.3}  offsets {}  foot {:.3}  q^n {:+.3} {:+.3} {:+.3}  mu {:.3}",
            p.link_masses[j],
            p.link_masses[j + 1],
            p.link_masses[j + 2],
            off.join(" "),
            p.foot_offsets[leg],
            m.nominal[j],
            m.nominal[j + 1],
            m.nominal[j + 2],
            p.friction[leg]
        );
    }
}

fn inspect(a: InspectArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    match (&a.robot, &a.robots) {
        (Some(name), _) => {
            let m = model(name)?;
            let built = assemble_model(&m.entry.params, &reference(m.entry.ref_id).map_err(anyhow::Error::new)?).map_err(anyhow::Error::new)?;
            print_robot(&m.name, &m.entry, &built);
        }
        (None, Some(path)) => {
            let set = RobotSet::load(path, &cfg.generation.sampling.latency).with_context(|| format!("loading {}", path.display()))?;
            let i = a.index.expect("clap requires --index");
            let e = set.robots.get(i).ok_or_else(|| usage(format!("index {i} out of range (file has {} robots)", set.len())))?;
            let built = set.build(i).map_err(anyhow::Error::new)?;
            print_robot(&format!("robot {i}"), e, &built);
        }
        (None, None) => return Err(usage("pass --robot NAME or --robots FILE --index N")),
    }
    Ok(())
}

/// Registers the Ctrl-C handler that asks training to checkpoint and stop.
pub fn install_interrupt(stop: &'static AtomicBool) {
    if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
        log::warn!("could not install the Ctrl-C handler: {e}");
    }
}
