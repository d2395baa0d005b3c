//! Per-step episode CSV log.

use std::io::Write;

use super::episode::{TerminationCause, N_FEET};
use super::reward::TERM_NAMES;
use super::single::StepResult;

pub struct EpisodeLogger<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> EpisodeLogger<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut out = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            ["env", "step", "cmd_vx", "cmd_vy", "cmd_wz", "vx", "vy", "wz"].iter().map(|s| s.to_string()).collect();
        header.extend(TERM_NAMES.iter().map(|s| s.to_string()));
        header.push("total".into());
        header.extend((0..N_FEET).map(|i| format!("contact_{i}")));
        header.extend(["done".to_string(), "cause".to_string()]);
        out.write_record(&header)?;
        Ok(Self { out })
    }

    /// One row per control step. Velocities come from the frame the step
    /// ended in (the terminal frame when the episode finished).
    pub fn record(&mut self, env: usize, step: usize, r: &StepResult) -> csv::Result<()> {
        let f = r.terminal_frame.as_ref().unwrap_or(&r.frame);
        let mut row = vec![env.to_string(), step.to_string()];
        row.extend(r.command.iter().map(|v| v.to_string()));
        row.extend([f.lin_vel[0], f.lin_vel[1], f.ang_vel[2]].iter().map(|v| v.to_string()));
        row.extend(r.reward.terms().iter().map(|v| v.to_string()));
        row.push(r.reward.total.to_string());
        row.extend(r.contacts.iter().map(|&c| u8::from(c).to_string()));
        row.push(u8::from(r.done).to_string());
        row.push(r.cause.map(TerminationCause::as_str).unwrap_or("").to_string());
        self.out.write_record(&row)
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}
