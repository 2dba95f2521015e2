//! CSV output for training metrics, trajectories and evaluation summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gateworld::EpisodeOutcome;
use crate::pilot::eval::{EvalSummary, TrajectoryRow};
use crate::td3core::{EpisodeRecord, TrainObserver};

pub const METRICS_HEADER: &str = "episode,env_steps,return,outcome,steps";
pub const TRAJECTORY_HEADER: &str =
    "step,t,x,y,z,yaw,vx,vy,vz,yaw_rate,cmd_vx,cmd_vy,cmd_vz,cmd_yaw_rate,reward,outcome";
pub const SUMMARY_HEADER: &str =
    "episodes,success_rate,mean_return,std_return,mean_steps,success,gate_crash,ground_crash,out_of_bounds,timeout";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Appends one line per finished training episode.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    error: Option<std::io::Error>,
    rows: u64,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = create(path)?;
        writeln!(out, "{METRICS_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            error: None,
            rows: 0,
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn write(&mut self, r: &EpisodeRecord) -> Result<()> {
        writeln!(self.out, "{}", metrics_line(r)).map_err(|e| Error::io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    /// Flush buffered rows, surfacing any error swallowed by the observer hook.
    pub fn flush(&mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(Error::io(&self.path, e));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl TrainObserver for MetricsWriter {
    fn on_episode(&mut self, record: &EpisodeRecord) {
        if self.error.is_some() {
            return;
        }
        if let Err(Error::Io { source, .. }) = self.write(record) {
            self.error = Some(source);
        }
    }
}

pub fn metrics_line(r: &EpisodeRecord) -> String {
    format!("{},{},{},{},{}", r.episode, r.env_steps, r.ret, r.outcome, r.steps)
}

pub fn trajectory_line(row: &TrajectoryRow) -> String {
    let s = &row.state;
    let c = &row.cmd;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.step,
        row.t,
        s.pos[0],
        s.pos[1],
        s.pos[2],
        s.yaw,
        s.vel[0],
        s.vel[1],
        s.vel[2],
        s.yaw_rate,
        c[0],
        c[1],
        c[2],
        c[3],
        row.reward,
        row.outcome
    )
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{TRAJECTORY_HEADER}").map_err(io)?;
    for row in rows {
        writeln!(out, "{}", trajectory_line(row)).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn summary_line(s: &EvalSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        s.episodes,
        s.success_rate,
        s.mean_return,
        s.std_return,
        s.mean_steps,
        s.count(EpisodeOutcome::Success),
        s.count(EpisodeOutcome::GateCrash),
        s.count(EpisodeOutcome::GroundCrash),
        s.count(EpisodeOutcome::OutOfBounds),
        s.count(EpisodeOutcome::Timeout)
    )
}

pub fn write_summary(path: &Path, s: &EvalSummary) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{SUMMARY_HEADER}\n{}", summary_line(s)).map_err(io)?;
    out.flush().map_err(io)
}
