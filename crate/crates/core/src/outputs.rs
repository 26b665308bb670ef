//! Output processors and run metadata.
//!
//! Every processor writes one file. Trajectories are plain text with a
//! space-separated header `timeStep pedestrianId x y`; measurements are CSV
//! with headers. Numbers use 12 significant digits. The metadata sidecar
//! `<scenario>.meta.json` identifies the build, seed and parameters of the
//! run.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::AgentId;
use crate::engine::{run_simulation, AgentSnapshot, EngineError, Frame, FrameSink, RunSummary};
use crate::floorfield::{rasterize_speed, solve_all};
use crate::format::format_significant;
use crate::geometry::{Point2, Shape};
use crate::scenario::{serialize_scenario, ModelName, ProcessorConfig, Scenario};

const DIGITS: usize = 12;

fn num(v: f64) -> String {
    format_significant(v, DIGITS)
}

pub const TRAJECTORY_HEADER: &str = "timeStep pedestrianId x y";

/// Writes one row per present agent and output instant.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        Ok(TrajectoryWriter { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> FrameSink for TrajectoryWriter<W> {
    fn record(&mut self, frame: &Frame) -> io::Result<()> {
        for a in &frame.agents {
            writeln!(
                self.out,
                "{} {} {} {}",
                frame.time_step,
                a.id,
                num(a.position.x),
                num(a.position.y)
            )?;
        }
        Ok(())
    }

    fn finish(&mut self, _: &RunSummary) -> io::Result<()> {
        self.out.flush()
    }
}

/// Agents per square meter inside `area`, counting centers.
pub fn density_in(agents: &[AgentSnapshot], area: &Shape) -> f64 {
    let count = agents.iter().filter(|a| area.contains_point(a.position)).count();
    count as f64 / area.area()
}

pub struct DensityWriter<W: Write> {
    area: Shape,
    out: W,
}

impl<W: Write> DensityWriter<W> {
    pub fn new(area: Shape, mut out: W) -> io::Result<Self> {
        writeln!(out, "timeStep,density")?;
        Ok(DensityWriter { area, out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> FrameSink for DensityWriter<W> {
    fn record(&mut self, frame: &Frame) -> io::Result<()> {
        writeln!(self.out, "{},{}", frame.time_step, num(density_in(&frame.agents, &self.area)))
    }

    fn finish(&mut self, _: &RunSummary) -> io::Result<()> {
        self.out.flush()
    }
}

/// Signed crossing of the path `p0 -> p1` over the segment `a -> b`: `+1`
/// when moving from its left to its right side, `-1` the other way, `0` if
/// the path misses the segment. A point on the line counts as right.
pub fn crossing_sign(p0: Point2, p1: Point2, a: Point2, b: Point2) -> i32 {
    let dir = b - a;
    let s0 = dir.cross(p0 - a);
    let s1 = dir.cross(p1 - a);
    let (left0, left1) = (s0 > 0.0, s1 > 0.0);
    if left0 == left1 {
        return 0;
    }
    let lambda = s0 / (s0 - s1);
    let q = p0 + (p1 - p0) * lambda;
    let mu = (q - a).dot(dir) / dir.norm_squared();
    if !(0.0..=1.0).contains(&mu) {
        return 0;
    }
    if left0 {
        1
    } else {
        -1
    }
}

/// Net crossings of a measurement line per second over a sliding window.
pub struct FlowCounter {
    pub from: Point2,
    pub to: Point2,
    pub window: f64,
    last: BTreeMap<AgentId, Point2>,
    events: VecDeque<(f64, i32)>,
}

impl FlowCounter {
    pub fn new(from: Point2, to: Point2, window: f64) -> Self {
        FlowCounter {
            from,
            to,
            window,
            last: BTreeMap::new(),
            events: VecDeque::new(),
        }
    }

    /// Registers the frame's crossings and returns the current flow.
    pub fn observe(&mut self, frame: &Frame) -> f64 {
        let mut next = BTreeMap::new();
        for a in &frame.agents {
            if let Some(&prev) = self.last.get(&a.id) {
                let sign = crossing_sign(prev, a.position, self.from, self.to);
                if sign != 0 {
                    self.events.push_back((frame.time, sign));
                }
            }
            next.insert(a.id, a.position);
        }
        self.last = next;
        let cutoff = frame.time - self.window;
        while self.events.front().is_some_and(|&(t, _)| t <= cutoff + 1e-9) {
            self.events.pop_front();
        }
        let net: i32 = self.events.iter().map(|&(_, s)| s).sum();
        net as f64 / self.window
    }
}

pub struct FlowWriter<W: Write> {
    counter: FlowCounter,
    out: W,
}

impl<W: Write> FlowWriter<W> {
    pub fn new(counter: FlowCounter, mut out: W) -> io::Result<Self> {
        writeln!(out, "timeStep,flow")?;
        Ok(FlowWriter { counter, out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> FrameSink for FlowWriter<W> {
    fn record(&mut self, frame: &Frame) -> io::Result<()> {
        let flow = self.counter.observe(frame);
        writeln!(self.out, "{},{}", frame.time_step, num(flow))
    }

    fn finish(&mut self, _: &RunSummary) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvacuationRow {
    pub agent_id: AgentId,
    pub spawn_time: f64,
    /// `None` if the agent was still present at the end.
    pub absorption_time: Option<f64>,
}

impl EvacuationRow {
    pub fn evacuation_time(&self) -> Option<f64> {
        self.absorption_time.map(|t| t - self.spawn_time)
    }
}

/// Per-agent evacuation times of a finished run, ordered by id.
pub fn evacuation_rows(summary: &RunSummary) -> Vec<EvacuationRow> {
    let mut rows: Vec<EvacuationRow> = summary
        .absorptions
        .iter()
        .map(|a| EvacuationRow {
            agent_id: a.agent_id,
            spawn_time: a.spawn_time,
            absorption_time: Some(a.time),
        })
        .chain(summary.unabsorbed.iter().map(|&(id, spawn)| EvacuationRow {
            agent_id: id,
            spawn_time: spawn,
            absorption_time: None,
        }))
        .collect();
    rows.sort_by_key(|r| r.agent_id);
    rows
}

/// Largest evacuation time among absorbed agents.
pub fn max_evacuation_time(rows: &[EvacuationRow]) -> Option<f64> {
    rows.iter().filter_map(EvacuationRow::evacuation_time).reduce(f64::max)
}

pub const EVACUATION_HEADER: &str = "pedestrianId,spawnTime,absorptionTime,evacuationTime";

pub fn write_evacuation<W: Write>(rows: &[EvacuationRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{EVACUATION_HEADER}")?;
    for r in rows {
        match r.absorption_time {
            Some(t) => writeln!(out, "{},{},{},{}", r.agent_id, num(r.spawn_time), num(t), num(t - r.spawn_time))?,
            None => writeln!(out, "{},{},NA,NA", r.agent_id, num(r.spawn_time))?,
        }
    }
    out.flush()
}

pub struct EvacuationWriter<W: Write> {
    out: Option<W>,
}

impl<W: Write> EvacuationWriter<W> {
    pub fn new(out: W) -> Self {
        EvacuationWriter { out: Some(out) }
    }
}

impl<W: Write> FrameSink for EvacuationWriter<W> {
    fn record(&mut self, _: &Frame) -> io::Result<()> {
        Ok(())
    }

    fn finish(&mut self, summary: &RunSummary) -> io::Result<()> {
        match self.out.take() {
            Some(out) => write_evacuation(&evacuation_rows(summary), out),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Rebuilds the frames of a run from its trajectory file. Instants without
/// rows (no agents present) are restored as empty frames up to
/// `total_steps`.
pub fn frames_from_trajectories(text: &str, output_time_step: f64, total_steps: u64) -> Result<Vec<Frame>, ReplayError> {
    let mut frames: Vec<Frame> = (1..=total_steps)
        .map(|k| Frame {
            time_step: k,
            time: k as f64 * output_time_step,
            agents: Vec::new(),
        })
        .collect();
    for (n, line) in text.lines().enumerate().skip(1) {
        let bad = |message: &str| ReplayError::Malformed {
            line: n + 1,
            message: message.to_owned(),
        };
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let step: u64 = fields[0].parse().map_err(|_| bad("bad timeStep"))?;
        let id: AgentId = fields[1].parse().map_err(|_| bad("bad pedestrianId"))?;
        let x: f64 = fields[2].parse().map_err(|_| bad("bad x"))?;
        let y: f64 = fields[3].parse().map_err(|_| bad("bad y"))?;
        if step == 0 || step > total_steps {
            return Err(bad("timeStep out of range"));
        }
        frames[(step - 1) as usize].agents.push(AgentSnapshot {
            id,
            position: Point2::new(x, y),
            target: None,
        });
    }
    Ok(frames)
}

/// Reproducibility record written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMetadata {
    pub scenario_name: String,
    pub seed: u64,
    pub build_id: String,
    pub start_timestamp: String,
    pub parameter_digest: String,
    pub output_time_step: f64,
    pub model_name: ModelName,
}

/// SHA-256 of the canonical scenario serialization with the seed zeroed.
pub fn parameter_digest(scenario: &Scenario) -> String {
    let mut unseeded = scenario.clone();
    unseeded.seed = 0;
    hex::encode(Sha256::digest(serialize_scenario(&unseeded).as_bytes()))
}

impl RunMetadata {
    pub fn new(scenario: &Scenario, build_id: &str, start_timestamp: &str) -> Self {
        RunMetadata {
            scenario_name: scenario.name.clone(),
            seed: scenario.seed,
            build_id: build_id.to_owned(),
            start_timestamp: start_timestamp.to_owned(),
            parameter_digest: parameter_digest(scenario),
            output_time_step: scenario.output_time_step,
            model_name: scenario.model_name,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }
}

pub fn metadata_file_name(scenario: &Scenario) -> String {
    format!("{}.meta.json", scenario.name)
}

/// Marker left in a run directory whose run failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Start timestamp to record; defaults to the current UTC time.
    pub timestamp: Option<String>,
    /// Build identifier to record; defaults to [`crate::BUILD_ID`].
    pub build_id: Option<String>,
    /// Also write the floor field of every target as CSV.
    pub export_fields: bool,
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub metadata: RunMetadata,
    pub files: Vec<PathBuf>,
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path).map(BufWriter::new).map_err(|source| OutputError::Io {
        path: path.to_owned(),
        source,
    })
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Runs `scenario` writing its processors, metadata and optional floor
/// field exports into `dir`, which is created if missing. A failed run
/// leaves an [`INCOMPLETE_MARKER`] file holding the error.
pub fn run_to_directory(scenario: &Scenario, dir: &Path, options: &RunOptions) -> Result<RunOutcome, OutputError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let result = run_inner(scenario, dir, options);
    if let Err(e) = &result {
        let _ = fs::write(dir.join(INCOMPLETE_MARKER), format!("{e}\n"));
    }
    result
}

fn run_inner(scenario: &Scenario, dir: &Path, options: &RunOptions) -> Result<RunOutcome, OutputError> {
    let timestamp = options.timestamp.clone().unwrap_or_else(now_timestamp);
    let build_id = options.build_id.as_deref().unwrap_or(crate::BUILD_ID);
    let metadata = RunMetadata::new(scenario, build_id, &timestamp);
    let meta_path = dir.join(metadata_file_name(scenario));
    fs::write(&meta_path, metadata.to_json()).map_err(io_at(&meta_path))?;
    let mut files = vec![meta_path];

    let mut sinks: Vec<Box<dyn FrameSink>> = Vec::new();
    for processor in &scenario.processors {
        let path = dir.join(processor.file());
        let out = create(&path)?;
        let sink: Box<dyn FrameSink> = match processor {
            ProcessorConfig::Trajectories { .. } => Box::new(TrajectoryWriter::new(out).map_err(io_at(&path))?),
            ProcessorConfig::Density { area, .. } => {
                Box::new(DensityWriter::new(area.shape.clone(), out).map_err(io_at(&path))?)
            }
            ProcessorConfig::Flow { from, to, window, .. } => {
                Box::new(FlowWriter::new(FlowCounter::new(*from, *to, *window), out).map_err(io_at(&path))?)
            }
            ProcessorConfig::EvacuationTime { .. } => Box::new(EvacuationWriter::new(out)),
        };
        sinks.push(sink);
        files.push(path);
    }

    if options.export_fields {
        files.extend(export_floor_fields(scenario, dir)?);
    }

    let mut refs: Vec<&mut dyn FrameSink> = sinks.iter_mut().map(|s| s.as_mut() as &mut dyn FrameSink).collect();
    let summary = run_simulation(scenario, &mut refs)?;
    Ok(RunOutcome {
        summary,
        metadata,
        files,
    })
}

/// Writes `floorfield_<target>.csv` for every target of the scenario.
pub fn export_floor_fields(scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let topo = &scenario.topography;
    let speed = rasterize_speed(topo, scenario.floor_field_cell_size, scenario.floor_field_max_cells, None)
        .map_err(EngineError::from)?;
    let mut files = Vec::new();
    for ff in solve_all(topo, &speed).map_err(EngineError::from)? {
        let path = dir.join(format!("floorfield_{}.csv", ff.target_id));
        let mut out = create(&path)?;
        ff.u.write_csv(&mut out).and_then(|_| out.flush()).map_err(io_at(&path))?;
        files.push(path);
    }
    Ok(files)
}
