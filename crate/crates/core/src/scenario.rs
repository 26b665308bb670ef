//! Declarative scenario description and its JSON representation.
//!
//! Every field name, unit and default is listed in `docs/scenario-schema.md`.
//! Unknown keys are rejected. Serialization is deterministic: the same value
//! always produces the same bytes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bhm::BhmParams;
use crate::floorfield::DynamicSpeedParams;
use crate::geometry::{Aabb, Point2, Shape};
use crate::osm::{CaMode, OsmParams};
use crate::sfm::SfmParams;

/// Identifier of a source or target.
pub type EntityId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct AgentAttributes {
    pub torso_radius: f64,
    pub speed_mean: f64,
    pub speed_sd: f64,
    pub speed_min: f64,
    pub speed_max: f64,
}

impl Default for AgentAttributes {
    fn default() -> Self {
        AgentAttributes {
            torso_radius: 0.2,
            speed_mean: 1.34,
            speed_sd: 0.26,
            speed_min: 0.5,
            speed_max: 2.2,
        }
    }
}

/// The walkable domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Bounds {
    pub origin: Point2,
    pub width: f64,
    pub height: f64,
}

impl Bounds {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Bounds {
            origin: Point2::new(x, y),
            width,
            height,
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: Point2::new(self.origin.x + self.width, self.origin.y + self.height),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        let b = self.aabb();
        p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y
    }
}

fn default_inter_spawn_time() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Source {
    pub id: EntityId,
    pub shape: Shape,
    #[serde(default)]
    pub spawn_number: u32,
    #[serde(default = "default_inter_spawn_time")]
    pub inter_spawn_time: f64,
    #[serde(default)]
    pub first_spawn_time: f64,
    pub target_ids: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Target {
    pub id: EntityId,
    pub shape: Shape,
    #[serde(default = "default_true")]
    pub absorbing: bool,
}

/// An agent present from the start; ids are assigned in declaration order
/// starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct InitialAgent {
    pub position: Point2,
    #[serde(default)]
    pub target_ids: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Topography {
    pub bounds: Bounds,
    #[serde(default)]
    pub obstacles: Vec<Shape>,
    #[serde(default)]
    pub sources: Vec<Source>,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub initial_agents: Vec<InitialAgent>,
}

impl Topography {
    pub fn empty(bounds: Bounds) -> Self {
        Topography {
            bounds,
            obstacles: Vec::new(),
            sources: Vec::new(),
            targets: Vec::new(),
            initial_agents: Vec::new(),
        }
    }

    pub fn target(&self, id: EntityId) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }

    pub fn in_any_obstacle(&self, p: Point2) -> bool {
        self.obstacles.iter().any(|o| o.contains_point(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ModelName {
    #[default]
    #[serde(rename = "osm")]
    Osm,
    #[serde(rename = "osm-ca")]
    OsmCa,
    #[serde(rename = "sfm")]
    Sfm,
    #[serde(rename = "bhm")]
    Bhm,
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelName::Osm => "osm",
            ModelName::OsmCa => "osm-ca",
            ModelName::Sfm => "sfm",
            ModelName::Bhm => "bhm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct ModelParams {
    pub osm: OsmParams,
    pub sfm: SfmParams,
    pub bhm: BhmParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct MeasurementAreaConfig {
    pub id: EntityId,
    pub shape: Shape,
}

fn default_flow_window() -> f64 {
    10.0
}

/// One output processor; each writes its own file inside the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum ProcessorConfig {
    Trajectories {
        file: String,
    },
    #[serde(rename_all = "camelCase")]
    Density {
        file: String,
        area: MeasurementAreaConfig,
    },
    #[serde(rename_all = "camelCase")]
    Flow {
        file: String,
        from: Point2,
        to: Point2,
        #[serde(default = "default_flow_window")]
        window: f64,
    },
    EvacuationTime {
        file: String,
    },
}

impl ProcessorConfig {
    pub fn file(&self) -> &str {
        match self {
            ProcessorConfig::Trajectories { file }
            | ProcessorConfig::Density { file, .. }
            | ProcessorConfig::Flow { file, .. }
            | ProcessorConfig::EvacuationTime { file } => file,
        }
    }
}

pub const DEFAULT_TRAJECTORY_FILE: &str = "trajectories.txt";

fn default_processors() -> Vec<ProcessorConfig> {
    vec![ProcessorConfig::Trajectories {
        file: DEFAULT_TRAJECTORY_FILE.to_owned(),
    }]
}

fn default_finish_time() -> f64 {
    300.0
}

fn default_output_time_step() -> f64 {
    0.4
}

fn default_cell_size() -> f64 {
    0.1
}

fn default_max_cells() -> u64 {
    20_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_finish_time")]
    pub finish_time: f64,
    #[serde(default = "default_output_time_step")]
    pub output_time_step: f64,
    #[serde(default)]
    pub model_name: ModelName,
    #[serde(default)]
    pub model_params: ModelParams,
    #[serde(default)]
    pub agent_attributes: AgentAttributes,
    pub topography: Topography,
    #[serde(default = "default_processors")]
    pub processors: Vec<ProcessorConfig>,
    #[serde(default = "default_cell_size")]
    pub floor_field_cell_size: f64,
    /// Density-dependent floor field; `null` keeps the field static.
    #[serde(default)]
    pub dynamic_floor_field: Option<DynamicSpeedParams>,
    #[serde(default = "default_max_cells")]
    pub floor_field_max_cells: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "default".to_owned(),
            seed: 0,
            finish_time: default_finish_time(),
            output_time_step: default_output_time_step(),
            model_name: ModelName::default(),
            model_params: ModelParams::default(),
            agent_attributes: AgentAttributes::default(),
            topography: Topography::empty(Bounds::new(0.0, 0.0, 10.0, 10.0)),
            processors: default_processors(),
            floor_field_cell_size: default_cell_size(),
            dynamic_floor_field: None,
            floor_field_max_cells: default_max_cells(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// The offending element, e.g. `agent 3` or `source 2`.
    pub element: Option<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.element {
            Some(element) => write!(f, "{level} [{element}]: {}", self.message),
            None => write!(f, "{level}: {}", self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl From<serde_json::Error> for ScenarioError {
    fn from(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let (line, column) = (err.line(), err.column());
        let message = err.to_string();
        match err.classify() {
            Category::Data => ScenarioError::Schema {
                line,
                column,
                message,
            },
            Category::Syntax | Category::Eof | Category::Io => ScenarioError::Syntax {
                line,
                column,
                message,
            },
        }
    }
}

/// Parses, checks and returns a runnable scenario. Warnings do not fail.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.check()?;
    Ok(scenario)
}

/// Like [`parse_scenario`] for an already-parsed JSON tree.
pub fn scenario_from_value(value: serde_json::Value) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_value(value)?;
    scenario.check()?;
    Ok(scenario)
}

/// Pretty-printed JSON with a trailing newline, keys in declaration order.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(scenario).expect("scenario is always serializable");
    text.push('\n');
    text
}

impl Scenario {
    /// Fails with every error-level diagnostic, if there is any.
    pub fn check(&self) -> Result<(), ScenarioError> {
        let errors: Vec<_> = validate_scenario(self)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }

    pub fn to_json(&self) -> String {
        serialize_scenario(self)
    }
}

struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    fn push(&mut self, severity: Severity, element: Option<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity,
            message: message.into(),
            element,
        });
    }

    fn error(&mut self, element: Option<String>, message: impl Into<String>) {
        self.push(Severity::Error, element, message);
    }

    fn warning(&mut self, element: Option<String>, message: impl Into<String>) {
        self.push(Severity::Warning, element, message);
    }

    fn require(&mut self, ok: bool, element: Option<String>, message: impl Into<String>) {
        if !ok {
            self.error(element, message);
        }
    }
}

fn grid_cells(bounds: &Bounds, h: f64) -> f64 {
    (bounds.width / h).ceil() * (bounds.height / h).ceil()
}

/// All problems found in the scenario; empty means runnable.
pub fn validate_scenario(s: &Scenario) -> Vec<Diagnostic> {
    let mut d = Diagnostics(Vec::new());
    let topo = &s.topography;
    let bounds = &topo.bounds;

    d.require(!s.name.is_empty(), None, "scenario name must not be empty");
    d.require(
        s.finish_time.is_finite() && s.finish_time > 0.0,
        None,
        "finishTime must be positive",
    );
    d.require(
        s.output_time_step.is_finite() && s.output_time_step > 0.0,
        None,
        "outputTimeStep must be positive",
    );
    if s.output_time_step > s.finish_time {
        d.error(None, "outputTimeStep exceeds finishTime");
    }
    let h = s.floor_field_cell_size;
    d.require(h.is_finite() && h > 0.0, None, "floorFieldCellSize must be positive");
    let bounds_ok = bounds.origin.is_finite()
        && bounds.width.is_finite()
        && bounds.height.is_finite()
        && bounds.width > 0.0
        && bounds.height > 0.0;
    d.require(bounds_ok, Some("bounds".into()), "bounds need positive finite width and height");
    if bounds_ok && h > 0.0 && grid_cells(bounds, h) > s.floor_field_max_cells as f64 {
        d.error(
            None,
            format!(
                "floor field grid of {} cells exceeds floorFieldMaxCells = {}",
                grid_cells(bounds, h),
                s.floor_field_max_cells
            ),
        );
    }

    let attrs = &s.agent_attributes;
    d.require(attrs.torso_radius > 0.0, None, "torsoRadius must be positive");
    d.require(attrs.speed_sd >= 0.0, None, "speedSd must not be negative");
    d.require(attrs.speed_min > 0.0, None, "speedMin must be positive");
    d.require(
        attrs.speed_min <= attrs.speed_mean && attrs.speed_mean <= attrs.speed_max,
        None,
        "agent speeds must satisfy speedMin <= speedMean <= speedMax",
    );
    if h > attrs.torso_radius {
        d.warning(
            None,
            "floorFieldCellSize exceeds torsoRadius; the floor field may be infinite next to walls",
        );
    }

    for problem in s.model_params.osm.problems(attrs.torso_radius) {
        d.error(Some("modelParams.osm".into()), problem);
    }
    for problem in s.model_params.sfm.problems() {
        d.error(Some("modelParams.sfm".into()), problem);
    }
    if s.model_name == ModelName::OsmCa && s.model_params.osm.ca_mode == CaMode::None {
        d.error(
            Some("modelParams.osm".into()),
            "model osm-ca needs caMode vonNeumann or moore",
        );
    }
    if s.model_name == ModelName::Osm && s.model_params.osm.ca_mode != CaMode::None {
        d.warning(
            Some("modelParams.osm".into()),
            "caMode is only used by model osm-ca",
        );
    }
    if let Some(dynamic) = &s.dynamic_floor_field {
        for problem in dynamic.problems() {
            d.error(Some("dynamicFloorField".into()), problem);
        }
    }

    let area = bounds.aabb();
    let target_ids: BTreeSet<EntityId> = topo.targets.iter().map(|t| t.id).collect();
    let mut seen = BTreeSet::new();
    for t in &topo.targets {
        let el = Some(format!("target {}", t.id));
        if !seen.insert(t.id) {
            d.error(el.clone(), "duplicate target id");
        }
        d.require(
            area.contains_box(&t.shape.bounding_box()),
            el,
            "target shape leaves the topography bounds",
        );
    }

    let mut seen = BTreeSet::new();
    for src in &topo.sources {
        let el = Some(format!("source {}", src.id));
        if !seen.insert(src.id) {
            d.error(el.clone(), "duplicate source id");
        }
        if src.target_ids.is_empty() {
            d.error(el.clone(), "source is defined without a target");
        }
        for id in &src.target_ids {
            if !target_ids.contains(id) {
                d.error(el.clone(), format!("references missing target {id}"));
            }
        }
        d.require(
            src.inter_spawn_time.is_finite() && src.inter_spawn_time > 0.0,
            el.clone(),
            "interSpawnTime must be positive",
        );
        d.require(
            src.first_spawn_time.is_finite() && src.first_spawn_time >= 0.0,
            el.clone(),
            "firstSpawnTime must not be negative",
        );
        d.require(
            area.contains_box(&src.shape.bounding_box()),
            el.clone(),
            "source shape leaves the topography bounds",
        );
        if topo.obstacles.iter().any(|o| o.intersects(&src.shape)) {
            d.warning(
                el,
                "source overlaps an obstacle; agents spawn only in the free part",
            );
        }
    }
    for (heuristic_source, _) in &s.model_params.bhm.source_heuristics {
        if !topo.sources.iter().any(|src| src.id == *heuristic_source) {
            d.error(
                Some("modelParams.bhm".into()),
                format!("sourceHeuristics names missing source {heuristic_source}"),
            );
        }
    }

    let r = attrs.torso_radius;
    for (i, agent) in topo.initial_agents.iter().enumerate() {
        let el = Some(format!("agent {}", i + 1));
        if agent.target_ids.is_empty() {
            d.error(el.clone(), "pedestrian is defined without a target");
        }
        for id in &agent.target_ids {
            if !target_ids.contains(id) {
                d.error(el.clone(), format!("references missing target {id}"));
            }
        }
        let p = agent.position;
        if !p.is_finite() || !bounds.contains(p) {
            d.error(el.clone(), "position lies outside the topography bounds");
            continue;
        }
        if topo.in_any_obstacle(p) {
            d.error(el.clone(), "position lies inside an obstacle");
        } else if topo.obstacles.iter().any(|o| o.distance_to(p) < r) {
            d.warning(el.clone(), "torso overlaps an obstacle");
        }
        for (j, other) in topo.initial_agents.iter().enumerate().skip(i + 1) {
            if (other.position - p).norm() < 2.0 * r {
                d.warning(el.clone(), format!("torso overlaps agent {}", j + 1));
            }
        }
    }

    let mut files = BTreeSet::new();
    for p in &s.processors {
        let file = p.file();
        let el = Some(format!("processor {file}"));
        if file.is_empty() || file.contains('/') || file.contains('\\') || file.starts_with('.') {
            d.error(el.clone(), "file must be a plain file name");
        }
        if !files.insert(file.to_owned()) {
            d.error(el.clone(), "two processors write the same file");
        }
        match p {
            ProcessorConfig::Density { area, .. } => {
                d.require(area.shape.area() > 0.0, el, "measurement area must be positive");
            }
            ProcessorConfig::Flow {
                from, to, window, ..
            } => {
                d.require(from != to, el.clone(), "flow line needs two distinct points");
                d.require(window.is_finite() && *window > 0.0, el, "flow window must be positive");
            }
            _ => {}
        }
    }

    let mut out = d.0;
    out.sort_by(|a, b| b.severity.cmp(&a.severity));
    out
}
