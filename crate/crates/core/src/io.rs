//! JSON formats: instances, solutions and the constraint dump.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::Point2;
use crate::plan::{Action, Plan};
use crate::tree::EdgeKind;
use crate::world::{Instance, WorldError, WorldSpec};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("{0}")]
    Content(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    world: WorldSpec,
    objects: Vec<String>,
    start: BTreeMap<String, [f64; 2]>,
    goal: BTreeMap<String, [f64; 2]>,
}

fn pt(p: [f64; 2]) -> Point2 {
    Point2::new(p[0], p[1])
}

fn arr(p: Point2) -> [f64; 2] {
    [p.x, p.y]
}

pub fn instance_from_json(text: &str) -> Result<Instance, ParseError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let lookup =
        |map: &BTreeMap<String, [f64; 2]>, which: &str| -> Result<Vec<Point2>, ParseError> {
            if let Some(extra) = map.keys().find(|k| !file.objects.contains(k)) {
                return Err(ParseError::Content(format!(
                    "{which} lists unknown object {extra:?}"
                )));
            }
            file.objects
                .iter()
                .map(|o| {
                    map.get(o).map(|&p| pt(p)).ok_or_else(|| {
                        ParseError::Content(format!("missing {which} position for {o:?}"))
                    })
                })
                .collect()
        };
    let starts = lookup(&file.start, "start")?;
    let goals = lookup(&file.goal, "goal")?;
    Ok(Instance::new(
        file.world,
        file.objects.clone(),
        starts,
        goals,
    )?)
}

pub fn instance_to_json(instance: &Instance) -> String {
    let file = InstanceFile {
        world: instance.world.clone(),
        objects: instance.objects.clone(),
        start: instance
            .object_ids()
            .map(|o| {
                (
                    instance.name(o).to_string(),
                    arr(instance.position(&instance.start, o)),
                )
            })
            .collect(),
        goal: instance
            .object_ids()
            .map(|o| {
                (
                    instance.name(o).to_string(),
                    arr(instance.position(&instance.goal, o)),
                )
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

fn read(path: &Path) -> Result<String, ParseError> {
    fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_instance(path: &Path) -> Result<Instance, ParseError> {
    instance_from_json(&read(path)?)
}

pub fn save_instance(instance: &Instance, path: &Path) -> std::io::Result<()> {
    fs::write(path, instance_to_json(instance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Goal,
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub object: String,
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub kind: ActionKind,
    pub transit: Vec<[f64; 2]>,
    pub transfer: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub actions: Vec<ActionRecord>,
    pub buffers_used: usize,
    #[serde(default)]
    pub stats: Value,
}

impl SolutionFile {
    pub fn new(instance: &Instance, plan: &Plan, stats: Value) -> Self {
        SolutionFile {
            actions: plan
                .actions
                .iter()
                .map(|a| ActionRecord {
                    object: instance.name(a.object).to_string(),
                    from: arr(instance.point(a.object, a.from)),
                    to: arr(instance.point(a.object, a.to)),
                    kind: match a.kind {
                        EdgeKind::GoalMove => ActionKind::Goal,
                        EdgeKind::BufferMove => ActionKind::Buffer,
                    },
                    transit: a.transit.iter().map(|&p| arr(p)).collect(),
                    transfer: a.transfer.iter().map(|&p| arr(p)).collect(),
                })
                .collect(),
            buffers_used: plan.buffers_used(),
            stats,
        }
    }

    /// Interns the recorded coordinates against `instance`.
    pub fn to_plan(&self, instance: &Instance) -> Result<Plan, ParseError> {
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let o = instance.object_by_name(&a.object).ok_or_else(|| {
                    ParseError::Content(format!("action {i}: unknown object {:?}", a.object))
                })?;
                let place = |p: [f64; 2]| {
                    instance.locate(o, pt(p)).ok_or_else(|| {
                        ParseError::Content(format!(
                            "action {i}: ({}, {}) is not a position of {}",
                            p[0], p[1], a.object
                        ))
                    })
                };
                Ok(Action {
                    object: o,
                    from: place(a.from)?,
                    to: place(a.to)?,
                    kind: match a.kind {
                        ActionKind::Goal => EdgeKind::GoalMove,
                        ActionKind::Buffer => EdgeKind::BufferMove,
                    },
                    transit: a.transit.iter().map(|&p| pt(p)).collect(),
                    transfer: a.transfer.iter().map(|&p| pt(p)).collect(),
                })
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        Ok(Plan { actions })
    }
}

pub fn load_solution(path: &Path) -> Result<SolutionFile, ParseError> {
    Ok(serde_json::from_str(&read(path)?)?)
}

pub fn load_world(path: &Path) -> Result<WorldSpec, ParseError> {
    Ok(serde_json::from_str(&read(path)?)?)
}
