//! The grid: the message/relation graph that is the system's central
//! artifact. Grids are immutable values; extension produces a new grid that
//! is observationally identical to a batch rebuild.

use crate::message::{BoundValue, MessageInstance};
use crate::relations::{extract_relations, extract_relations_touching, RelationInstance};
use crate::spec_dsl::{PlannerMode, RelType, TopicSpec};
use crate::timestamp::Timestamp;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("duplicate message id {0}")]
    DuplicateId(String),
    #[error("message id {0} already present in the grid")]
    IdCollision(String),
    #[error("malformed grid document: {0}")]
    Malformed(String),
    #[error("relation {schema} references missing message {id}")]
    DanglingEndpoint { schema: String, id: String },
    #[error("synchronic relation {schema} joins two messages of source {shared}")]
    SynchronicSameSource { schema: String, shared: String },
    #[error("diachronic relation {schema} from {first} to {second} does not advance in time")]
    DiachronicOrder {
        schema: String,
        first: String,
        second: String,
    },
    #[error("diachronic subgraph contains a cycle")]
    DiachronicCycle,
}

/// Grid-level topic header: the name plus the bucketing parameters needed to
/// keep the document-plan pipeline self-contained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridTopic {
    pub name: String,
    pub planner_mode: PlannerMode,
    pub time_unit_minutes: u32,
    pub sync_window_minutes: u32,
}

impl GridTopic {
    pub fn from_spec(spec: &TopicSpec) -> Self {
        GridTopic {
            name: spec.name.clone(),
            planner_mode: spec.config.planner_mode,
            time_unit_minutes: spec.config.time_unit_minutes,
            sync_window_minutes: spec.config.sync_window_minutes,
        }
    }
}

/// One time frame: the quantum within which messages are considered
/// simultaneous. Linear topics bucket by `floor(ref_time / time_unit)`;
/// non-linear topics merge overlapping windows around reference times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeFrame {
    pub start: Timestamp,
    pub message_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub topic: GridTopic,
    messages: BTreeMap<String, MessageInstance>,
    relations: Vec<RelationInstance>,
    by_source: BTreeMap<String, Vec<String>>,
    by_type: BTreeMap<String, Vec<String>>,
    frames: Vec<TimeFrame>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.topic == other.topic
            && self.messages == other.messages
            && self.relations == other.relations
    }
}

impl Eq for Grid {}

impl Grid {
    pub fn messages(&self) -> impl Iterator<Item = &MessageInstance> {
        self.messages.values()
    }

    pub fn message(&self, id: &str) -> Option<&MessageInstance> {
        self.messages.get(id)
    }

    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn relations(&self) -> &[RelationInstance] {
        &self.relations
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.by_source.keys().map(|s| s.as_str())
    }

    pub fn ids_by_source(&self, source: &str) -> &[String] {
        self.by_source.get(source).map_or(&[], |v| v.as_slice())
    }

    pub fn ids_by_type(&self, msg_type: &str) -> &[String] {
        self.by_type.get(msg_type).map_or(&[], |v| v.as_slice())
    }

    pub fn frames(&self) -> &[TimeFrame] {
        &self.frames
    }

    /// Frames re-bucketed under a different planner mode, keeping the grid's
    /// own time unit and window.
    pub fn frames_with_mode(&self, mode: PlannerMode) -> Vec<TimeFrame> {
        if mode == self.topic.planner_mode {
            return self.frames.clone();
        }
        let mut topic = self.topic.clone();
        topic.planner_mode = mode;
        bucket_frames(&topic, &self.messages)
    }
}

// ──────────────────────────────────────────────
// Construction
// ──────────────────────────────────────────────

/// Build a grid from validated messages: relations are extracted with the
/// spec's gating configuration, indexes are computed, and the structural
/// invariants are checked.
pub fn build_grid(msgs: &[MessageInstance], spec: &TopicSpec) -> Result<Grid, GridError> {
    let mut map = BTreeMap::new();
    for m in msgs {
        if map.insert(m.id.clone(), m.clone()).is_some() {
            return Err(GridError::DuplicateId(m.id.clone()));
        }
    }
    let ordered: Vec<MessageInstance> = map.values().cloned().collect();
    let relations = extract_relations(&ordered, spec);
    assemble(GridTopic::from_spec(spec), map, relations)
}

/// Extend a grid with new messages. Existing edges are kept; only pairs
/// involving at least one new message are evaluated, which is
/// observationally identical to rebuilding from the union.
pub fn extend_grid(
    grid: &Grid,
    new_msgs: &[MessageInstance],
    spec: &TopicSpec,
) -> Result<Grid, GridError> {
    let mut map = grid.messages.clone();
    let mut fresh: BTreeSet<String> = BTreeSet::new();
    for m in new_msgs {
        if map.insert(m.id.clone(), m.clone()).is_some() {
            return Err(GridError::IdCollision(m.id.clone()));
        }
        fresh.insert(m.id.clone());
    }
    let ordered: Vec<MessageInstance> = map.values().cloned().collect();
    let mut relations = extract_relations_touching(&ordered, spec, Some(&fresh));
    relations.extend(grid.relations.iter().cloned());
    relations.sort();
    relations.dedup();
    assemble(GridTopic::from_spec(spec), map, relations)
}

fn assemble(
    topic: GridTopic,
    messages: BTreeMap<String, MessageInstance>,
    relations: Vec<RelationInstance>,
) -> Result<Grid, GridError> {
    check_invariants(&messages, &relations)?;
    let mut by_source: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut by_type: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for m in messages.values() {
        by_source
            .entry(m.source.clone())
            .or_default()
            .push(m.id.clone());
        by_type
            .entry(m.msg_type.clone())
            .or_default()
            .push(m.id.clone());
    }
    let frames = bucket_frames(&topic, &messages);
    Ok(Grid {
        topic,
        messages,
        relations,
        by_source,
        by_type,
        frames,
    })
}

fn check_invariants(
    messages: &BTreeMap<String, MessageInstance>,
    relations: &[RelationInstance],
) -> Result<(), GridError> {
    for r in relations {
        let first = messages
            .get(&r.first)
            .ok_or_else(|| GridError::DanglingEndpoint {
                schema: r.schema_name.clone(),
                id: r.first.clone(),
            })?;
        let second = messages
            .get(&r.second)
            .ok_or_else(|| GridError::DanglingEndpoint {
                schema: r.schema_name.clone(),
                id: r.second.clone(),
            })?;
        match r.rel_type {
            RelType::Synchronic => {
                if first.source == second.source {
                    return Err(GridError::SynchronicSameSource {
                        schema: r.schema_name.clone(),
                        shared: first.source.clone(),
                    });
                }
            }
            RelType::Diachronic => {
                if first.ref_time >= second.ref_time {
                    return Err(GridError::DiachronicOrder {
                        schema: r.schema_name.clone(),
                        first: r.first.clone(),
                        second: r.second.clone(),
                    });
                }
            }
        }
    }
    diachronic_toposort(messages, relations).map(|_| ())
}

/// Kahn's algorithm over the diachronic edge subgraph. Strictly increasing
/// reference times already imply acyclicity; this check guards documents
/// assembled outside `build_grid`.
fn diachronic_toposort(
    messages: &BTreeMap<String, MessageInstance>,
    relations: &[RelationInstance],
) -> Result<Vec<String>, GridError> {
    let mut indegree: BTreeMap<&str, usize> = messages.keys().map(|id| (id.as_str(), 0)).collect();
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in relations
        .iter()
        .filter(|r| r.rel_type == RelType::Diachronic)
    {
        succ.entry(r.first.as_str())
            .or_default()
            .push(r.second.as_str());
        *indegree.entry(r.second.as_str()).or_default() += 1;
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(messages.len());
    while let Some(id) = ready.pop() {
        order.push(id.to_string());
        for &next in succ.get(id).map_or(&[][..], |v| v.as_slice()) {
            let d = indegree.get_mut(next).expect("endpoint exists");
            *d -= 1;
            if *d == 0 {
                ready.push(next);
            }
        }
    }
    if order.len() != messages.len() {
        return Err(GridError::DiachronicCycle);
    }
    Ok(order)
}

fn bucket_frames(
    topic: &GridTopic,
    messages: &BTreeMap<String, MessageInstance>,
) -> Vec<TimeFrame> {
    let mut frames: Vec<TimeFrame> = Vec::new();
    match topic.planner_mode {
        PlannerMode::Linear => {
            let unit = topic.time_unit_minutes.max(1) as i64;
            let mut buckets: BTreeMap<i64, Vec<String>> = BTreeMap::new();
            for m in messages.values() {
                buckets
                    .entry(m.ref_time.minutes().div_euclid(unit))
                    .or_default()
                    .push(m.id.clone());
            }
            for (key, ids) in buckets {
                frames.push(TimeFrame {
                    start: Timestamp::from_minutes(key * unit),
                    message_ids: ids,
                });
            }
        }
        PlannerMode::NonLinear => {
            // Merge the windows [t - w, t + w] around reference times; two
            // messages share a frame when their windows properly overlap
            // (equal reference times always share one).
            let w = topic.sync_window_minutes as i64;
            let mut ordered: Vec<&MessageInstance> = messages.values().collect();
            ordered.sort_by_key(|m| (m.ref_time, m.id.clone()));
            for m in ordered {
                if let Some(frame) = frames.last_mut() {
                    let last_ref = frame
                        .message_ids
                        .last()
                        .and_then(|id| messages.get(id))
                        .map(|p| p.ref_time.minutes())
                        .expect("frame is nonempty");
                    let gap = m.ref_time.minutes() - last_ref;
                    if gap == 0 || gap < 2 * w {
                        frame.message_ids.push(m.id.clone());
                        continue;
                    }
                }
                frames.push(TimeFrame {
                    start: m.ref_time,
                    message_ids: vec![m.id.clone()],
                });
            }
        }
    }
    frames
}

// ──────────────────────────────────────────────
// Sub-grid queries
// ──────────────────────────────────────────────

/// Conjunctive message filters; an empty query is the universal query.
/// Within one filter any listed value matches; entity filters match any
/// binding of the message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridQuery {
    pub entities: BTreeSet<String>,
    pub msg_types: BTreeSet<String>,
    pub sources: BTreeSet<String>,
    pub ref_interval: Option<(Timestamp, Timestamp)>,
}

impl GridQuery {
    pub fn universal() -> Self {
        GridQuery::default()
    }

    pub fn is_universal(&self) -> bool {
        self.entities.is_empty()
            && self.msg_types.is_empty()
            && self.sources.is_empty()
            && self.ref_interval.is_none()
    }

    fn matches(&self, m: &MessageInstance) -> bool {
        if !self.entities.is_empty() {
            let hit = m.bindings.values().any(|v| match v {
                BoundValue::Entity(id) => self.entities.contains(id),
                _ => false,
            });
            if !hit {
                return false;
            }
        }
        if !self.msg_types.is_empty() && !self.msg_types.contains(&m.msg_type) {
            return false;
        }
        if !self.sources.is_empty() && !self.sources.contains(&m.source) {
            return false;
        }
        if let Some((lo, hi)) = self.ref_interval {
            if m.ref_time < lo || m.ref_time > hi {
                return false;
            }
        }
        true
    }
}

/// Messages satisfying all set filters plus exactly the relations whose both
/// endpoints survive.
pub fn query_subgrid(grid: &Grid, query: &GridQuery) -> Grid {
    let messages: BTreeMap<String, MessageInstance> = grid
        .messages
        .iter()
        .filter(|(_, m)| query.matches(m))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let relations: Vec<RelationInstance> = grid
        .relations
        .iter()
        .filter(|r| messages.contains_key(&r.first) && messages.contains_key(&r.second))
        .cloned()
        .collect();
    assemble(grid.topic.clone(), messages, relations).expect("filtering preserves grid invariants")
}

// ──────────────────────────────────────────────
// Serialization
// ──────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct GridDoc {
    topic: GridTopic,
    messages: Vec<MessageInstance>,
    relations: Vec<RelationInstance>,
}

/// Canonical JSON rendering: messages sorted by id, relations sorted by
/// (schema, first, second), fixed key order. Equal grids serialize to
/// byte-identical documents.
pub fn serialize_grid(grid: &Grid) -> String {
    let doc = GridDoc {
        topic: grid.topic.clone(),
        messages: grid.messages.values().cloned().collect(),
        relations: grid.relations.clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("grid serialization cannot fail");
    out.push('\n');
    out
}

/// Parse and re-validate a grid document; every structural invariant of the
/// grid is enforced on the way in.
pub fn deserialize_grid(text: &str) -> Result<Grid, GridError> {
    let doc: GridDoc =
        serde_json::from_str(text).map_err(|e| GridError::Malformed(e.to_string()))?;
    let mut messages = BTreeMap::new();
    for m in doc.messages {
        let id = m.id.clone();
        if messages.insert(id.clone(), m).is_some() {
            return Err(GridError::DuplicateId(id));
        }
    }
    let mut relations = doc.relations;
    relations.sort();
    relations.dedup();
    assemble(doc.topic, messages, relations)
}
