//! Document planning: order the grid into time frames of source-agreement
//! clusters linked by diachronic connectives, then realize the plan through
//! fixed templates. The plan document is self-contained: it carries the
//! rendered argument bindings each template needs.

use crate::grid::Grid;
use crate::message::MessageInstance;
use crate::spec_dsl::{PlannerMode, RelType, TopicSpec};
use crate::timestamp::Timestamp;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Consensus {
    AllSources,
    SomeSources,
    SingleSource,
    Conflicting,
}

/// A cluster member with everything realization needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanMessage {
    pub id: String,
    #[serde(rename = "type")]
    pub msg_type: String,
    pub source: String,
    pub ref_time: Timestamp,
    /// Argument name → surface rendering of the bound value.
    pub args: BTreeMap<String, String>,
}

impl PlanMessage {
    fn from_instance(m: &MessageInstance) -> Self {
        PlanMessage {
            id: m.id.clone(),
            msg_type: m.msg_type.clone(),
            source: m.source.clone(),
            ref_time: m.ref_time,
            args: m
                .bindings
                .iter()
                .map(|(k, v)| (k.clone(), v.surface().to_string()))
                .collect(),
        }
    }
}

/// Messages of one frame mutually connected by synchronic edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCluster {
    pub consensus: Consensus,
    pub messages: Vec<PlanMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFrame {
    pub ref_bucket: Timestamp,
    pub clusters: Vec<MessageCluster>,
}

/// A diachronic edge lifted to frame level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connective {
    pub from: usize,
    pub to: usize,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPlan {
    pub frames: Vec<PlanFrame>,
    pub connectives: Vec<Connective>,
}

/// Relation names of the disagreement family mark a cluster as conflicting.
fn is_disagreement(name: &str) -> bool {
    name.to_lowercase().starts_with("disagree")
}

/// Bucket the grid's messages into frames, cluster each frame by synchronic
/// connectivity, label clusters by source coverage, and lift diachronic
/// edges to deduplicated frame-level connectives.
pub fn build_document_plan(grid: &Grid, mode: PlannerMode) -> DocumentPlan {
    let frames_src = frames_for_mode(grid, mode);

    // Message id → frame index.
    let mut frame_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, (_, ids)) in frames_src.iter().enumerate() {
        for id in ids {
            frame_of.insert(id.as_str(), idx);
        }
    }

    // Intra-frame synchronic adjacency.
    let mut sync_adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut conflict_edges: BTreeSet<(&str, &str)> = BTreeSet::new();
    for r in grid.relations() {
        if r.rel_type != RelType::Synchronic {
            continue;
        }
        if frame_of.get(r.first.as_str()) != frame_of.get(r.second.as_str()) {
            continue; // a wide window can straddle linear buckets; clusters stay per-frame
        }
        sync_adj
            .entry(r.first.as_str())
            .or_default()
            .push(r.second.as_str());
        sync_adj
            .entry(r.second.as_str())
            .or_default()
            .push(r.first.as_str());
        if is_disagreement(&r.schema_name) {
            conflict_edges.insert((r.first.as_str(), r.second.as_str()));
        }
    }

    let mut frames = Vec::with_capacity(frames_src.len());
    for (bucket, ids) in &frames_src {
        let bucket_sources: BTreeSet<&str> = ids
            .iter()
            .filter_map(|id| grid.message(id))
            .map(|m| m.source.as_str())
            .collect();
        let mut clusters = Vec::new();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for id in ids {
            if seen.contains(id.as_str()) {
                continue;
            }
            // Connected component of synchronic edges around `id`.
            let mut members: Vec<&str> = Vec::new();
            let mut stack = vec![id.as_str()];
            while let Some(cur) = stack.pop() {
                if !seen.insert(cur) {
                    continue;
                }
                members.push(cur);
                if let Some(next) = sync_adj.get(cur) {
                    stack.extend(next.iter().copied());
                }
            }
            members.sort();
            let has_conflict = conflict_edges
                .iter()
                .any(|(a, b)| members.contains(a) && members.contains(b));
            let member_sources: BTreeSet<&str> = members
                .iter()
                .filter_map(|id| grid.message(id))
                .map(|m| m.source.as_str())
                .collect();
            let consensus = if has_conflict {
                Consensus::Conflicting
            } else if member_sources.len() == 1 {
                Consensus::SingleSource
            } else if member_sources.is_superset(&bucket_sources) {
                Consensus::AllSources
            } else {
                Consensus::SomeSources
            };
            let messages: Vec<PlanMessage> = members
                .iter()
                .filter_map(|id| grid.message(id))
                .map(PlanMessage::from_instance)
                .collect();
            clusters.push(MessageCluster {
                consensus,
                messages,
            });
        }
        clusters.sort_by(|a, b| {
            let ka = a.messages.first().map(|m| (&m.msg_type, &m.id));
            let kb = b.messages.first().map(|m| (&m.msg_type, &m.id));
            ka.cmp(&kb)
        });
        frames.push(PlanFrame {
            ref_bucket: *bucket,
            clusters,
        });
    }

    let mut connectives: Vec<Connective> = grid
        .relations()
        .iter()
        .filter(|r| r.rel_type == RelType::Diachronic)
        .filter_map(|r| {
            let from = *frame_of.get(r.first.as_str())?;
            let to = *frame_of.get(r.second.as_str())?;
            // Diachronic edges inside a single frame carry no ordering
            // information for the plan.
            (from < to).then(|| Connective {
                from,
                to,
                relation: r.schema_name.clone(),
            })
        })
        .collect();
    connectives.sort();
    connectives.dedup();

    DocumentPlan {
        frames,
        connectives,
    }
}

fn frames_for_mode(grid: &Grid, mode: PlannerMode) -> Vec<(Timestamp, Vec<String>)> {
    grid.frames_with_mode(mode)
        .into_iter()
        .map(|f| (f.start, f.message_ids))
        .collect()
}

// ──────────────────────────────────────────────
// Template realization
// ──────────────────────────────────────────────

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RealizeError {
    #[error("missing template for message type {0}")]
    MissingTemplate(String),
    #[error("template pack line {line}: {msg}")]
    BadPack { line: usize, msg: String },
}

/// Fixed sentence templates per message type, connective phrases per
/// relation name, and the consensus lead-in phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePack {
    pub msg_templates: BTreeMap<String, String>,
    pub connectives: BTreeMap<String, String>,
    pub all_sources: String,
    pub some_sources: String,
    pub single_source: String,
    pub conflicting: String,
}

impl Default for TemplatePack {
    fn default() -> Self {
        TemplatePack {
            msg_templates: BTreeMap::new(),
            connectives: BTreeMap::new(),
            all_sources: "According to all sources".into(),
            some_sources: "According to several sources".into(),
            single_source: "According to source {source}".into(),
            conflicting: "The sources disagree".into(),
        }
    }
}

impl TemplatePack {
    /// Parse the keyed text format:
    /// `msg <type> = <template>`, `rel <relation> = <phrase>`,
    /// `phrase all_sources|some_sources|single_source|conflicting = <text>`.
    pub fn parse(text: &str) -> Result<Self, RealizeError> {
        let mut pack = TemplatePack::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, body) = line.split_once('=').ok_or_else(|| RealizeError::BadPack {
                line: idx + 1,
                msg: "expected `<kind> <key> = <text>`".into(),
            })?;
            let body = body.trim().to_string();
            let mut head_parts = head.split_whitespace();
            let kind = head_parts.next().unwrap_or_default();
            let key = head_parts.next().unwrap_or_default().to_string();
            if key.is_empty() || head_parts.next().is_some() {
                return Err(RealizeError::BadPack {
                    line: idx + 1,
                    msg: "expected exactly one key before `=`".into(),
                });
            }
            match kind {
                "msg" => {
                    pack.msg_templates.insert(key, body);
                }
                "rel" => {
                    pack.connectives.insert(key, body);
                }
                "phrase" => match key.as_str() {
                    "all_sources" => pack.all_sources = body,
                    "some_sources" => pack.some_sources = body,
                    "single_source" => pack.single_source = body,
                    "conflicting" => pack.conflicting = body,
                    other => {
                        return Err(RealizeError::BadPack {
                            line: idx + 1,
                            msg: format!("unknown phrase key {other}"),
                        });
                    }
                },
                other => {
                    return Err(RealizeError::BadPack {
                        line: idx + 1,
                        msg: format!("unknown entry kind {other}"),
                    });
                }
            }
        }
        Ok(pack)
    }

    /// Every `{slot}` must name an argument of its message schema.
    pub fn validate(&self, spec: &TopicSpec) -> Vec<crate::diag::Diagnostic> {
        let mut diags = Vec::new();
        for (msg_type, template) in &self.msg_templates {
            let Some(schema) = spec.schema(msg_type) else {
                diags.push(crate::diag::Diagnostic::error(format!(
                    "template for unknown message type {msg_type}"
                )));
                continue;
            };
            for slot in slots(template) {
                if schema.arg(&slot).is_none() {
                    diags.push(crate::diag::Diagnostic::error(format!(
                        "template {msg_type}: unknown slot {{{slot}}}"
                    )));
                }
            }
        }
        diags
    }
}

fn slots(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        out.push(rest[open + 1..open + close].to_string());
        rest = &rest[open + close + 1..];
    }
    out
}

fn fill(template: &str, args: &BTreeMap<String, String>) -> String {
    let mut out = template.to_string();
    for (k, v) in args {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Realize a plan: one sentence group per frame in order, each cluster led
/// by its consensus phrase, incoming connective phrases first. Conflicting
/// clusters realize every member prefixed by its source; other clusters
/// realize their first member as the representative.
pub fn realize(plan: &DocumentPlan, templates: &TemplatePack) -> Result<String, RealizeError> {
    for frame in &plan.frames {
        for cluster in &frame.clusters {
            for m in &cluster.messages {
                if !templates.msg_templates.contains_key(&m.msg_type) {
                    return Err(RealizeError::MissingTemplate(m.msg_type.clone()));
                }
            }
        }
    }

    let mut lines = Vec::new();
    for (idx, frame) in plan.frames.iter().enumerate() {
        let mut parts: Vec<String> = Vec::new();
        for conn in plan.connectives.iter().filter(|c| c.to == idx) {
            let phrase = templates
                .connectives
                .get(&conn.relation)
                .cloned()
                .unwrap_or_else(|| format!("then ({})", conn.relation));
            let phrase = capitalize(&phrase);
            // several incoming edges may share a relation; say it once
            if !parts.contains(&phrase) {
                parts.push(phrase);
            }
        }
        for cluster in &frame.clusters {
            // externally loaded plans may carry empty clusters; nothing to say
            let Some(first_member) = cluster.messages.first() else {
                continue;
            };
            let time = frame.ref_bucket.render_clock();
            match cluster.consensus {
                Consensus::Conflicting => {
                    let mut variants = Vec::new();
                    for m in &cluster.messages {
                        let body = fill(&templates.msg_templates[&m.msg_type], &m.args);
                        variants.push(format!("source {} reports that {}", m.source, body));
                    }
                    parts.push(format!(
                        "{}: at {}, {}.",
                        templates.conflicting,
                        time,
                        variants.join("; whereas ")
                    ));
                }
                _ => {
                    let rep = first_member;
                    let prefix = match cluster.consensus {
                        Consensus::AllSources => templates.all_sources.clone(),
                        Consensus::SomeSources => templates.some_sources.clone(),
                        Consensus::SingleSource => {
                            templates.single_source.replace("{source}", &rep.source)
                        }
                        Consensus::Conflicting => unreachable!(),
                    };
                    let body = fill(&templates.msg_templates[&rep.msg_type], &rep.args);
                    parts.push(format!("{prefix}, at {time}, {body}."));
                }
            }
        }
        if !parts.is_empty() {
            lines.push(parts.join(" "));
        }
    }
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    Ok(text)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

pub fn serialize_plan(plan: &DocumentPlan) -> String {
    let mut out = serde_json::to_string_pretty(plan).expect("plan serialization cannot fail");
    out.push('\n');
    out
}

pub fn deserialize_plan(text: &str) -> Result<DocumentPlan, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}
