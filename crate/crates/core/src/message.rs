//! Message instances: typed action records with argument bindings, a source
//! tag and bitemporal stamps (publication and reference time).

use crate::diag::Diagnostic;
use crate::spec_dsl::{TopicSpec, MESSAGE_TYPE_LITERAL};
use crate::timestamp::{Timestamp, MINUTES_PER_DAY};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// One argument binding. Entities are canonical ids resolved through the
/// ontology instance map; message-type-valued arguments carry a schema name;
/// scaled literals carry a value on a concept's ordered scale.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundValue {
    Entity(String),
    #[serde(rename = "msgtype")]
    MsgType(String),
    Scaled {
        concept: String,
        value: String,
    },
}

impl BoundValue {
    /// Surface rendering used by the template realizer.
    pub fn surface(&self) -> &str {
        match self {
            BoundValue::Entity(id) => id,
            BoundValue::MsgType(name) => name,
            BoundValue::Scaled { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageInstance {
    pub id: String,
    #[serde(rename = "type")]
    pub msg_type: String,
    pub bindings: BTreeMap<String, BoundValue>,
    pub source: String,
    pub pub_time: Timestamp,
    pub ref_time: Timestamp,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<u32>,
}

/// Structured temporal annotation altering a message's reference time
/// relative to its publication time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalExpression {
    #[default]
    None,
    DayOffset {
        days: i64,
    },
    MinuteOffset {
        minutes: i64,
    },
    ClockSet {
        hour: u8,
        minute: u8,
        #[serde(default)]
        day_offset: i64,
    },
}

impl TemporalExpression {
    pub fn is_well_formed(&self) -> bool {
        match self {
            TemporalExpression::ClockSet { hour, minute, .. } => *hour <= 23 && *minute <= 59,
            _ => true,
        }
    }
}

/// Resolve a reference time from the publication time and a temporal
/// annotation. Without an annotation the reference time is the publication
/// time.
pub fn normalize_ref_time(pub_time: Timestamp, expr: &TemporalExpression) -> Timestamp {
    match *expr {
        TemporalExpression::None => pub_time,
        TemporalExpression::DayOffset { days } => pub_time.plus_minutes(days * MINUTES_PER_DAY),
        TemporalExpression::MinuteOffset { minutes } => pub_time.plus_minutes(minutes),
        TemporalExpression::ClockSet {
            hour,
            minute,
            day_offset,
        } => pub_time
            .day_start()
            .plus_minutes(day_offset * MINUTES_PER_DAY + hour as i64 * 60 + minute as i64),
    }
}

/// Check a message against its schema: the type must be declared, bindings
/// must cover exactly the schema arguments, and every bound value must
/// satisfy the argument's allowed concepts (hierarchy-aware).
pub fn validate_message(m: &MessageInstance, spec: &TopicSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let Some(schema) = spec.schema(&m.msg_type) else {
        diags.push(Diagnostic::error(format!(
            "unknown message type {}",
            m.msg_type
        )));
        return diags;
    };
    for arg in &schema.args {
        match m.bindings.get(&arg.name) {
            None => diags.push(Diagnostic::error(format!("unbound arg {}", arg.name))),
            Some(value) => {
                if let Some(msg) = binding_violation(spec, &m.msg_type, &arg.name, value) {
                    diags.push(Diagnostic::error(msg));
                }
            }
        }
    }
    for bound in m.bindings.keys() {
        if schema.arg(bound).is_none() {
            diags.push(Diagnostic::error(format!(
                "message {} has no argument {bound}",
                m.msg_type
            )));
        }
    }
    diags
}

fn binding_violation(
    spec: &TopicSpec,
    msg_type: &str,
    arg_name: &str,
    value: &BoundValue,
) -> Option<String> {
    let schema = spec.schema(msg_type)?;
    let arg = schema.arg(arg_name)?;
    match value {
        BoundValue::Entity(id) => {
            let Some(concept) = spec.ontology.concept_of_entity(id) else {
                return Some(format!("unknown entity {id:?}"));
            };
            if satisfies(spec, concept, &arg.allowed) {
                None
            } else {
                Some(format!(
                    "entity {id:?} ({concept}) not allowed for {msg_type}.{arg_name}"
                ))
            }
        }
        BoundValue::MsgType(name) => {
            if !arg.allowed.contains(MESSAGE_TYPE_LITERAL) {
                Some(format!(
                    "{msg_type}.{arg_name} does not accept message-type values"
                ))
            } else if spec.schema(name).is_none() {
                Some(format!("unknown message type {name}"))
            } else {
                None
            }
        }
        BoundValue::Scaled { concept, value } => {
            if !satisfies(spec, concept, &arg.allowed) {
                return Some(format!(
                    "scaled value on {concept} not allowed for {msg_type}.{arg_name}"
                ));
            }
            match spec.ontology.ordered_scales.get(concept) {
                Some(scale) if !scale.contains(value) => {
                    Some(format!("value {value:?} is not on the {concept} scale"))
                }
                _ => None,
            }
        }
    }
}

fn satisfies(
    spec: &TopicSpec,
    concept: &str,
    allowed: &std::collections::BTreeSet<String>,
) -> bool {
    allowed.iter().any(|a| spec.ontology.is_a(concept, a))
}

// ──────────────────────────────────────────────
// Report-stream ingestion
// ──────────────────────────────────────────────

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct StreamError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Deserialize)]
struct DocRecord {
    doc_id: String,
    source: String,
    pub_time: Timestamp,
    messages: Vec<MsgRecord>,
}

#[derive(Debug, Deserialize)]
struct MsgRecord {
    id: String,
    #[serde(rename = "type")]
    msg_type: String,
    #[serde(default)]
    bindings: BTreeMap<String, BoundValue>,
    #[serde(default)]
    temporal: TemporalExpression,
    #[serde(default)]
    sentence: Option<u32>,
}

/// Parse a report stream (one JSON document record per line) into validated
/// message instances. Reference times are normalized from each record's
/// temporal annotation. The first failing record rejects the whole stream.
pub fn parse_message_stream(
    text: &str,
    spec: &TopicSpec,
) -> Result<Vec<MessageInstance>, StreamError> {
    let mut out = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: DocRecord = serde_json::from_str(trimmed).map_err(|e| StreamError {
            line,
            msg: e.to_string(),
        })?;
        for msg in record.messages {
            if !msg.temporal.is_well_formed() {
                return Err(StreamError {
                    line,
                    msg: format!("message {}: malformed temporal expression", msg.id),
                });
            }
            let instance = MessageInstance {
                id: msg.id,
                msg_type: msg.msg_type,
                bindings: msg.bindings,
                source: record.source.clone(),
                pub_time: record.pub_time,
                ref_time: normalize_ref_time(record.pub_time, &msg.temporal),
                doc_id: record.doc_id.clone(),
                sentence: msg.sentence,
            };
            let diags = validate_message(&instance, spec);
            if let Some(first) = diags.first() {
                return Err(StreamError {
                    line,
                    msg: format!("message {}: {}", instance.id, first.message),
                });
            }
            out.push(instance);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_dsl::parse_topic_spec;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    #[test]
    fn yesterday_shifts_one_day_back() {
        let got = normalize_ref_time(
            ts("200602120000"),
            &TemporalExpression::DayOffset { days: -1 },
        );
        assert_eq!(got, ts("200602110000"));
    }

    #[test]
    fn an_hour_ago_shifts_sixty_minutes() {
        let got = normalize_ref_time(
            ts("199907151900"),
            &TemporalExpression::MinuteOffset { minutes: -60 },
        );
        assert_eq!(got, ts("199907151800"));
    }

    #[test]
    fn clock_set_replaces_the_clock() {
        let got = normalize_ref_time(
            ts("199907151700"),
            &TemporalExpression::ClockSet {
                hour: 12,
                minute: 0,
                day_offset: 0,
            },
        );
        assert_eq!(got, ts("199907151200"));
    }

    fn hijack_spec() -> TopicSpec {
        parse_topic_spec(
            r#"
            ONTOLOGY {
                CONCEPT Vehicle
                CONCEPT Airplane < Vehicle
                CONCEPT Location
                CONCEPT Person
                CONCEPT Place
                CONCEPT Bus < Vehicle
                INSTANCE "Boeing 747" : Airplane
                INSTANCE "airport of Stanstend" : Location
                INSTANCE "hijackers" : Person
                INSTANCE "children" : Person
                INSTANCE "bus" : Bus
            }
            MESSAGES {
                MESSAGE arrive (what: Vehicle, place: Location)
                MESSAGE free (who: Person, whom: Person, from: Place | Vehicle)
            }
        "#,
        )
        .unwrap()
    }

    fn boeing_arrive() -> MessageInstance {
        MessageInstance {
            id: "m".into(),
            msg_type: "arrive".into(),
            bindings: BTreeMap::from([
                (
                    "what".to_string(),
                    BoundValue::Entity("Boeing 747".to_string()),
                ),
                (
                    "place".to_string(),
                    BoundValue::Entity("airport of Stanstend".to_string()),
                ),
            ]),
            source: "A".into(),
            pub_time: ts("200602120000"),
            ref_time: ts("200602110000"),
            doc_id: "d1".into(),
            sentence: None,
        }
    }

    #[test]
    fn subconcept_binding_satisfies_the_schema() {
        assert_eq!(validate_message(&boeing_arrive(), &hijack_spec()), vec![]);
    }

    #[test]
    fn missing_binding_is_reported_by_name() {
        let mut m = boeing_arrive();
        m.bindings.remove("place");
        let diags = validate_message(&m, &hijack_spec());
        assert!(diags.iter().any(|d| d.message == "unbound arg place"));
    }

    #[test]
    fn union_typed_argument_accepts_either_branch() {
        let m = MessageInstance {
            id: "m3".into(),
            msg_type: "free".into(),
            bindings: BTreeMap::from([
                (
                    "who".to_string(),
                    BoundValue::Entity("hijackers".to_string()),
                ),
                (
                    "whom".to_string(),
                    BoundValue::Entity("children".to_string()),
                ),
                ("from".to_string(), BoundValue::Entity("bus".to_string())),
            ]),
            source: "A".into(),
            pub_time: ts("199907151800"),
            ref_time: ts("199907151800"),
            doc_id: "d".into(),
            sentence: None,
        };
        assert_eq!(validate_message(&m, &hijack_spec()), vec![]);
    }

    #[test]
    fn stream_record_normalizes_reference_time() {
        let line = r#"{"doc_id":"d1","source":"A","pub_time":"200602120000","messages":[{"id":"m1","type":"arrive","bindings":{"what":{"entity":"Boeing 747"},"place":{"entity":"airport of Stanstend"}},"temporal":{"kind":"day_offset","days":-1}}]}"#;
        let msgs = parse_message_stream(line, &hijack_spec()).unwrap();
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].ref_time, ts("200602110000"));
        assert_eq!(msgs[0].pub_time, ts("200602120000"));
    }

    #[test]
    fn empty_stream_is_empty() {
        assert_eq!(parse_message_stream("", &hijack_spec()).unwrap(), vec![]);
    }

    #[test]
    fn future_reference_times_are_permitted() {
        // "the plane will arrive tomorrow": ref_time after pub_time
        let line = r#"{"doc_id":"d1","source":"A","pub_time":"200602120000","messages":[{"id":"m1","type":"arrive","bindings":{"what":{"entity":"Boeing 747"},"place":{"entity":"airport of Stanstend"}},"temporal":{"kind":"day_offset","days":1}}]}"#;
        let msgs = parse_message_stream(line, &hijack_spec()).unwrap();
        assert!(msgs[0].ref_time > msgs[0].pub_time);
    }

    #[test]
    fn unknown_message_type_rejects_the_stream() {
        let line = r#"{"doc_id":"d1","source":"A","pub_time":"200602120000","messages":[{"id":"m1","type":"fly","bindings":{}}]}"#;
        let err = parse_message_stream(line, &hijack_spec()).unwrap_err();
        assert!(err.msg.contains("unknown message type fly"), "got {err}");
        assert_eq!(err.line, 1);
    }
}
