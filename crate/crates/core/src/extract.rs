//! Deterministic message extraction from tokenized documents: gazetteer
//! entity recognition (longest match), trigger-lexicon sentence typing
//! (first trigger wins) and vicinity-based argument filling over a window
//! of two sentences before and after the focus sentence.

use crate::diag::Diagnostic;
use crate::message::{normalize_ref_time, BoundValue, MessageInstance, TemporalExpression};
use crate::spec_dsl::{TopicSpec, MESSAGE_TYPE_LITERAL};
use crate::timestamp::Timestamp;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const DEFAULT_WINDOW: usize = 2;

// ──────────────────────────────────────────────
// Resources
// ──────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    /// Lowercased surface tokens.
    pub surface: Vec<String>,
    pub entity: String,
    pub concept: String,
}

/// Surface-form → canonical-entity lookup. Matching is case-insensitive over
/// token sequences; at each position the longest entry wins and matches do
/// not overlap.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    pub entries: Vec<GazetteerEntry>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ResourceError {
    pub line: usize,
    pub msg: String,
}

impl Gazetteer {
    pub fn add(&mut self, surface: &str, entity: &str, concept: &str) {
        self.entries.push(GazetteerEntry {
            surface: surface
                .split_whitespace()
                .map(|t| t.to_lowercase())
                .collect(),
            entity: entity.to_string(),
            concept: concept.to_string(),
        });
    }

    /// Parse the tab-separated `surface \t entity-id \t concept` format.
    /// `#` lines and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, ResourceError> {
        let mut gaz = Gazetteer::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(|c| c.trim()).collect();
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(ResourceError {
                    line: idx + 1,
                    msg: "expected surface<TAB>entity<TAB>concept".into(),
                });
            }
            gaz.add(cols[0], cols[1], cols[2]);
        }
        Ok(gaz)
    }

    /// Canonical ids must resolve in the ontology instance map.
    pub fn validate(&self, spec: &TopicSpec) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for e in &self.entries {
            if spec.ontology.concept_of_entity(&e.entity).is_none() {
                diags.push(Diagnostic::error(format!(
                    "gazetteer entity {:?} is not an ontology instance",
                    e.entity
                )));
            }
            if e.surface.is_empty() {
                diags.push(Diagnostic::error(format!(
                    "gazetteer entry for {:?} has an empty surface form",
                    e.entity
                )));
            }
        }
        diags
    }
}

/// Cue-token → message-type lookup used for sentence classification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TriggerLexicon {
    entries: std::collections::BTreeMap<String, String>,
}

impl TriggerLexicon {
    pub fn add(&mut self, trigger: &str, msg_type: &str) {
        self.entries
            .insert(trigger.to_lowercase(), msg_type.to_string());
    }

    pub fn lookup(&self, token: &str) -> Option<&str> {
        self.entries.get(&token.to_lowercase()).map(|s| s.as_str())
    }

    /// Parse the tab-separated `trigger \t message-type` format.
    pub fn parse(text: &str) -> Result<Self, ResourceError> {
        let mut lex = TriggerLexicon::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(|c| c.trim()).collect();
            if cols.len() != 2 || cols.iter().any(|c| c.is_empty()) {
                return Err(ResourceError {
                    line: idx + 1,
                    msg: "expected trigger<TAB>message-type".into(),
                });
            }
            lex.add(cols[0], cols[1]);
        }
        Ok(lex)
    }

    pub fn validate(&self, spec: &TopicSpec) -> Vec<Diagnostic> {
        self.entries
            .iter()
            .filter(|(_, t)| spec.schema(t).is_none())
            .map(|(trigger, t)| {
                Diagnostic::error(format!("trigger {trigger:?}: unknown message type {t}"))
            })
            .collect()
    }
}

// ──────────────────────────────────────────────
// Documents
// ──────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "is_default_temporal")]
    pub temporal: TemporalExpression,
}

fn is_default_temporal(t: &TemporalExpression) -> bool {
    *t == TemporalExpression::None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source: String,
    pub pub_time: Timestamp,
    pub sentences: Vec<Sentence>,
}

/// Parse tokenized documents, one JSON object per line.
pub fn parse_documents(text: &str) -> Result<Vec<Document>, ResourceError> {
    let mut docs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| ResourceError {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if doc.sentences.iter().any(|s| s.tokens.is_empty()) {
            return Err(ResourceError {
                line: idx + 1,
                msg: format!("document {}: empty sentence", doc.doc_id),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

// ──────────────────────────────────────────────
// Recognition
// ──────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub sentence: usize,
    pub start: usize,
    pub len: usize,
    pub entity: String,
    pub concept: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerMention {
    pub sentence: usize,
    pub token: usize,
    pub msg_type: String,
}

/// Scan every sentence left to right; at each position the longest matching
/// gazetteer entry wins and consumes its span, so spans never overlap.
pub fn recognize_entities(doc: &Document, gaz: &Gazetteer) -> Vec<EntityMention> {
    let mut mentions = Vec::new();
    for (s_idx, sentence) in doc.sentences.iter().enumerate() {
        let lowered: Vec<String> = sentence.tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut i = 0;
        while i < lowered.len() {
            let mut best: Option<&GazetteerEntry> = None;
            for entry in &gaz.entries {
                let n = entry.surface.len();
                if n == 0 || i + n > lowered.len() {
                    continue;
                }
                if lowered[i..i + n] == entry.surface[..]
                    && best.is_none_or(|b| n > b.surface.len())
                {
                    best = Some(entry);
                }
            }
            match best {
                Some(entry) => {
                    mentions.push(EntityMention {
                        sentence: s_idx,
                        start: i,
                        len: entry.surface.len(),
                        entity: entry.entity.clone(),
                        concept: entry.concept.clone(),
                    });
                    i += entry.surface.len();
                }
                None => i += 1,
            }
        }
    }
    mentions
}

/// Every token that fires a trigger, in document order.
pub fn recognize_triggers(doc: &Document, lex: &TriggerLexicon) -> Vec<TriggerMention> {
    let mut out = Vec::new();
    for (s_idx, sentence) in doc.sentences.iter().enumerate() {
        for (t_idx, token) in sentence.tokens.iter().enumerate() {
            if let Some(msg_type) = lex.lookup(token) {
                out.push(TriggerMention {
                    sentence: s_idx,
                    token: t_idx,
                    msg_type: msg_type.to_string(),
                });
            }
        }
    }
    out
}

/// The type of the first trigger token, or None when no trigger fires.
pub fn classify_sentence(tokens: &[String], lex: &TriggerLexicon) -> Option<String> {
    tokens
        .iter()
        .find_map(|t| lex.lookup(t))
        .map(|s| s.to_string())
}

// ──────────────────────────────────────────────
// Argument filling
// ──────────────────────────────────────────────

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no compatible mention for argument {argument} of {msg_type}")]
pub struct FillError {
    pub msg_type: String,
    pub argument: String,
}

/// Bind every schema argument to the nearest compatible unused mention.
///
/// Distance is keyed by sentence distance from the focus sentence first and
/// token distance second (token distance is measured from the classifying
/// trigger inside the focus sentence, and from the sentence start in
/// neighboring sentences). Arguments typed `MessageTypeLiteral` bind to
/// trigger occurrences other than the classifying one.
#[allow(clippy::too_many_arguments)]
pub fn fill_arguments(
    spec: &TopicSpec,
    msg_type: &str,
    doc: &Document,
    sentence_idx: usize,
    focus_token: usize,
    entities: &[EntityMention],
    triggers: &[TriggerMention],
    window: usize,
) -> Result<MessageInstance, FillError> {
    let schema = spec.schema(msg_type).ok_or_else(|| FillError {
        msg_type: msg_type.to_string(),
        argument: "<unknown schema>".to_string(),
    })?;

    let in_window = |s: usize| s.abs_diff(sentence_idx) <= window;
    let distance = |s: usize, tok: usize| -> (usize, usize, usize, usize) {
        let sent_dist = s.abs_diff(sentence_idx);
        let tok_dist = if s == sentence_idx {
            tok.abs_diff(focus_token)
        } else {
            tok
        };
        (sent_dist, tok_dist, s, tok)
    };

    let mut used_entities: BTreeSet<usize> = BTreeSet::new();
    let mut used_triggers: BTreeSet<usize> = BTreeSet::new();
    let mut bindings = std::collections::BTreeMap::new();

    for arg in &schema.args {
        if arg.allowed.contains(MESSAGE_TYPE_LITERAL) {
            let mut candidates: Vec<(usize, &TriggerMention)> = triggers
                .iter()
                .enumerate()
                .filter(|(i, t)| {
                    in_window(t.sentence)
                        && !used_triggers.contains(i)
                        && !(t.sentence == sentence_idx && t.token == focus_token)
                })
                .collect();
            candidates.sort_by_key(|(_, t)| distance(t.sentence, t.token));
            match candidates.first() {
                Some((i, t)) => {
                    used_triggers.insert(*i);
                    bindings.insert(arg.name.clone(), BoundValue::MsgType(t.msg_type.clone()));
                }
                None => {
                    return Err(FillError {
                        msg_type: msg_type.to_string(),
                        argument: arg.name.clone(),
                    });
                }
            }
        } else {
            let mut candidates: Vec<(usize, &EntityMention)> = entities
                .iter()
                .enumerate()
                .filter(|(i, m)| {
                    in_window(m.sentence)
                        && !used_entities.contains(i)
                        && arg
                            .allowed
                            .iter()
                            .any(|a| spec.ontology.is_a(&m.concept, a))
                })
                .collect();
            candidates.sort_by_key(|(_, m)| distance(m.sentence, m.start));
            match candidates.first() {
                Some((i, m)) => {
                    used_entities.insert(*i);
                    bindings.insert(arg.name.clone(), BoundValue::Entity(m.entity.clone()));
                }
                None => {
                    return Err(FillError {
                        msg_type: msg_type.to_string(),
                        argument: arg.name.clone(),
                    });
                }
            }
        }
    }

    let temporal = doc.sentences[sentence_idx].temporal;
    Ok(MessageInstance {
        id: format!("{}.s{}", doc.doc_id, sentence_idx),
        msg_type: msg_type.to_string(),
        bindings,
        source: doc.source.clone(),
        pub_time: doc.pub_time,
        ref_time: normalize_ref_time(doc.pub_time, &temporal),
        doc_id: doc.doc_id.clone(),
        sentence: Some(sentence_idx as u32),
    })
}

// ──────────────────────────────────────────────
// End-to-end extraction
// ──────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSentence {
    pub doc_id: String,
    pub sentence: usize,
    pub reason: FillError,
}

/// Classify and fill every sentence of every document. Sentences without a
/// trigger contribute nothing; sentences whose arguments cannot be filled
/// are skipped and reported. Output is sorted by (doc_id, sentence index).
pub fn extract_messages_logged(
    docs: &[Document],
    spec: &TopicSpec,
    gaz: &Gazetteer,
    lex: &TriggerLexicon,
) -> (Vec<MessageInstance>, Vec<SkippedSentence>) {
    let mut ordered: Vec<&Document> = docs.iter().collect();
    ordered.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let mut messages = Vec::new();
    let mut skipped = Vec::new();
    for doc in ordered {
        let entities = recognize_entities(doc, gaz);
        let triggers = recognize_triggers(doc, lex);
        for (s_idx, sentence) in doc.sentences.iter().enumerate() {
            let Some(msg_type) = classify_sentence(&sentence.tokens, lex) else {
                continue;
            };
            let focus_token = sentence
                .tokens
                .iter()
                .position(|t| lex.lookup(t).is_some())
                .unwrap_or(0);
            match fill_arguments(
                spec,
                &msg_type,
                doc,
                s_idx,
                focus_token,
                &entities,
                &triggers,
                DEFAULT_WINDOW,
            ) {
                Ok(m) => messages.push(m),
                Err(reason) => skipped.push(SkippedSentence {
                    doc_id: doc.doc_id.clone(),
                    sentence: s_idx,
                    reason,
                }),
            }
        }
    }
    (messages, skipped)
}

pub fn extract_messages(
    docs: &[Document],
    spec: &TopicSpec,
    gaz: &Gazetteer,
    lex: &TriggerLexicon,
) -> Vec<MessageInstance> {
    extract_messages_logged(docs, spec, gaz, lex).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_dsl::parse_topic_spec;

    fn doc(sentences: &[&str]) -> Document {
        Document {
            doc_id: "d1".into(),
            source: "A".into(),
            pub_time: Timestamp::parse("200602120000").unwrap(),
            sentences: sentences
                .iter()
                .map(|s| Sentence {
                    tokens: s.split_whitespace().map(|t| t.to_string()).collect(),
                    temporal: TemporalExpression::None,
                })
                .collect(),
        }
    }

    fn hijack_spec() -> TopicSpec {
        parse_topic_spec(
            r#"
            ONTOLOGY {
                CONCEPT Vehicle
                CONCEPT Airplane < Vehicle
                CONCEPT Location
                CONCEPT Person
                INSTANCE "Boeing 747" : Airplane
                INSTANCE "airport of Stanstend" : Location
                INSTANCE "negotiating team" : Person
            }
            MESSAGES {
                MESSAGE arrive (what: Vehicle, place: Location)
                MESSAGE negotiate (who: Person, with_whom: Person, about: MessageTypeLiteral)
                MESSAGE free (who: Person, whom: Person, from: Vehicle)
            }
        "#,
        )
        .unwrap()
    }

    fn hijack_gaz() -> Gazetteer {
        let mut gaz = Gazetteer::default();
        gaz.add("Boeing 747", "Boeing 747", "Airplane");
        gaz.add("airport of Stanstend", "airport of Stanstend", "Location");
        gaz
    }

    #[test]
    fn boeing_sentence_yields_two_mentions() {
        let d = doc(&["The Boeing 747 arrived yesterday at the airport of Stanstend"]);
        let mentions = recognize_entities(&d, &hijack_gaz());
        assert_eq!(mentions.len(), 2);
        assert_eq!(mentions[0].entity, "Boeing 747");
        assert_eq!(mentions[0].concept, "Airplane");
        assert_eq!(mentions[1].entity, "airport of Stanstend");
        assert_eq!(mentions[1].len, 3);
    }

    #[test]
    fn no_entries_no_mentions() {
        let d = doc(&["nothing to see here"]);
        assert!(recognize_entities(&d, &Gazetteer::default()).is_empty());
    }

    #[test]
    fn longest_match_wins_over_prefix_entry() {
        let mut gaz = Gazetteer::default();
        gaz.add("negotiating", "negotiating", "Person");
        gaz.add("negotiating team", "negotiating team", "Person");
        let d = doc(&["the negotiating team arrived"]);
        let mentions = recognize_entities(&d, &gaz);
        assert_eq!(mentions.len(), 1);
        assert_eq!(mentions[0].entity, "negotiating team");
        assert_eq!(mentions[0].len, 2);
    }

    fn hijack_lex() -> TriggerLexicon {
        let mut lex = TriggerLexicon::default();
        lex.add("negotiations", "negotiate");
        lex.add("free", "free");
        lex
    }

    #[test]
    fn trigger_classifies_the_sentence() {
        let d = doc(&["they managed to convince the hijackers to let free the children"]);
        assert_eq!(
            classify_sentence(&d.sentences[0].tokens, &hijack_lex()),
            Some("free".to_string())
        );
    }

    #[test]
    fn no_trigger_no_type() {
        let d = doc(&["a quiet day"]);
        assert_eq!(
            classify_sentence(&d.sentences[0].tokens, &hijack_lex()),
            None
        );
    }

    #[test]
    fn first_trigger_wins() {
        let d = doc(&["the negotiations focus on letting free the children"]);
        assert_eq!(
            classify_sentence(&d.sentences[0].tokens, &hijack_lex()),
            Some("negotiate".to_string())
        );
    }

    #[test]
    fn arrive_arguments_fill_from_the_focus_sentence() {
        let d = doc(&["The Boeing 747 arrived yesterday at the airport of Stanstend"]);
        let spec = hijack_spec();
        let entities = recognize_entities(&d, &hijack_gaz());
        let m = fill_arguments(&spec, "arrive", &d, 0, 3, &entities, &[], DEFAULT_WINDOW).unwrap();
        assert_eq!(
            m.bindings.get("what"),
            Some(&BoundValue::Entity("Boeing 747".to_string()))
        );
        assert_eq!(
            m.bindings.get("place"),
            Some(&BoundValue::Entity("airport of Stanstend".to_string()))
        );
    }

    #[test]
    fn unfillable_argument_is_named() {
        let spec = hijack_spec();
        let d = doc(&["the negotiating team negotiations continue"]);
        let mut gaz = Gazetteer::default();
        gaz.add("negotiating team", "negotiating team", "Person");
        let entities = recognize_entities(&d, &gaz);
        let triggers = recognize_triggers(&d, &hijack_lex());
        let err = fill_arguments(
            &spec,
            "negotiate",
            &d,
            0,
            3,
            &entities,
            &triggers,
            DEFAULT_WINDOW,
        )
        .unwrap_err();
        assert_eq!(err.argument, "with_whom");
    }

    #[test]
    fn documents_without_triggers_extract_nothing() {
        let docs = vec![doc(&["just weather", "more weather"])];
        let spec = hijack_spec();
        let (msgs, skipped) = extract_messages_logged(&docs, &spec, &hijack_gaz(), &hijack_lex());
        assert!(msgs.is_empty());
        assert!(skipped.is_empty());
    }

    #[test]
    fn empty_document_list_extracts_nothing() {
        let spec = hijack_spec();
        assert!(extract_messages(&[], &spec, &hijack_gaz(), &hijack_lex()).is_empty());
    }
}
