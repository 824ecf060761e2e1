//! Candidate gating and constraint evaluation for synchronic and diachronic
//! cross-document relations.
//!
//! Synchronic candidates pair messages from *different* sources whose
//! reference times fall within the topic's window; diachronic candidates
//! pair messages from the *same* source with strictly increasing reference
//! times and distinct publication times, optionally at an exact multiple of
//! the topic's time unit.

use crate::message::{BoundValue, MessageInstance};
use crate::spec_dsl::{
    Atom, CmpOp, DiachronicPolicy, RelType, RelationSchema, Side, Term, TopicSpec,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationInstance {
    pub schema_name: String,
    pub rel_type: RelType,
    pub first: String,
    pub second: String,
}

/// All unordered same-window cross-source pairs, canonically ordered inside
/// each pair by source and emitted sorted by message id.
pub fn synchronic_candidates(msgs: &[MessageInstance], window: i64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..msgs.len()).collect();
    order.sort_by_key(|&i| (msgs[i].ref_time, msgs[i].id.clone()));

    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in order[pos + 1..].iter() {
            let gap = msgs[j].ref_time.minutes() - msgs[i].ref_time.minutes();
            if gap > window {
                break;
            }
            if msgs[i].source == msgs[j].source {
                continue;
            }
            let (a, b) = if msgs[i].source < msgs[j].source {
                (i, j)
            } else {
                (j, i)
            };
            pairs.push((a, b));
        }
    }
    pairs.sort_by(|&(a1, b1), &(a2, b2)| {
        (&msgs[a1].id, &msgs[b1].id).cmp(&(&msgs[a2].id, &msgs[b2].id))
    });
    pairs
}

/// All ordered (earlier, later) same-source pairs with strictly increasing
/// reference time and distinct publication time. Under `ExactDistance(k)`
/// the reference-time gap must equal exactly `k * time_unit`.
pub fn diachronic_candidates(
    msgs: &[MessageInstance],
    policy: &DiachronicPolicy,
    time_unit: i64,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..msgs.len() {
        for j in 0..msgs.len() {
            if i == j {
                continue;
            }
            let (a, b) = (&msgs[i], &msgs[j]);
            if a.source != b.source || a.ref_time >= b.ref_time || a.pub_time == b.pub_time {
                continue;
            }
            if let DiachronicPolicy::ExactDistance(k) = policy {
                let gap = b.ref_time.minutes() - a.ref_time.minutes();
                if gap != (*k as i64) * time_unit {
                    continue;
                }
            }
            pairs.push((i, j));
        }
    }
    pairs.sort_by(|&(a1, b1), &(a2, b2)| {
        (&msgs[a1].id, &msgs[b1].id).cmp(&(&msgs[a2].id, &msgs[b2].id))
    });
    pairs
}

/// Evaluate a relation schema's constraint on a candidate pair whose types
/// match one of the schema's pairs: in order for diachronic relations,
/// in either order for synchronic ones.
pub fn evaluate_constraints(
    first: &MessageInstance,
    second: &MessageInstance,
    schema: &RelationSchema,
    spec: &TopicSpec,
) -> bool {
    oriented_matches(first, second, schema)
        .into_iter()
        .any(|(a, b)| {
            schema
                .constraint
                .atoms
                .iter()
                .all(|atom| eval_atom(a, b, atom, spec))
        })
}

/// The candidate orientations consistent with the schema's declared pairs.
fn oriented_matches<'m>(
    first: &'m MessageInstance,
    second: &'m MessageInstance,
    schema: &RelationSchema,
) -> Vec<(&'m MessageInstance, &'m MessageInstance)> {
    let mut out = Vec::new();
    let direct = schema
        .pairs
        .iter()
        .any(|(a, b)| *a == first.msg_type && *b == second.msg_type);
    if direct {
        out.push((first, second));
    }
    if schema.rel_type == RelType::Synchronic {
        let swapped = schema
            .pairs
            .iter()
            .any(|(a, b)| *a == second.msg_type && *b == first.msg_type);
        // For a homogeneous pair both orientations coincide up to symmetry;
        // evaluating the canonical one is enough.
        if swapped && first.msg_type != second.msg_type {
            out.push((second, first));
        }
    }
    out
}

fn eval_atom(
    first: &MessageInstance,
    second: &MessageInstance,
    atom: &Atom,
    spec: &TopicSpec,
) -> bool {
    match atom.op {
        CmpOp::Eq => values_equal(first, second, atom) == Some(true),
        CmpOp::Neq => values_equal(first, second, atom) == Some(false),
        CmpOp::Lt | CmpOp::Gt => {
            let Some(ordering) = scale_ordering(first, second, atom, spec) else {
                return false;
            };
            match atom.op {
                CmpOp::Lt => ordering == std::cmp::Ordering::Less,
                _ => ordering == std::cmp::Ordering::Greater,
            }
        }
        CmpOp::Subsumes => {
            let Term::Arg(_) = &atom.lhs else {
                return false;
            };
            let Term::Literal(ancestor) = &atom.rhs else {
                return false;
            };
            let Some(value) = resolve(first, second, &atom.lhs) else {
                return false;
            };
            let concept = match value {
                Resolved::Bound(BoundValue::Entity(id)) => {
                    match spec.ontology.concept_of_entity(id) {
                        Some(c) => c,
                        None => return false,
                    }
                }
                Resolved::Bound(BoundValue::Scaled { concept, .. }) => concept,
                _ => return false,
            };
            spec.ontology.is_a(concept, ancestor)
        }
    }
}

enum Resolved<'a> {
    Bound(&'a BoundValue),
    Lit(&'a str),
}

fn resolve<'a>(
    first: &'a MessageInstance,
    second: &'a MessageInstance,
    term: &'a Term,
) -> Option<Resolved<'a>> {
    match term {
        Term::Literal(s) => Some(Resolved::Lit(s)),
        Term::Arg(arg_ref) => {
            let msg = match arg_ref.side {
                Side::First => first,
                Side::Second => second,
            };
            msg.bindings.get(&arg_ref.name).map(Resolved::Bound)
        }
    }
}

/// None when a referenced argument is unbound; an unresolvable atom holds
/// for neither `=` nor `!=`.
fn values_equal(first: &MessageInstance, second: &MessageInstance, atom: &Atom) -> Option<bool> {
    let lhs = resolve(first, second, &atom.lhs)?;
    let rhs = resolve(first, second, &atom.rhs)?;
    Some(match (lhs, rhs) {
        (Resolved::Bound(a), Resolved::Bound(b)) => a == b,
        (Resolved::Bound(v), Resolved::Lit(l)) | (Resolved::Lit(l), Resolved::Bound(v)) => {
            v.surface() == l
        }
        (Resolved::Lit(a), Resolved::Lit(b)) => a == b,
    })
}

/// Compare two terms as ranks on an ordered scale. A term contributes a
/// (concept, value) pair when bound to a scaled literal; a bare literal
/// borrows the concept of the other side. Incomparable operands yield None.
fn scale_ordering(
    first: &MessageInstance,
    second: &MessageInstance,
    atom: &Atom,
    spec: &TopicSpec,
) -> Option<std::cmp::Ordering> {
    let lhs = resolve(first, second, &atom.lhs)?;
    let rhs = resolve(first, second, &atom.rhs)?;
    let concept_of = |r: &Resolved| match r {
        Resolved::Bound(BoundValue::Scaled { concept, .. }) => Some(concept.clone()),
        _ => None,
    };
    let concept = concept_of(&lhs).or_else(|| concept_of(&rhs))?;
    let value_of = |r: &Resolved| -> Option<String> {
        match r {
            Resolved::Bound(BoundValue::Scaled { concept: c, value }) if *c == concept => {
                Some(value.clone())
            }
            Resolved::Bound(_) => None,
            Resolved::Lit(l) => Some(l.to_string()),
        }
    };
    let a = spec.ontology.scale_rank(&concept, &value_of(&lhs)?)?;
    let b = spec.ontology.scale_rank(&concept, &value_of(&rhs)?)?;
    Some(a.cmp(&b))
}

/// Evaluate every relation schema over its gated candidate pairs. Output is
/// sorted by (schema name, first id, second id) and free of duplicates, so
/// it equals the brute-force all-pairs evaluation.
pub fn extract_relations(msgs: &[MessageInstance], spec: &TopicSpec) -> Vec<RelationInstance> {
    extract_relations_touching(msgs, spec, None)
}

/// Like [`extract_relations`], but when `touch` is given only pairs with at
/// least one endpoint in the set are evaluated. Grid extension uses this to
/// skip re-deriving edges between existing messages.
pub fn extract_relations_touching(
    msgs: &[MessageInstance],
    spec: &TopicSpec,
    touch: Option<&std::collections::BTreeSet<String>>,
) -> Vec<RelationInstance> {
    let touches = |i: usize, j: usize| match touch {
        None => true,
        Some(ids) => ids.contains(&msgs[i].id) || ids.contains(&msgs[j].id),
    };
    let sync_pairs: Vec<(usize, usize)> =
        synchronic_candidates(msgs, spec.config.sync_window_minutes as i64)
            .into_iter()
            .filter(|&(i, j)| touches(i, j))
            .collect();
    let dia_pairs: Vec<(usize, usize)> = diachronic_candidates(
        msgs,
        &spec.config.diachronic_policy,
        spec.config.time_unit_minutes as i64,
    )
    .into_iter()
    .filter(|&(i, j)| touches(i, j))
    .collect();

    let mut out = Vec::new();
    for schema in &spec.relations {
        let candidates = match schema.rel_type {
            RelType::Synchronic => &sync_pairs,
            RelType::Diachronic => &dia_pairs,
        };
        for &(i, j) in candidates {
            if evaluate_constraints(&msgs[i], &msgs[j], schema, spec) {
                out.push(RelationInstance {
                    schema_name: schema.name.clone(),
                    rel_type: schema.rel_type,
                    first: msgs[i].id.clone(),
                    second: msgs[j].id.clone(),
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_dsl::parse_topic_spec;
    use crate::timestamp::Timestamp;
    use std::collections::BTreeMap;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn msg(
        id: &str,
        msg_type: &str,
        bindings: &[(&str, BoundValue)],
        source: &str,
        pub_time: &str,
        ref_time: &str,
    ) -> MessageInstance {
        MessageInstance {
            id: id.into(),
            msg_type: msg_type.into(),
            bindings: bindings
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect::<BTreeMap<_, _>>(),
            source: source.into(),
            pub_time: ts(pub_time),
            ref_time: ts(ref_time),
            doc_id: format!("doc-{id}"),
            sentence: None,
        }
    }

    fn ent(id: &str) -> BoundValue {
        BoundValue::Entity(id.into())
    }

    /// The five messages of the bus-hijack worked example.
    pub(crate) fn bus_hijack_messages() -> Vec<MessageInstance> {
        let neg = |id: &str, source: &str, pt: &str, rt: &str| {
            msg(
                id,
                "negotiate",
                &[
                    ("who", ent("negotiating team")),
                    ("with_whom", ent("hijackers")),
                    ("about", BoundValue::MsgType("free".into())),
                ],
                source,
                pt,
                rt,
            )
        };
        let fr = |id: &str, source: &str, pt: &str, rt: &str| {
            msg(
                id,
                "free",
                &[
                    ("who", ent("hijackers")),
                    ("whom", ent("children")),
                    ("from", ent("bus")),
                ],
                source,
                pt,
                rt,
            )
        };
        vec![
            neg("m1", "A", "199907151200", "199907151200"),
            neg("m2", "A", "199907151400", "199907151400"),
            fr("m3", "A", "199907151800", "199907151800"),
            neg("m4", "B", "199907151700", "199907151200"),
            fr("m5", "B", "199907151900", "199907151800"),
        ]
    }

    fn ids(msgs: &[MessageInstance], pairs: &[(usize, usize)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|&(i, j)| (msgs[i].id.clone(), msgs[j].id.clone()))
            .collect()
    }

    #[test]
    fn synchronic_candidates_at_window_zero() {
        let msgs = bus_hijack_messages();
        let got = ids(&msgs, &synchronic_candidates(&msgs, 0));
        assert_eq!(
            got,
            vec![
                ("m1".to_string(), "m4".to_string()),
                ("m3".to_string(), "m5".to_string())
            ]
        );
    }

    #[test]
    fn single_source_has_no_synchronic_candidates() {
        let msgs: Vec<_> = bus_hijack_messages()
            .into_iter()
            .filter(|m| m.source == "A")
            .collect();
        assert!(synchronic_candidates(&msgs, 0).is_empty());
    }

    #[test]
    fn window_bound_excludes_distant_pairs() {
        let msgs = vec![
            msg("x1", "free", &[], "A", "199907151000", "199907151000"),
            msg("x2", "free", &[], "B", "199907151100", "199907151100"),
        ];
        assert!(synchronic_candidates(&msgs, 30).is_empty());
        assert_eq!(synchronic_candidates(&msgs, 60).len(), 1);
    }

    #[test]
    fn diachronic_candidates_within_one_source() {
        let msgs = bus_hijack_messages();
        let got = ids(
            &msgs,
            &diachronic_candidates(&msgs, &DiachronicPolicy::Unbounded, 60),
        );
        assert_eq!(
            got,
            vec![
                ("m1".to_string(), "m2".to_string()),
                ("m1".to_string(), "m3".to_string()),
                ("m2".to_string(), "m3".to_string()),
                ("m4".to_string(), "m5".to_string()),
            ]
        );
    }

    #[test]
    fn same_publication_time_is_excluded() {
        let msgs = vec![
            msg("x1", "free", &[], "A", "199907151200", "199907151000"),
            msg("x2", "free", &[], "A", "199907151200", "199907151100"),
        ];
        assert!(diachronic_candidates(&msgs, &DiachronicPolicy::Unbounded, 60).is_empty());
    }

    #[test]
    fn exact_distance_gates_on_the_time_unit() {
        let week = 10080;
        let msgs = vec![
            msg("w1", "perf", &[], "A", "200301050000", "200301050000"),
            msg("w2", "perf", &[], "A", "200301120000", "200301120000"),
            msg("w3", "perf", &[], "A", "200301260000", "200301260000"),
        ];
        let got = ids(
            &msgs,
            &diachronic_candidates(&msgs, &DiachronicPolicy::ExactDistance(1), week),
        );
        // one week apart is in; two weeks apart is out
        assert_eq!(got, vec![("w1".to_string(), "w2".to_string())]);
    }

    fn arrive_spec() -> TopicSpec {
        parse_topic_spec(
            r#"
            ONTOLOGY {
                CONCEPT Vehicle
                CONCEPT Location
                INSTANCE "Boeing 747" : Vehicle
                INSTANCE "Stanstend" : Location
                INSTANCE "Heathrow" : Location
            }
            MESSAGES { MESSAGE arrive (vehicle: Vehicle, place: Location) }
            RELATIONS {
                RELATION Disagreement {
                    type: synchronic
                    pairs: (arrive, arrive)
                    constraint: 1.vehicle = 2.vehicle and 1.place != 2.place
                }
                RELATION Repetition {
                    type: diachronic
                    pairs: (arrive, arrive)
                    constraint: 1.vehicle = 2.vehicle and 1.place = 2.place
                }
            }
        "#,
        )
        .unwrap()
    }

    #[test]
    fn disagreement_holds_on_conflicting_places() {
        let spec = arrive_spec();
        let a = msg(
            "a",
            "arrive",
            &[("vehicle", ent("Boeing 747")), ("place", ent("Stanstend"))],
            "A",
            "200602120000",
            "200602120000",
        );
        let b = msg(
            "b",
            "arrive",
            &[("vehicle", ent("Boeing 747")), ("place", ent("Heathrow"))],
            "B",
            "200602120000",
            "200602120000",
        );
        let disagreement = &spec.relations[0];
        let repetition = &spec.relations[1];
        assert!(evaluate_constraints(&a, &b, disagreement, &spec));

        let b_same = msg(
            "b2",
            "arrive",
            &[("vehicle", ent("Boeing 747")), ("place", ent("Stanstend"))],
            "B",
            "200602130000",
            "200602130000",
        );
        assert!(!evaluate_constraints(&a, &b_same, disagreement, &spec));
        assert!(evaluate_constraints(&a, &b_same, repetition, &spec));
    }

    #[test]
    fn graduation_compares_scale_ranks() {
        let spec = parse_topic_spec(
            r#"
            ONTOLOGY {
                CONCEPT Player
                CONCEPT Degree
                INSTANCE "Nalitzis" : Player
                SCALE Degree: low < average < good < excellent
            }
            MESSAGES { MESSAGE performance (of_whom: Player, value: Degree) }
            RELATIONS {
                RELATION PositiveGraduation {
                    type: diachronic
                    pairs: (performance, performance)
                    constraint: 1.of_whom = 2.of_whom and 1.value < 2.value
                }
            }
        "#,
        )
        .unwrap();
        let perf = |id: &str, value: &str, pt: &str| {
            msg(
                id,
                "performance",
                &[
                    ("of_whom", ent("Nalitzis")),
                    (
                        "value",
                        BoundValue::Scaled {
                            concept: "Degree".into(),
                            value: value.into(),
                        },
                    ),
                ],
                "A",
                pt,
                pt,
            )
        };
        let earlier = perf("p1", "good", "200301050000");
        let later = perf("p2", "excellent", "200301120000");
        let rel = &spec.relations[0];
        assert!(evaluate_constraints(&earlier, &later, rel, &spec));
        assert!(!evaluate_constraints(&later, &earlier, rel, &spec));
    }

    #[test]
    fn synchronic_symmetric_constraints_are_order_insensitive() {
        let spec = arrive_spec();
        let a = msg(
            "a",
            "arrive",
            &[("vehicle", ent("Boeing 747")), ("place", ent("Stanstend"))],
            "A",
            "200602120000",
            "200602120000",
        );
        let b = msg(
            "b",
            "arrive",
            &[("vehicle", ent("Boeing 747")), ("place", ent("Heathrow"))],
            "B",
            "200602120000",
            "200602120000",
        );
        let rel = &spec.relations[0];
        assert_eq!(
            evaluate_constraints(&a, &b, rel, &spec),
            evaluate_constraints(&b, &a, rel, &spec)
        );
    }

    #[test]
    fn no_messages_no_relations() {
        let spec = arrive_spec();
        assert!(extract_relations(&[], &spec).is_empty());
    }

    #[test]
    fn unpaired_types_produce_nothing() {
        let spec = arrive_spec();
        let msgs = vec![
            msg("u1", "unrelated", &[], "A", "200602120000", "200602120000"),
            msg("u2", "unrelated", &[], "B", "200602120000", "200602120000"),
        ];
        assert!(extract_relations(&msgs, &spec).is_empty());
    }
}
