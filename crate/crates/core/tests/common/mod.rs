//! Shared test support: an independent brute-force relation enumerator and
//! a seeded generator of random topic specs and message sets.
//!
//! The oracle deliberately re-derives gating and constraint semantics from
//! first principles instead of calling into the engine, so the two paths
//! can be compared.

#![allow(dead_code)]

use evogrid::message::{BoundValue, MessageInstance};
use evogrid::relations::RelationInstance;
use evogrid::spec_dsl::{
    ArgDecl, ArgRef, Atom, CmpOp, ConstraintExpr, DiachronicPolicy, MessageSchema, Ontology,
    PlannerMode, RelType, RelationSchema, Side, Term, TopicConfig, TopicSpec, MESSAGE_TYPE_LITERAL,
};
use evogrid::timestamp::Timestamp;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path}: {e}"))
}

// ──────────────────────────────────────────────
// Brute-force oracle
// ──────────────────────────────────────────────

/// Naive all-pairs enumeration of relation instances: for every schema and
/// every ordered message pair, test the gate and the constraint directly.
pub fn naive_relations(msgs: &[MessageInstance], spec: &TopicSpec) -> Vec<RelationInstance> {
    let window = spec.config.sync_window_minutes as i64;
    let unit = spec.config.time_unit_minutes as i64;
    let mut out = Vec::new();
    for schema in &spec.relations {
        for a in msgs {
            for b in msgs {
                if a.id == b.id {
                    continue;
                }
                let gated = match schema.rel_type {
                    RelType::Synchronic => {
                        a.source < b.source
                            && (a.ref_time.minutes() - b.ref_time.minutes()).abs() <= window
                    }
                    RelType::Diachronic => {
                        a.source == b.source
                            && a.ref_time < b.ref_time
                            && a.pub_time != b.pub_time
                            && match spec.config.diachronic_policy {
                                DiachronicPolicy::Unbounded => true,
                                DiachronicPolicy::ExactDistance(k) => {
                                    b.ref_time.minutes() - a.ref_time.minutes() == k as i64 * unit
                                }
                            }
                    }
                };
                if !gated {
                    continue;
                }
                let holds = match schema.rel_type {
                    RelType::Diachronic => naive_pair_holds(a, b, schema, spec, false),
                    RelType::Synchronic => {
                        naive_pair_holds(a, b, schema, spec, false)
                            || naive_pair_holds(a, b, schema, spec, true)
                    }
                };
                if holds {
                    out.push(RelationInstance {
                        schema_name: schema.name.clone(),
                        rel_type: schema.rel_type,
                        first: a.id.clone(),
                        second: b.id.clone(),
                    });
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Does the constraint hold with (a, b) matched against a declared pair,
/// optionally with the schema pair read in flipped orientation?
fn naive_pair_holds(
    a: &MessageInstance,
    b: &MessageInstance,
    schema: &RelationSchema,
    spec: &TopicSpec,
    flipped: bool,
) -> bool {
    let type_match = schema.pairs.iter().any(|(t1, t2)| {
        if flipped {
            *t1 == b.msg_type && *t2 == a.msg_type
        } else {
            *t1 == a.msg_type && *t2 == b.msg_type
        }
    });
    if !type_match {
        return false;
    }
    if flipped && a.msg_type == b.msg_type {
        // homogeneous pairs are evaluated only in canonical orientation
        return false;
    }
    let (first, second) = if flipped { (b, a) } else { (a, b) };
    schema
        .constraint
        .atoms
        .iter()
        .all(|atom| naive_atom(first, second, atom, spec))
}

fn naive_lookup<'m>(
    first: &'m MessageInstance,
    second: &'m MessageInstance,
    r: &ArgRef,
) -> Option<&'m BoundValue> {
    match r.side {
        Side::First => first.bindings.get(&r.name),
        Side::Second => second.bindings.get(&r.name),
    }
}

fn naive_atom(
    first: &MessageInstance,
    second: &MessageInstance,
    atom: &Atom,
    spec: &TopicSpec,
) -> bool {
    let surface = |v: &BoundValue| -> String {
        match v {
            BoundValue::Entity(id) => id.clone(),
            BoundValue::MsgType(n) => n.clone(),
            BoundValue::Scaled { value, .. } => value.clone(),
        }
    };
    match atom.op {
        CmpOp::Eq | CmpOp::Neq => {
            let eq = match (&atom.lhs, &atom.rhs) {
                (Term::Arg(x), Term::Arg(y)) => {
                    match (
                        naive_lookup(first, second, x),
                        naive_lookup(first, second, y),
                    ) {
                        (Some(a), Some(b)) => a == b,
                        _ => return false,
                    }
                }
                (Term::Arg(x), Term::Literal(l)) | (Term::Literal(l), Term::Arg(x)) => {
                    match naive_lookup(first, second, x) {
                        Some(v) => surface(v) == *l,
                        None => return false,
                    }
                }
                (Term::Literal(a), Term::Literal(b)) => a == b,
            };
            if atom.op == CmpOp::Eq {
                eq
            } else {
                !eq
            }
        }
        CmpOp::Lt | CmpOp::Gt => {
            let scaled = |t: &Term| -> Option<(Option<String>, String)> {
                match t {
                    Term::Literal(l) => Some((None, l.clone())),
                    Term::Arg(x) => match naive_lookup(first, second, x)? {
                        BoundValue::Scaled { concept, value } => {
                            Some((Some(concept.clone()), value.clone()))
                        }
                        _ => None,
                    },
                }
            };
            let Some((c1, v1)) = scaled(&atom.lhs) else {
                return false;
            };
            let Some((c2, v2)) = scaled(&atom.rhs) else {
                return false;
            };
            let concept = match (c1, c2) {
                (Some(a), Some(b)) if a == b => a,
                (Some(_), Some(_)) => return false, // incomparable scales
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => return false,
            };
            let Some(scale) = spec.ontology.ordered_scales.get(&concept) else {
                return false;
            };
            let (Some(r1), Some(r2)) = (
                scale.iter().position(|v| *v == v1),
                scale.iter().position(|v| *v == v2),
            ) else {
                return false;
            };
            if atom.op == CmpOp::Lt {
                r1 < r2
            } else {
                r1 > r2
            }
        }
        CmpOp::Subsumes => {
            let Term::Arg(x) = &atom.lhs else {
                return false;
            };
            let Term::Literal(ancestor) = &atom.rhs else {
                return false;
            };
            let concept = match naive_lookup(first, second, x) {
                Some(BoundValue::Entity(id)) => match spec.ontology.concept_of_entity(id) {
                    Some(c) => c.to_string(),
                    None => return false,
                },
                Some(BoundValue::Scaled { concept, .. }) => concept.clone(),
                _ => return false,
            };
            // walk the is-a chain by hand
            let mut cur = Some(concept);
            let mut steps = 0;
            while let Some(c) = cur {
                if c == *ancestor {
                    return true;
                }
                steps += 1;
                if steps > spec.ontology.concepts.len() + 1 {
                    return false;
                }
                cur = spec.ontology.concepts.get(&c).and_then(|p| p.clone());
            }
            false
        }
    }
}

// ──────────────────────────────────────────────
// Random instances
// ──────────────────────────────────────────────

const CONCEPTS: &[(&str, Option<&str>)] = &[
    ("Agent", None),
    ("Offender", Some("Agent")),
    ("Victim", Some("Agent")),
    ("Site", None),
    ("Town", Some("Site")),
    ("Craft", None),
    ("Jet", Some("Craft")),
    ("Grade", None),
];

const GRADE_VALUES: &[&str] = &["poor", "fair", "fine", "prime"];

/// A random but internally consistent topic spec: every constraint
/// references arguments that exist on both sides of its pairs.
pub fn random_spec(rng: &mut ChaCha8Rng) -> TopicSpec {
    let mut ontology = Ontology::default();
    for (name, parent) in CONCEPTS {
        ontology
            .concepts
            .insert(name.to_string(), parent.map(|p| p.to_string()));
    }
    ontology.ordered_scales.insert(
        "Grade".into(),
        GRADE_VALUES.iter().map(|v| v.to_string()).collect(),
    );
    let entity_count = rng.gen_range(3..=8);
    for e in 0..entity_count {
        let concept = CONCEPTS[rng.gen_range(0..CONCEPTS.len() - 1)].0; // skip Grade
        ontology
            .instances
            .insert(format!("e{e}"), concept.to_string());
    }

    let schema_count = rng.gen_range(1..=4);
    let mut schemas = BTreeMap::new();
    for s in 0..schema_count {
        let name = format!("t{s}");
        let arg_count = rng.gen_range(1..=3);
        let mut args = Vec::new();
        for a in 0..arg_count {
            let allowed: BTreeSet<String> = match rng.gen_range(0..10) {
                0 => BTreeSet::from([MESSAGE_TYPE_LITERAL.to_string()]),
                1 | 2 => BTreeSet::from(["Grade".to_string()]),
                n => {
                    let mut set = BTreeSet::new();
                    set.insert(CONCEPTS[n % (CONCEPTS.len() - 1)].0.to_string());
                    if rng.gen_bool(0.3) {
                        set.insert(CONCEPTS[rng.gen_range(0..CONCEPTS.len() - 1)].0.to_string());
                    }
                    set
                }
            };
            args.push(ArgDecl {
                name: format!("a{a}"),
                allowed,
            });
        }
        schemas.insert(name.clone(), MessageSchema { name, args });
    }
    let schema_names: Vec<String> = schemas.keys().cloned().collect();

    let relation_count = rng.gen_range(0..=10);
    let mut relations = Vec::new();
    for r in 0..relation_count {
        let rel_type = if rng.gen_bool(0.5) {
            RelType::Synchronic
        } else {
            RelType::Diachronic
        };
        let t1 = schema_names[rng.gen_range(0..schema_names.len())].clone();
        let t2 = if rng.gen_bool(0.6) {
            t1.clone()
        } else {
            schema_names[rng.gen_range(0..schema_names.len())].clone()
        };
        let shared_args = |t: &str, side: Side| -> Vec<ArgRef> {
            schemas[t]
                .args
                .iter()
                .map(|a| ArgRef {
                    side,
                    name: a.name.clone(),
                })
                .collect()
        };
        let firsts = shared_args(&t1, Side::First);
        let seconds = shared_args(&t2, Side::Second);
        let atom_count = rng.gen_range(0..=3);
        let mut atoms = Vec::new();
        for _ in 0..atom_count {
            let lhs = Term::Arg(firsts[rng.gen_range(0..firsts.len())].clone());
            let rhs = if rng.gen_bool(0.8) {
                Term::Arg(seconds[rng.gen_range(0..seconds.len())].clone())
            } else if rng.gen_bool(0.5) {
                Term::Literal(format!("e{}", rng.gen_range(0..entity_count)))
            } else {
                Term::Literal(GRADE_VALUES[rng.gen_range(0..GRADE_VALUES.len())].to_string())
            };
            let op = match rng.gen_range(0..6) {
                0 | 1 => CmpOp::Eq,
                2 => CmpOp::Neq,
                3 => CmpOp::Lt,
                4 => CmpOp::Gt,
                _ => CmpOp::Eq,
            };
            atoms.push(Atom { lhs, op, rhs });
        }
        relations.push(RelationSchema {
            name: format!("r{r}"),
            rel_type,
            pairs: BTreeSet::from([(t1, t2)]),
            constraint: ConstraintExpr { atoms },
        });
    }

    let config = TopicConfig {
        time_unit_minutes: *[30u32, 60, 120].choose(rng).unwrap(),
        sync_window_minutes: *[0u32, 30, 60, 240].choose(rng).unwrap(),
        diachronic_policy: if rng.gen_bool(0.7) {
            DiachronicPolicy::Unbounded
        } else {
            DiachronicPolicy::ExactDistance(rng.gen_range(1..=3))
        },
        planner_mode: if rng.gen_bool(0.5) {
            PlannerMode::Linear
        } else {
            PlannerMode::NonLinear
        },
    };

    TopicSpec {
        name: "random".into(),
        ontology,
        schemas,
        relations,
        config,
    }
}

/// Random messages over a spec's schemas; bindings always cover the schema
/// arguments with type-appropriate values.
pub fn random_messages(
    rng: &mut ChaCha8Rng,
    spec: &TopicSpec,
    max_count: usize,
) -> Vec<MessageInstance> {
    let base = Timestamp::parse("200401010000").unwrap().minutes();
    let schema_names: Vec<&String> = spec.schemas.keys().collect();
    let entities: Vec<&String> = spec.ontology.instances.keys().collect();
    let count = rng.gen_range(0..=max_count);
    let sources = ["A", "B", "C"];
    let mut msgs = Vec::with_capacity(count);
    for i in 0..count {
        let schema = &spec.schemas[schema_names[rng.gen_range(0..schema_names.len())]];
        let mut bindings = BTreeMap::new();
        for arg in &schema.args {
            let value = if arg.allowed.contains(MESSAGE_TYPE_LITERAL) {
                BoundValue::MsgType(schema_names[rng.gen_range(0..schema_names.len())].clone())
            } else if arg.allowed.contains("Grade") {
                BoundValue::Scaled {
                    concept: "Grade".into(),
                    value: GRADE_VALUES[rng.gen_range(0..GRADE_VALUES.len())].to_string(),
                }
            } else if entities.is_empty() {
                BoundValue::Entity("e0".into())
            } else {
                BoundValue::Entity(entities[rng.gen_range(0..entities.len())].clone())
            };
            bindings.insert(arg.name.clone(), value);
        }
        // Times snap to half-units so exact-distance gates fire sometimes.
        let step = (spec.config.time_unit_minutes as i64 / 2).max(1);
        let ref_time = base + rng.gen_range(0..48) * step;
        let pub_time = ref_time + rng.gen_range(0..4) * step;
        msgs.push(MessageInstance {
            id: format!("m{i:03}"),
            msg_type: schema.name.clone(),
            bindings,
            source: sources[rng.gen_range(0..sources.len())].to_string(),
            pub_time: Timestamp::from_minutes(pub_time),
            ref_time: Timestamp::from_minutes(ref_time),
            doc_id: format!("d{:02}", rng.gen_range(0..10)),
            sentence: None,
        });
    }
    msgs
}
