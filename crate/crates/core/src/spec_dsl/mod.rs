//! The `.topic` specification format: a topic ontology, message schemas,
//! relation schemas and the topic configuration, parsed from a sectioned
//! text file and validated as a closed set of cross-references.

mod parse;
mod print;

pub use parse::{parse_topic_spec, ParseError};
pub use print::print_topic_spec;

use crate::diag::{Diagnostic, Severity};
use std::collections::{BTreeMap, BTreeSet};

/// Reserved pseudo-concept for arguments whose value is a message-type name
/// (e.g. the `about` argument of `negotiate`).
pub const MESSAGE_TYPE_LITERAL: &str = "MessageTypeLiteral";

// ──────────────────────────────────────────────
// Domain types
// ──────────────────────────────────────────────

/// Concept forest (is-a links), entity instances and ordered value scales.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    /// concept name → parent concept (None for roots)
    pub concepts: BTreeMap<String, Option<String>>,
    /// canonical entity id → concept name
    pub instances: BTreeMap<String, String>,
    /// concept name → ordered literal values (ascending)
    pub ordered_scales: BTreeMap<String, Vec<String>>,
}

impl Ontology {
    /// True when `concept` equals `ancestor` or reaches it via is-a links.
    pub fn is_a(&self, concept: &str, ancestor: &str) -> bool {
        let mut cur = Some(concept);
        let mut hops = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            hops += 1;
            if hops > self.concepts.len() + 1 {
                return false; // cyclic input; cycles are rejected by validation
            }
            cur = self.concepts.get(c).and_then(|p| p.as_deref());
        }
        false
    }

    pub fn concept_of_entity(&self, entity: &str) -> Option<&str> {
        self.instances.get(entity).map(|s| s.as_str())
    }

    /// Rank of `value` on the scale of `concept`, if both exist.
    pub fn scale_rank(&self, concept: &str, value: &str) -> Option<usize> {
        self.ordered_scales
            .get(concept)?
            .iter()
            .position(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptDecl {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgDecl {
    pub name: String,
    /// Union of allowed concepts; a bound value satisfies the argument when
    /// its concept or any ancestor is in the set.
    pub allowed: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSchema {
    pub name: String,
    pub args: Vec<ArgDecl>,
}

impl MessageSchema {
    pub fn arg(&self, name: &str) -> Option<&ArgDecl> {
        self.args.iter().find(|a| a.name == name)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum RelType {
    Synchronic,
    Diachronic,
}

impl std::fmt::Display for RelType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RelType::Synchronic => f.write_str("synchronic"),
            RelType::Diachronic => f.write_str("diachronic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgRef {
    pub side: Side,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Arg(ArgRef),
    Literal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Gt,
    Subsumes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub lhs: Term,
    pub op: CmpOp,
    pub rhs: Term,
}

/// A pure conjunction of comparison atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintExpr {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub rel_type: RelType,
    /// Message-type pairs the relation may connect.
    pub pairs: BTreeSet<(String, String)>,
    pub constraint: ConstraintExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiachronicPolicy {
    /// Candidates must be exactly `k` time units apart by reference time.
    ExactDistance(u32),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    Linear,
    NonLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopicConfig {
    /// The quantum of time `t`; one week is 10080.
    pub time_unit_minutes: u32,
    /// Maximum reference-time gap for synchronic candidacy.
    pub sync_window_minutes: u32,
    pub diachronic_policy: DiachronicPolicy,
    pub planner_mode: PlannerMode,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            time_unit_minutes: 1,
            sync_window_minutes: 0,
            diachronic_policy: DiachronicPolicy::Unbounded,
            planner_mode: PlannerMode::Linear,
        }
    }
}

/// A fully cross-referenced topic pack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicSpec {
    pub name: String,
    pub ontology: Ontology,
    pub schemas: BTreeMap<String, MessageSchema>,
    pub relations: Vec<RelationSchema>,
    pub config: TopicConfig,
}

impl TopicSpec {
    pub fn schema(&self, name: &str) -> Option<&MessageSchema> {
        self.schemas.get(name)
    }
}

// ──────────────────────────────────────────────
// Validation
// ──────────────────────────────────────────────

/// Check every invariant of a topic spec. Empty result means the spec is
/// well-formed; otherwise one diagnostic per violation. Positions are only
/// attached when the caller supplies them (the parser does).
pub fn validate_topic_spec(spec: &TopicSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    // Ontology: parent references and forest shape.
    for (name, parent) in &spec.ontology.concepts {
        if name.is_empty() {
            diags.push(Diagnostic::error("empty concept name"));
        }
        if let Some(p) = parent {
            if p == name {
                diags.push(Diagnostic::error(format!(
                    "concept {name} cannot be its own parent"
                )));
            } else if !spec.ontology.concepts.contains_key(p) {
                diags.push(Diagnostic::error(format!("dangling reference: {p}")));
            }
        }
    }
    for start in spec.ontology.concepts.keys() {
        if let Some(witness) = cycle_witness(&spec.ontology, start) {
            diags.push(Diagnostic::error(format!(
                "ontology cycle involving {witness}"
            )));
            break; // one report per spec is enough to reject it
        }
    }
    for (entity, concept) in &spec.ontology.instances {
        if !spec.ontology.concepts.contains_key(concept) {
            diags.push(Diagnostic::error(format!(
                "instance {entity:?}: dangling reference: {concept}"
            )));
        }
    }
    for (concept, values) in &spec.ontology.ordered_scales {
        if !spec.ontology.concepts.contains_key(concept) {
            diags.push(Diagnostic::error(format!(
                "scale: dangling reference: {concept}"
            )));
        }
        let mut seen = BTreeSet::new();
        for v in values {
            if !seen.insert(v) {
                diags.push(Diagnostic::error(format!(
                    "scale {concept}: duplicate value {v}"
                )));
            }
        }
        if values.is_empty() {
            diags.push(Diagnostic::error(format!("scale {concept} is empty")));
        }
    }

    // Message schemas: unique arg names, declared concepts.
    for (key, schema) in &spec.schemas {
        if key != &schema.name {
            diags.push(Diagnostic::error(format!(
                "schema map key {key} does not match schema name {}",
                schema.name
            )));
        }
        let mut seen = BTreeSet::new();
        for arg in &schema.args {
            if !seen.insert(&arg.name) {
                diags.push(Diagnostic::error(format!(
                    "duplicate declaration: argument {} in message {}",
                    arg.name, schema.name
                )));
            }
            if arg.allowed.is_empty() {
                diags.push(Diagnostic::error(format!(
                    "argument {}.{} allows no concept",
                    schema.name, arg.name
                )));
            }
            for c in &arg.allowed {
                if c != MESSAGE_TYPE_LITERAL && !spec.ontology.concepts.contains_key(c) {
                    diags.push(Diagnostic::error(format!("dangling reference: {c}")));
                }
            }
        }
    }

    // Relation schemas.
    for rel in &spec.relations {
        validate_relation(spec, rel, &mut diags);
    }

    // Config.
    if spec.config.time_unit_minutes == 0 {
        diags.push(Diagnostic::error("time_unit_minutes must be positive"));
    }
    if let DiachronicPolicy::ExactDistance(k) = spec.config.diachronic_policy {
        if k == 0 {
            diags.push(Diagnostic::error("diachronic distance must be at least 1"));
        }
    }

    diags
}

fn validate_relation(spec: &TopicSpec, rel: &RelationSchema, diags: &mut Vec<Diagnostic>) {
    if rel.pairs.is_empty() {
        diags.push(Diagnostic::error(format!(
            "relation {} declares no message pair",
            rel.name
        )));
    }
    for (a, b) in &rel.pairs {
        for t in [a, b] {
            if !spec.schemas.contains_key(t) {
                diags.push(Diagnostic::error(format!("dangling reference: {t}")));
            }
        }
    }
    for atom in &rel.constraint.atoms {
        for (term, side) in [(&atom.lhs, Side::First), (&atom.rhs, Side::Second)] {
            let _ = side;
            if let Term::Arg(arg_ref) = term {
                // The referenced name must exist on the corresponding side of
                // every declared pair.
                for (a, b) in &rel.pairs {
                    let schema_name = match arg_ref.side {
                        Side::First => a,
                        Side::Second => b,
                    };
                    if let Some(schema) = spec.schemas.get(schema_name) {
                        if schema.arg(&arg_ref.name).is_none() {
                            diags.push(Diagnostic::error(format!(
                                "relation {}: message {} has no argument {}",
                                rel.name, schema_name, arg_ref.name
                            )));
                        }
                    }
                }
            }
        }
        match atom.op {
            CmpOp::Lt | CmpOp::Gt => {
                validate_ordered_atom(spec, rel, atom, diags);
            }
            CmpOp::Subsumes => {
                if !matches!(atom.lhs, Term::Arg(_)) {
                    diags.push(Diagnostic::error(format!(
                        "relation {}: subsumes needs an argument on the left",
                        rel.name
                    )));
                }
                match &atom.rhs {
                    Term::Literal(c) if spec.ontology.concepts.contains_key(c) => {}
                    Term::Literal(c) => {
                        diags.push(Diagnostic::error(format!("dangling reference: {c}")));
                    }
                    Term::Arg(_) => diags.push(Diagnostic::error(format!(
                        "relation {}: subsumes needs a concept literal on the right",
                        rel.name
                    ))),
                }
            }
            CmpOp::Eq | CmpOp::Neq => {}
        }
    }
    // Synchronic relations over a homogeneous pair are evaluated once per
    // unordered pair, which is only sound for symmetric constraints.
    if rel.rel_type == RelType::Synchronic
        && rel.pairs.iter().any(|(a, b)| a == b)
        && !is_symmetric(&rel.constraint)
    {
        diags.push(Diagnostic::warning(format!(
            "relation {}: asymmetric synchronic constraint over a homogeneous pair",
            rel.name
        )));
    }
}

fn validate_ordered_atom(
    spec: &TopicSpec,
    rel: &RelationSchema,
    atom: &Atom,
    diags: &mut Vec<Diagnostic>,
) {
    let mut saw_arg = false;
    for term in [&atom.lhs, &atom.rhs] {
        let Term::Arg(arg_ref) = term else { continue };
        saw_arg = true;
        for (a, b) in &rel.pairs {
            let schema_name = match arg_ref.side {
                Side::First => a,
                Side::Second => b,
            };
            let Some(arg) = spec
                .schemas
                .get(schema_name)
                .and_then(|s| s.arg(&arg_ref.name))
            else {
                continue; // already reported above
            };
            let scaled: Vec<&String> = arg
                .allowed
                .iter()
                .filter(|c| spec.ontology.ordered_scales.contains_key(c.as_str()))
                .collect();
            if scaled.is_empty() {
                let unordered = arg.allowed.iter().cloned().collect::<Vec<_>>().join(", ");
                diags.push(Diagnostic::error(format!(
                    "relation {}: {} over unordered concept {}",
                    rel.name,
                    if atom.op == CmpOp::Lt { "Lt" } else { "Gt" },
                    unordered
                )));
            } else if scaled.len() < arg.allowed.len() {
                diags.push(Diagnostic::warning(format!(
                    "relation {}: {}.{} mixes scaled and unscaled concepts",
                    rel.name, schema_name, arg_ref.name
                )));
            }
        }
    }
    if !saw_arg {
        diags.push(Diagnostic::error(format!(
            "relation {}: ordered comparison between two literals",
            rel.name
        )));
    }
}

/// Symmetric means every atom is `1.x = 2.x` or `1.x != 2.x` (same argument
/// name on both sides) or compares two literals.
fn is_symmetric(constraint: &ConstraintExpr) -> bool {
    constraint.atoms.iter().all(|atom| {
        if !matches!(atom.op, CmpOp::Eq | CmpOp::Neq) {
            return false;
        }
        match (&atom.lhs, &atom.rhs) {
            (Term::Arg(a), Term::Arg(b)) => a.name == b.name && a.side != b.side,
            (Term::Literal(_), Term::Literal(_)) => true,
            _ => false,
        }
    })
}

fn cycle_witness(ontology: &Ontology, start: &str) -> Option<String> {
    let mut seen = BTreeSet::new();
    let mut cur = start;
    loop {
        if !seen.insert(cur.to_string()) {
            return Some(cur.to_string());
        }
        cur = ontology.concepts.get(cur).and_then(|p| p.as_deref())?;
    }
}

/// True when the spec has no `Error`-severity violations.
pub fn is_valid(spec: &TopicSpec) -> bool {
    !validate_topic_spec(spec)
        .iter()
        .any(|d| d.severity == Severity::Error)
}
