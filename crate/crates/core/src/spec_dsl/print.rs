//! Canonical pretty-printer for topic specs. Reparsing the output yields a
//! structurally equal spec.

use super::*;
use std::fmt::Write;

pub fn print_topic_spec(spec: &TopicSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "TOPIC {}", spec.name);
    out.push('\n');

    let _ = writeln!(out, "CONFIG {{");
    let _ = writeln!(
        out,
        "  time_unit_minutes: {}",
        spec.config.time_unit_minutes
    );
    let _ = writeln!(
        out,
        "  sync_window_minutes: {}",
        spec.config.sync_window_minutes
    );
    match spec.config.diachronic_policy {
        DiachronicPolicy::Unbounded => {
            let _ = writeln!(out, "  diachronic_distance: unbounded");
        }
        DiachronicPolicy::ExactDistance(k) => {
            let _ = writeln!(out, "  diachronic_distance: exact {k}");
        }
    }
    let mode = match spec.config.planner_mode {
        PlannerMode::Linear => "linear",
        PlannerMode::NonLinear => "nonlinear",
    };
    let _ = writeln!(out, "  planner_mode: {mode}");
    let _ = writeln!(out, "}}");
    out.push('\n');

    let _ = writeln!(out, "ONTOLOGY {{");
    for (name, parent) in &spec.ontology.concepts {
        match parent {
            Some(p) => {
                let _ = writeln!(out, "  CONCEPT {name} < {p}");
            }
            None => {
                let _ = writeln!(out, "  CONCEPT {name}");
            }
        }
    }
    for (entity, concept) in &spec.ontology.instances {
        let _ = writeln!(out, "  INSTANCE {} : {concept}", quote(entity));
    }
    for (concept, values) in &spec.ontology.ordered_scales {
        let rendered: Vec<String> = values.iter().map(|v| atom_text(v)).collect();
        let _ = writeln!(out, "  SCALE {concept}: {}", rendered.join(" < "));
    }
    let _ = writeln!(out, "}}");
    out.push('\n');

    let _ = writeln!(out, "MESSAGES {{");
    for schema in spec.schemas.values() {
        let args: Vec<String> = schema
            .args
            .iter()
            .map(|a| {
                let union: Vec<&str> = a.allowed.iter().map(|s| s.as_str()).collect();
                format!("{}: {}", a.name, union.join(" | "))
            })
            .collect();
        let _ = writeln!(out, "  MESSAGE {} ({})", schema.name, args.join(", "));
    }
    let _ = writeln!(out, "}}");
    out.push('\n');

    let _ = writeln!(out, "RELATIONS {{");
    for rel in &spec.relations {
        let _ = writeln!(out, "  RELATION {} {{", rel.name);
        let _ = writeln!(out, "    type: {}", rel.rel_type);
        if !rel.pairs.is_empty() {
            let pairs: Vec<String> = rel
                .pairs
                .iter()
                .map(|(a, b)| format!("({a}, {b})"))
                .collect();
            let _ = writeln!(out, "    pairs: {}", pairs.join(", "));
        }
        if !rel.constraint.atoms.is_empty() {
            let atoms: Vec<String> = rel.constraint.atoms.iter().map(atom_string).collect();
            let _ = writeln!(out, "    constraint: {}", atoms.join(" and "));
        }
        let _ = writeln!(out, "  }}");
    }
    let _ = writeln!(out, "}}");
    out
}

fn atom_string(atom: &Atom) -> String {
    let op = match atom.op {
        CmpOp::Eq => "=",
        CmpOp::Neq => "!=",
        CmpOp::Lt => "<",
        CmpOp::Gt => ">",
        CmpOp::Subsumes => "subsumes",
    };
    format!("{} {op} {}", term_text(&atom.lhs), term_text(&atom.rhs))
}

fn term_text(term: &Term) -> String {
    match term {
        Term::Arg(a) => {
            let side = match a.side {
                Side::First => 1,
                Side::Second => 2,
            };
            format!("{side}.{}", a.name)
        }
        Term::Literal(s) => atom_text(s),
    }
}

fn is_bare_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn atom_text(s: &str) -> String {
    if is_bare_ident(s) {
        s.to_string()
    } else {
        quote(s)
    }
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

#[cfg(test)]
mod tests {
    use super::super::parse_topic_spec;
    use super::*;

    #[test]
    fn print_then_parse_is_identity() {
        let text = r#"
            TOPIC hijack
            CONFIG {
                time_unit_minutes: 60
                sync_window_minutes: 60
                diachronic_distance: exact 2
                planner_mode: nonlinear
            }
            ONTOLOGY {
                CONCEPT Vehicle
                CONCEPT Plane < Vehicle
                CONCEPT Degree
                INSTANCE "Boeing 747" : Plane
                SCALE Degree: low < average < good < excellent
            }
            MESSAGES {
                MESSAGE arrive (vehicle: Vehicle, value: Degree)
            }
            RELATIONS {
                RELATION Graduation {
                    type: diachronic
                    pairs: (arrive, arrive)
                    constraint: 1.vehicle = 2.vehicle and 1.value < 2.value
                }
            }
        "#;
        let spec = parse_topic_spec(text).unwrap();
        let printed = print_topic_spec(&spec);
        let reparsed = parse_topic_spec(&printed).unwrap_or_else(|e| {
            panic!("printed spec failed to reparse: {e}\n{printed}");
        });
        assert_eq!(spec, reparsed);
    }
}
