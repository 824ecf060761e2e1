//! Parser for the sectioned `.topic` text format.
//!
//! Sections (any order): `TOPIC name`, `CONFIG { .. }`, `ONTOLOGY { .. }`,
//! `MESSAGES { .. }`, `RELATIONS { .. }`. `#` starts a comment. Conjunction
//! is spelled `and`, inequality `!=`, argument unions `A | B`.

use super::*;
use crate::diag::Severity;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl ParseError {
    fn new(line: u32, col: u32, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

/// Parse and fully validate a topic spec. Either every invariant of the
/// returned spec holds, or a `ParseError` names the first violation.
pub fn parse_topic_spec(text: &str) -> Result<TopicSpec, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
    };
    let spec = parser.file()?;

    // Cross-reference closure and the remaining semantic invariants share
    // the checker with `validate_topic_spec`; the first error rejects the
    // input, positioned at the first occurrence of the identifier it names.
    let diags = validate_topic_spec(&spec);
    if let Some(err) = diags.iter().find(|d| d.severity == Severity::Error) {
        let (line, col) = locate(&err.message, &tokens);
        return Err(ParseError::new(line, col, err.message.clone()));
    }
    Ok(spec)
}

fn locate(message: &str, tokens: &[Token]) -> (u32, u32) {
    let mut best: Option<(&str, (u32, u32))> = None;
    for t in tokens {
        let text = match &t.kind {
            TokKind::Ident(s) | TokKind::Str(s) => s.as_str(),
            _ => continue,
        };
        if message.contains(text) {
            match best {
                Some((old, _)) if old.len() >= text.len() => {}
                _ => best = Some((text, (t.line, t.col))),
            }
        }
    }
    best.map(|(_, pos)| pos).unwrap_or((0, 0))
}

// ──────────────────────────────────────────────
// Lexer
// ──────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokKind {
    Ident(String),
    Str(String),
    Int(i64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    Lt,
    Gt,
    Pipe,
    Dot,
    Eq,
    Neq,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match chars.peek() {
                        Some('"') => {
                            bump(&mut chars);
                            break;
                        }
                        Some('\n') | None => {
                            return Err(ParseError::new(tline, tcol, "unterminated string"));
                        }
                        Some(_) => s.push(bump(&mut chars)),
                    }
                }
                tokens.push(Token {
                    kind: TokKind::Str(s),
                    line: tline,
                    col: tcol,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokKind::Ident(s),
                    line: tline,
                    col: tcol,
                });
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut s = String::new();
                s.push(bump(&mut chars));
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                let n: i64 = s
                    .parse()
                    .map_err(|_| ParseError::new(tline, tcol, format!("bad integer {s:?}")))?;
                tokens.push(Token {
                    kind: TokKind::Int(n),
                    line: tline,
                    col: tcol,
                });
            }
            '!' => {
                bump(&mut chars);
                match chars.peek() {
                    Some('=') => {
                        bump(&mut chars);
                        tokens.push(Token {
                            kind: TokKind::Neq,
                            line: tline,
                            col: tcol,
                        });
                    }
                    _ => return Err(ParseError::new(tline, tcol, "expected != ")),
                }
            }
            _ => {
                let kind = match c {
                    '{' => TokKind::LBrace,
                    '}' => TokKind::RBrace,
                    '(' => TokKind::LParen,
                    ')' => TokKind::RParen,
                    ':' => TokKind::Colon,
                    ',' => TokKind::Comma,
                    '<' => TokKind::Lt,
                    '>' => TokKind::Gt,
                    '|' => TokKind::Pipe,
                    '.' => TokKind::Dot,
                    '=' => TokKind::Eq,
                    other => {
                        return Err(ParseError::new(
                            tline,
                            tcol,
                            format!("unexpected character {other:?}"),
                        ));
                    }
                };
                bump(&mut chars);
                tokens.push(Token {
                    kind,
                    line: tline,
                    col: tcol,
                });
            }
        }
    }
    Ok(tokens)
}

// ──────────────────────────────────────────────
// Parser
// ──────────────────────────────────────────────

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn here(&self) -> (u32, u32) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.col))
                .unwrap_or((1, 1)),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::new(line, col, msg)
    }

    fn expect(&mut self, kind: &TokKind, what: &str) -> Result<&'a Token, ParseError> {
        match self.peek() {
            Some(t) if &t.kind == kind => Ok(self.next().unwrap()),
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, u32, u32), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Ident(s),
                line,
                col,
            }) => {
                let out = (s.clone(), *line, *col);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if let Some(Token {
            kind: TokKind::Ident(s),
            ..
        }) = self.peek()
        {
            if s == kw {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn file(&mut self) -> Result<TopicSpec, ParseError> {
        let mut spec = TopicSpec {
            name: "topic".into(),
            ontology: Ontology::default(),
            schemas: BTreeMap::new(),
            relations: Vec::new(),
            config: TopicConfig::default(),
        };
        while let Some(t) = self.peek() {
            let TokKind::Ident(section) = &t.kind else {
                return Err(self.err("expected a section keyword"));
            };
            match section.as_str() {
                "TOPIC" => {
                    self.next();
                    spec.name = self.ident("topic name")?.0;
                }
                "CONFIG" => {
                    self.next();
                    self.config_section(&mut spec.config)?;
                }
                "ONTOLOGY" => {
                    self.next();
                    self.ontology_section(&mut spec.ontology)?;
                }
                "MESSAGES" => {
                    self.next();
                    self.messages_section(&mut spec.schemas)?;
                }
                "RELATIONS" => {
                    self.next();
                    self.relations_section(&mut spec.relations)?;
                }
                other => {
                    return Err(self.err(format!("unknown section {other}")));
                }
            }
        }
        Ok(spec)
    }

    fn config_section(&mut self, config: &mut TopicConfig) -> Result<(), ParseError> {
        self.expect(&TokKind::LBrace, "{")?;
        loop {
            if let Some(Token {
                kind: TokKind::RBrace,
                ..
            }) = self.peek()
            {
                self.next();
                return Ok(());
            }
            let (key, line, col) = self.ident("config key")?;
            self.expect(&TokKind::Colon, ":")?;
            match key.as_str() {
                "time_unit_minutes" => {
                    let n = self.positive_int("time_unit_minutes")?;
                    config.time_unit_minutes = n;
                }
                "sync_window_minutes" => {
                    let n = self.nonnegative_int("sync_window_minutes")?;
                    config.sync_window_minutes = n;
                }
                "diachronic_distance" => {
                    if self.keyword("unbounded") {
                        config.diachronic_policy = DiachronicPolicy::Unbounded;
                    } else if self.keyword("exact") {
                        let k = self.positive_int("distance")?;
                        config.diachronic_policy = DiachronicPolicy::ExactDistance(k);
                    } else {
                        return Err(self.err("expected unbounded or exact <k>"));
                    }
                }
                "planner_mode" => {
                    if self.keyword("linear") {
                        config.planner_mode = PlannerMode::Linear;
                    } else if self.keyword("nonlinear") {
                        config.planner_mode = PlannerMode::NonLinear;
                    } else {
                        return Err(self.err("expected linear or nonlinear"));
                    }
                }
                other => {
                    return Err(ParseError::new(
                        line,
                        col,
                        format!("unknown config key {other}"),
                    ));
                }
            }
        }
    }

    fn positive_int(&mut self, what: &str) -> Result<u32, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Int(n),
                ..
            }) if *n >= 1 && *n <= u32::MAX as i64 => {
                let n = *n as u32;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(format!("{what} must be a positive integer"))),
        }
    }

    fn nonnegative_int(&mut self, what: &str) -> Result<u32, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Int(n),
                ..
            }) if *n >= 0 && *n <= u32::MAX as i64 => {
                let n = *n as u32;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(format!("{what} must be a non-negative integer"))),
        }
    }

    fn ontology_section(&mut self, ontology: &mut Ontology) -> Result<(), ParseError> {
        self.expect(&TokKind::LBrace, "{")?;
        loop {
            if let Some(Token {
                kind: TokKind::RBrace,
                ..
            }) = self.peek()
            {
                self.next();
                return Ok(());
            }
            if self.keyword("CONCEPT") {
                let (name, line, col) = self.ident("concept name")?;
                let parent = if let Some(Token {
                    kind: TokKind::Lt, ..
                }) = self.peek()
                {
                    self.next();
                    Some(self.ident("parent concept")?.0)
                } else {
                    None
                };
                if ontology.concepts.insert(name.clone(), parent).is_some() {
                    return Err(ParseError::new(
                        line,
                        col,
                        format!("duplicate declaration: {name}"),
                    ));
                }
            } else if self.keyword("INSTANCE") {
                let (id, line, col) = self.string_or_ident("entity id")?;
                self.expect(&TokKind::Colon, ":")?;
                let concept = self.ident("concept name")?.0;
                if ontology.instances.insert(id.clone(), concept).is_some() {
                    return Err(ParseError::new(
                        line,
                        col,
                        format!("duplicate declaration: {id}"),
                    ));
                }
            } else if self.keyword("SCALE") {
                let (concept, line, col) = self.ident("concept name")?;
                self.expect(&TokKind::Colon, ":")?;
                let mut values = vec![self.string_or_ident("scale value")?.0];
                while let Some(Token {
                    kind: TokKind::Lt, ..
                }) = self.peek()
                {
                    self.next();
                    values.push(self.string_or_ident("scale value")?.0);
                }
                if ontology
                    .ordered_scales
                    .insert(concept.clone(), values)
                    .is_some()
                {
                    return Err(ParseError::new(
                        line,
                        col,
                        format!("duplicate declaration: {concept}"),
                    ));
                }
            } else {
                return Err(self.err("expected CONCEPT, INSTANCE or SCALE"));
            }
        }
    }

    fn string_or_ident(&mut self, what: &str) -> Result<(String, u32, u32), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Str(s),
                line,
                col,
            }) => {
                let out = (s.clone(), *line, *col);
                self.pos += 1;
                Ok(out)
            }
            _ => self.ident(what),
        }
    }

    fn messages_section(
        &mut self,
        schemas: &mut BTreeMap<String, MessageSchema>,
    ) -> Result<(), ParseError> {
        self.expect(&TokKind::LBrace, "{")?;
        loop {
            if let Some(Token {
                kind: TokKind::RBrace,
                ..
            }) = self.peek()
            {
                self.next();
                return Ok(());
            }
            if !self.keyword("MESSAGE") {
                return Err(self.err("expected MESSAGE"));
            }
            let (name, line, col) = self.ident("message type name")?;
            self.expect(&TokKind::LParen, "(")?;
            let mut args = Vec::new();
            if !matches!(
                self.peek(),
                Some(Token {
                    kind: TokKind::RParen,
                    ..
                })
            ) {
                loop {
                    let (arg_name, aline, acol) = self.ident("argument name")?;
                    self.expect(&TokKind::Colon, ":")?;
                    let mut allowed = BTreeSet::new();
                    allowed.insert(self.ident("concept name")?.0);
                    while let Some(Token {
                        kind: TokKind::Pipe,
                        ..
                    }) = self.peek()
                    {
                        self.next();
                        allowed.insert(self.ident("concept name")?.0);
                    }
                    if args.iter().any(|a: &ArgDecl| a.name == arg_name) {
                        return Err(ParseError::new(
                            aline,
                            acol,
                            format!("duplicate declaration: {arg_name}"),
                        ));
                    }
                    args.push(ArgDecl {
                        name: arg_name,
                        allowed,
                    });
                    if let Some(Token {
                        kind: TokKind::Comma,
                        ..
                    }) = self.peek()
                    {
                        self.next();
                    } else {
                        break;
                    }
                }
            }
            self.expect(&TokKind::RParen, ")")?;
            let schema = MessageSchema {
                name: name.clone(),
                args,
            };
            if schemas.insert(name.clone(), schema).is_some() {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("duplicate declaration: {name}"),
                ));
            }
        }
    }

    fn relations_section(&mut self, relations: &mut Vec<RelationSchema>) -> Result<(), ParseError> {
        self.expect(&TokKind::LBrace, "{")?;
        loop {
            if let Some(Token {
                kind: TokKind::RBrace,
                ..
            }) = self.peek()
            {
                self.next();
                return Ok(());
            }
            if !self.keyword("RELATION") {
                return Err(self.err("expected RELATION"));
            }
            let name = self.ident("relation name")?.0;
            self.expect(&TokKind::LBrace, "{")?;
            let mut rel_type = None;
            let mut pairs = BTreeSet::new();
            let mut constraint = ConstraintExpr::default();
            loop {
                if let Some(Token {
                    kind: TokKind::RBrace,
                    ..
                }) = self.peek()
                {
                    self.next();
                    break;
                }
                if self.keyword("type") {
                    self.expect(&TokKind::Colon, ":")?;
                    rel_type = Some(if self.keyword("synchronic") {
                        RelType::Synchronic
                    } else if self.keyword("diachronic") {
                        RelType::Diachronic
                    } else {
                        return Err(self.err("expected synchronic or diachronic"));
                    });
                } else if self.keyword("pairs") {
                    self.expect(&TokKind::Colon, ":")?;
                    loop {
                        self.expect(&TokKind::LParen, "(")?;
                        let a = self.ident("message type")?.0;
                        self.expect(&TokKind::Comma, ",")?;
                        let b = self.ident("message type")?.0;
                        self.expect(&TokKind::RParen, ")")?;
                        pairs.insert((a, b));
                        if let Some(Token {
                            kind: TokKind::Comma,
                            ..
                        }) = self.peek()
                        {
                            self.next();
                        } else {
                            break;
                        }
                    }
                } else if self.keyword("constraint") {
                    self.expect(&TokKind::Colon, ":")?;
                    constraint.atoms.push(self.atom()?);
                    while self.keyword("and") {
                        constraint.atoms.push(self.atom()?);
                    }
                } else {
                    return Err(self.err("expected type, pairs or constraint"));
                }
            }
            let rel_type = rel_type.ok_or_else(|| {
                self.err(format!("relation {name} is missing its type declaration"))
            })?;
            relations.push(RelationSchema {
                name,
                rel_type,
                pairs,
                constraint,
            });
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let lhs = self.term()?;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokKind::Eq) => CmpOp::Eq,
            Some(TokKind::Neq) => CmpOp::Neq,
            Some(TokKind::Lt) => CmpOp::Lt,
            Some(TokKind::Gt) => CmpOp::Gt,
            Some(TokKind::Ident(s)) if s == "subsumes" => CmpOp::Subsumes,
            _ => return Err(self.err("expected =, !=, <, > or subsumes")),
        };
        self.next();
        let rhs = self.term()?;
        Ok(Atom { lhs, op, rhs })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Int(n),
                ..
            }) => {
                let side = match n {
                    1 => Side::First,
                    2 => Side::Second,
                    _ => return Err(self.err("argument side must be 1 or 2")),
                };
                self.next();
                self.expect(&TokKind::Dot, ".")?;
                let name = self.ident("argument name")?.0;
                Ok(Term::Arg(ArgRef { side, name }))
            }
            Some(Token {
                kind: TokKind::Str(s),
                ..
            }) => {
                let lit = s.clone();
                self.next();
                Ok(Term::Literal(lit))
            }
            Some(Token {
                kind: TokKind::Ident(s),
                ..
            }) => {
                let lit = s.clone();
                self.next();
                Ok(Term::Literal(lit))
            }
            _ => Err(self.err("expected 1.<arg>, 2.<arg> or a literal")),
        }
    }
}
