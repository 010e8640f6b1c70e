//! Generic JSON puzzle documents.
//!
//! ```json
//! {
//!   "format-version": 1,
//!   "variables": [{ "name": "a", "domain": [1, 2, 3] }, { "name": "b", "domain": [1, 2, 3] }],
//!   "clauses": [
//!     { "kind": "alldiff", "scope": ["a", "b"] },
//!     { "kind": "sum", "scope": ["a", "b"], "total": 4, "distinct": true },
//!     { "kind": "cage", "scope": ["a", "b"], "op": "mul", "target": 3 },
//!     { "kind": "count", "scope": ["a", "b"], "clue": 1 },
//!     { "kind": "table", "scope": ["a", "b"], "entries": [[1, 3], [3, 1]] }
//!   ],
//!   "evidence": { "a": 1 }
//! }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::factor::{DomainTable, Evidence, Value, VarId};

use super::{CageOp, Clause, ClauseKind, CspInstance, ParseError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(rename = "format-version")]
    format_version: u32,
    variables: Vec<VariableDoc>,
    #[serde(default)]
    clauses: Vec<ClauseDoc>,
    #[serde(default)]
    evidence: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    domain: Vec<Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ClauseDoc {
    Alldiff {
        scope: Vec<String>,
    },
    Sum {
        scope: Vec<String>,
        total: u32,
        #[serde(default)]
        distinct: bool,
    },
    Cage {
        scope: Vec<String>,
        op: CageOp,
        target: u32,
    },
    Count {
        scope: Vec<String>,
        clue: u32,
    },
    Table {
        scope: Vec<String>,
        entries: Vec<Vec<Value>>,
    },
}

/// Parses and validates a generic puzzle document.
pub fn parse_generic(text: &str) -> Result<CspInstance, ParseError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(ParseError::schema(
            "format-version",
            format!("unsupported version {} (expected {FORMAT_VERSION})", doc.format_version),
        ));
    }

    let names: Vec<String> = doc.variables.iter().map(|v| v.name.clone()).collect();
    let mut index = BTreeMap::new();
    for (i, v) in doc.variables.iter().enumerate() {
        if index.insert(v.name.as_str(), VarId(i as u32)).is_some() {
            return Err(ParseError::schema(
                format!("variables[{i}].name"),
                format!("duplicate name `{}`", v.name),
            ));
        }
    }
    let domains = DomainTable::new(doc.variables.iter().map(|v| v.domain.iter().copied()));

    let resolve = |field: String, scope: &[String]| -> Result<Vec<VarId>, ParseError> {
        scope
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| ParseError::schema(field.clone(), format!("unknown variable `{n}`")))
            })
            .collect()
    };

    let mut clauses = Vec::with_capacity(doc.clauses.len());
    for (i, c) in doc.clauses.iter().enumerate() {
        let field = format!("clauses[{i}].scope");
        let (scope, kind) = match c {
            ClauseDoc::Alldiff { scope } => (scope, ClauseKind::AllDiff),
            ClauseDoc::Sum { scope, total, distinct } => (
                scope,
                ClauseKind::Sum {
                    total: *total,
                    distinct: *distinct,
                },
            ),
            ClauseDoc::Cage { scope, op, target } => (
                scope,
                ClauseKind::Cage {
                    op: *op,
                    target: *target,
                },
            ),
            ClauseDoc::Count { scope, clue } => (scope, ClauseKind::Count { clue: *clue }),
            ClauseDoc::Table { scope, entries } => (scope, ClauseKind::Table { rows: entries.clone() }),
        };
        clauses.push(Clause {
            kind,
            scope: resolve(field, scope)?,
        });
    }

    let mut evidence = Evidence::new();
    for (name, &value) in &doc.evidence {
        let var = index
            .get(name.as_str())
            .copied()
            .ok_or_else(|| ParseError::schema("evidence", format!("unknown variable `{name}`")))?;
        evidence.insert(var, value).expect("map keys are unique");
    }

    let instance = CspInstance {
        names,
        domains,
        clauses,
        evidence,
    };
    instance.validate()?;
    Ok(instance)
}

/// Serialises an instance as a generic document.
pub fn to_generic(instance: &CspInstance) -> String {
    let names = |scope: &[VarId]| scope.iter().map(|&v| instance.name(v).to_string()).collect();
    let doc = Document {
        format_version: FORMAT_VERSION,
        variables: instance
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| VariableDoc {
                name: n.clone(),
                domain: instance.domains.values(VarId(i as u32)),
            })
            .collect(),
        clauses: instance
            .clauses
            .iter()
            .map(|c| match &c.kind {
                ClauseKind::AllDiff => ClauseDoc::Alldiff { scope: names(&c.scope) },
                ClauseKind::Sum { total, distinct } => ClauseDoc::Sum {
                    scope: names(&c.scope),
                    total: *total,
                    distinct: *distinct,
                },
                ClauseKind::Cage { op, target } => ClauseDoc::Cage {
                    scope: names(&c.scope),
                    op: *op,
                    target: *target,
                },
                ClauseKind::Count { clue } => ClauseDoc::Count {
                    scope: names(&c.scope),
                    clue: *clue,
                },
                ClauseKind::Table { rows } => ClauseDoc::Table {
                    scope: names(&c.scope),
                    entries: rows.clone(),
                },
            })
            .collect(),
        evidence: instance
            .evidence
            .iter()
            .map(|(v, x)| (instance.name(v).to_string(), x))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("document serialises")
}
