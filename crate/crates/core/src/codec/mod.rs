//! CSP instances, puzzle file formats and clause encoders.

mod encode;
mod families;
mod generic;
mod sudoku;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{DomainTable, Evidence, Value, VarId};

pub use encode::{
    encode_alldiff, encode_arithmetic_cage, encode_clause, encode_count_clause, encode_sum_clause, encode_table,
};
pub use families::{calcudoku, fill_a_pix, kakuro, killer_sudoku, Cell};
pub use generic::{parse_generic, to_generic};
pub use sudoku::{format_grid, parse_sudoku, parse_sudoku_corpus, sudoku_instance, to_sudoku_line};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("expected 16 or 81 cells, found {0}")]
    Length(usize),
    #[error("invalid character {ch:?} at cell {cell}")]
    InvalidChar { ch: char, cell: usize },
    #[error("given {value} appears twice in {unit}")]
    DuplicateGiven { value: Value, unit: String },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
}

impl ParseError {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CageOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl CageOp {
    pub fn name(self) -> &'static str {
        match self {
            CageOp::Add => "add",
            CageOp::Sub => "sub",
            CageOp::Mul => "mul",
            CageOp::Div => "div",
        }
    }
}

impl fmt::Display for CageOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CageOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" | "+" => Ok(CageOp::Add),
            "sub" | "-" => Ok(CageOp::Sub),
            "mul" | "*" | "x" => Ok(CageOp::Mul),
            "div" | "/" => Ok(CageOp::Div),
            _ => Err(format!("unknown cage operation `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClauseKind {
    /// Pairwise distinct values.
    AllDiff,
    /// Values sum to `total`, optionally pairwise distinct.
    Sum { total: u32, distinct: bool },
    /// Arithmetic cage. `Sub` and `Div` take exactly two cells and are order-free.
    Cage { op: CageOp, target: u32 },
    /// Exactly `clue` cells take the value 1.
    Count { clue: u32 },
    /// Explicit list of allowed rows, in scope order.
    Table { rows: Vec<Vec<Value>> },
}

impl ClauseKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClauseKind::AllDiff => "alldiff",
            ClauseKind::Sum { .. } => "sum",
            ClauseKind::Cage { .. } => "cage",
            ClauseKind::Count { .. } => "count",
            ClauseKind::Table { .. } => "table",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub kind: ClauseKind,
    /// Variables in declaration order; [`ClauseKind::Table`] rows follow this order.
    pub scope: Vec<VarId>,
}

/// Variables with finite domains, clauses over them and observed values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CspInstance {
    pub names: Vec<String>,
    pub domains: DomainTable,
    pub clauses: Vec<Clause>,
    pub evidence: Evidence,
}

impl CspInstance {
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, var: VarId) -> &str {
        &self.names[var.index()]
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(|i| VarId(i as u32))
    }

    /// Checks the structural invariants: names unique, non-empty domains, clause scopes
    /// valid and free of repeats, kind-specific shapes, evidence inside domains.
    pub fn validate(&self) -> Result<(), ParseError> {
        if self.names.len() != self.domains.len() {
            return Err(ParseError::schema("variables", "one domain per variable is required"));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, name) in self.names.iter().enumerate() {
            if !seen.insert(name) {
                return Err(ParseError::schema(
                    format!("variables[{i}].name"),
                    format!("duplicate name `{name}`"),
                ));
            }
            if self.domains.get(VarId(i as u32)).is_empty() {
                return Err(ParseError::schema(format!("variables[{i}].domain"), "domain is empty"));
            }
        }
        for (i, clause) in self.clauses.iter().enumerate() {
            let field = |f: &str| format!("clauses[{i}].{f}");
            if clause.scope.is_empty() {
                return Err(ParseError::schema(field("scope"), "scope is empty"));
            }
            let mut vars = std::collections::HashSet::new();
            for v in &clause.scope {
                if v.index() >= self.num_vars() {
                    return Err(ParseError::schema(field("scope"), format!("unknown variable {v}")));
                }
                if !vars.insert(v) {
                    return Err(ParseError::schema(
                        field("scope"),
                        format!("variable `{}` listed twice", self.name(*v)),
                    ));
                }
            }
            match &clause.kind {
                ClauseKind::Cage {
                    op: CageOp::Sub | CageOp::Div,
                    ..
                } if clause.scope.len() != 2 => {
                    return Err(ParseError::schema(
                        field("scope"),
                        "sub and div cages need exactly two cells",
                    ));
                }
                ClauseKind::Table { rows } => {
                    if let Some(r) = rows.iter().position(|r| r.len() != clause.scope.len()) {
                        return Err(ParseError::schema(
                            format!("clauses[{i}].entries[{r}]"),
                            "entry length differs from scope length",
                        ));
                    }
                }
                _ => {}
            }
        }
        for (var, value) in self.evidence.iter() {
            if var.index() >= self.num_vars() {
                return Err(ParseError::schema("evidence", format!("unknown variable {var}")));
            }
            if !self.domains.get(var).contains(value) {
                return Err(ParseError::schema(
                    format!("evidence.{}", self.name(var)),
                    format!("value {value} outside the domain"),
                ));
            }
        }
        Ok(())
    }
}
