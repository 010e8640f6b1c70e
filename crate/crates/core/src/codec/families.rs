//! Builders for the cage- and clue-based puzzle families. Cells are named `r{row}c{col}`,
//! 1-based, like the plain Sudoku encoder.

use std::collections::BTreeMap;

use crate::factor::{DomainTable, Evidence, Value, VarId};

use super::{sudoku_instance, CageOp, Clause, ClauseKind, CspInstance, ParseError};

/// Zero-based grid coordinate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    fn name(self) -> String {
        format!("r{}c{}", self.row + 1, self.col + 1)
    }
}

fn grid_var(n: usize, cell: Cell, field: &str) -> Result<VarId, ParseError> {
    if cell.row >= n || cell.col >= n {
        return Err(ParseError::schema(
            field,
            format!("cell {} outside the {n}×{n} grid", cell.name()),
        ));
    }
    Ok(VarId((cell.row * n + cell.col) as u32))
}

/// Killer Sudoku: the 27 unit constraints plus one distinct-sum clause per cage.
pub fn killer_sudoku(givens: &[Option<Value>], cages: &[(u32, Vec<Cell>)]) -> Result<CspInstance, ParseError> {
    let mut inst = sudoku_instance(9, givens)?;
    for (i, (total, cells)) in cages.iter().enumerate() {
        let scope = cells
            .iter()
            .map(|&c| grid_var(9, c, &format!("cages[{i}]")))
            .collect::<Result<_, _>>()?;
        inst.clauses.push(Clause {
            kind: ClauseKind::Sum {
                total: *total,
                distinct: true,
            },
            scope,
        });
    }
    inst.validate()?;
    Ok(inst)
}

/// Calcudoku (KenKen) on an `n×n` Latin square with values `1..=n`.
pub fn calcudoku(n: usize, cages: &[(CageOp, u32, Vec<Cell>)]) -> Result<CspInstance, ParseError> {
    if n == 0 || n > 9 {
        return Err(ParseError::schema("size", format!("unsupported grid size {n}")));
    }
    let names = (0..n * n).map(|i| Cell::new(i / n, i % n).name()).collect();
    let domains = DomainTable::uniform(n * n, 1..=n as Value);
    let cell = |r: usize, c: usize| VarId((r * n + c) as u32);
    let mut clauses: Vec<Clause> = (0..n)
        .map(|r| (0..n).map(|c| cell(r, c)).collect())
        .chain((0..n).map(|c| (0..n).map(|r| cell(r, c)).collect()))
        .map(|scope| Clause {
            kind: ClauseKind::AllDiff,
            scope,
        })
        .collect();
    for (i, (op, target, cells)) in cages.iter().enumerate() {
        let scope = cells
            .iter()
            .map(|&c| grid_var(n, c, &format!("cages[{i}]")))
            .collect::<Result<_, _>>()?;
        clauses.push(Clause {
            kind: ClauseKind::Cage {
                op: *op,
                target: *target,
            },
            scope,
        });
    }
    let inst = CspInstance {
        names,
        domains,
        clauses,
        evidence: Evidence::new(),
    };
    inst.validate()?;
    Ok(inst)
}

/// Kakuro from its runs. Only cells that appear in some run become variables,
/// numbered in row-major order, with domain `1..=9`.
pub fn kakuro(runs: &[(u32, Vec<Cell>)]) -> Result<CspInstance, ParseError> {
    let cells: BTreeMap<Cell, VarId> = {
        let mut all: Vec<Cell> = runs.iter().flat_map(|(_, cs)| cs.iter().copied()).collect();
        all.sort();
        all.dedup();
        all.into_iter().enumerate().map(|(i, c)| (c, VarId(i as u32))).collect()
    };
    let names = cells.keys().map(|c| c.name()).collect();
    let domains = DomainTable::uniform(cells.len(), 1..=9);
    let clauses = runs
        .iter()
        .map(|(total, cs)| Clause {
            kind: ClauseKind::Sum {
                total: *total,
                distinct: true,
            },
            scope: cs.iter().map(|c| cells[c]).collect(),
        })
        .collect();
    let inst = CspInstance {
        names,
        domains,
        clauses,
        evidence: Evidence::new(),
    };
    inst.validate()?;
    Ok(inst)
}

/// Fill-a-pix over a rectangular clue grid. Every cell is binary; each clue counts
/// the filled cells in the 3×3 block around it, itself included.
pub fn fill_a_pix(clues: &[Vec<Option<u8>>]) -> Result<CspInstance, ParseError> {
    let rows = clues.len();
    let cols = clues.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(ParseError::schema("clues", "grid is empty"));
    }
    if let Some(r) = clues.iter().position(|row| row.len() != cols) {
        return Err(ParseError::schema(format!("clues[{r}]"), "ragged row"));
    }
    let names = (0..rows * cols).map(|i| Cell::new(i / cols, i % cols).name()).collect();
    let domains = DomainTable::uniform(rows * cols, [0, 1]);
    let var = |r: usize, c: usize| VarId((r * cols + c) as u32);
    let mut clauses = Vec::new();
    for (r, row) in clues.iter().enumerate() {
        for (c, clue) in row.iter().enumerate() {
            let Some(clue) = *clue else { continue };
            let mut scope = Vec::with_capacity(9);
            for rr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    scope.push(var(rr, cc));
                }
            }
            clauses.push(Clause {
                kind: ClauseKind::Count { clue: u32::from(clue) },
                scope,
            });
        }
    }
    let inst = CspInstance {
        names,
        domains,
        clauses,
        evidence: Evidence::new(),
    };
    inst.validate()?;
    Ok(inst)
}
