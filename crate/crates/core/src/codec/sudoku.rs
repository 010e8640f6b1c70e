//! Sudoku text format: one puzzle per line, 81 (or 16 for 4×4) cells in row-major
//! order, `.` or `0` for blanks. Lines starting with `#` are comments.

use crate::factor::{DomainTable, Evidence, Value, VarId};

use super::{Clause, ClauseKind, CspInstance, ParseError};

/// Builds the instance for an `n×n` grid (n = 4 or 9) from row-major givens.
pub fn sudoku_instance(n: usize, givens: &[Option<Value>]) -> Result<CspInstance, ParseError> {
    let box_size = match n {
        4 => 2,
        9 => 3,
        _ => return Err(ParseError::Length(n * n)),
    };
    if givens.len() != n * n {
        return Err(ParseError::Length(givens.len()));
    }
    let names = (0..n * n).map(|i| format!("r{}c{}", i / n + 1, i % n + 1)).collect();
    let domains = DomainTable::uniform(n * n, 1..=n as Value);
    let cell = |r: usize, c: usize| VarId((r * n + c) as u32);

    let mut units: Vec<(String, Vec<VarId>)> = Vec::with_capacity(3 * n);
    for r in 0..n {
        units.push((format!("row {}", r + 1), (0..n).map(|c| cell(r, c)).collect()));
    }
    for c in 0..n {
        units.push((format!("column {}", c + 1), (0..n).map(|r| cell(r, c)).collect()));
    }
    for b in 0..n {
        let (br, bc) = (b / box_size * box_size, b % box_size * box_size);
        units.push((
            format!("box {}", b + 1),
            (0..n).map(|k| cell(br + k / box_size, bc + k % box_size)).collect(),
        ));
    }

    let mut evidence = Evidence::new();
    for (i, g) in givens.iter().enumerate() {
        if let Some(x) = *g {
            if x == 0 || x as usize > n {
                return Err(ParseError::InvalidChar {
                    ch: char::from_digit(u32::from(x), 10).unwrap_or('?'),
                    cell: i,
                });
            }
            evidence.insert(VarId(i as u32), x).expect("one given per cell");
        }
    }
    for (label, vars) in &units {
        let mut seen = [false; 10];
        for v in vars {
            if let Some(x) = evidence.get(*v) {
                if std::mem::replace(&mut seen[x as usize], true) {
                    return Err(ParseError::DuplicateGiven {
                        value: x,
                        unit: label.clone(),
                    });
                }
            }
        }
    }

    let clauses = units
        .into_iter()
        .map(|(_, scope)| Clause {
            kind: ClauseKind::AllDiff,
            scope,
        })
        .collect();
    Ok(CspInstance {
        names,
        domains,
        clauses,
        evidence,
    })
}

/// Parses a single puzzle. Comment lines and all whitespace are ignored.
pub fn parse_sudoku(text: &str) -> Result<CspInstance, ParseError> {
    let cells: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    let count = cells.chars().count();
    let n = match count {
        16 => 4,
        81 => 9,
        _ => return Err(ParseError::Length(count)),
    };
    let mut givens = Vec::with_capacity(count);
    for (i, ch) in cells.chars().enumerate() {
        let g = match ch {
            '.' | '0' => None,
            '1'..='9' if ch.to_digit(10).unwrap() as usize <= n => Some(ch.to_digit(10).unwrap() as Value),
            _ => return Err(ParseError::InvalidChar { ch, cell: i }),
        };
        givens.push(g);
    }
    sudoku_instance(n, &givens)
}

/// Parses one puzzle per non-empty, non-comment line.
pub fn parse_sudoku_corpus(text: &str) -> Vec<Result<CspInstance, ParseError>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_sudoku)
        .collect()
}

/// Single-line rendering of a complete assignment.
pub fn format_grid(values: &[Value]) -> String {
    values.iter().map(|&x| char::from(b'0' + x)).collect()
}

/// Single-line rendering of a puzzle's givens, `.` for blanks.
pub fn to_sudoku_line(instance: &CspInstance) -> String {
    (0..instance.num_vars())
        .map(|i| match instance.evidence.get(VarId(i as u32)) {
            Some(x) => char::from(b'0' + x),
            None => '.',
        })
        .collect()
}
