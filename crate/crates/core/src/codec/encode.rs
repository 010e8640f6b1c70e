//! Clause-to-table encoders. Each encoder enumerates satisfying assignments over the
//! current domains by depth-first search with kind-specific pruning.

use crate::error::{Error, Result};
use crate::factor::{DomainTable, SparseFactor, Value, VarId};

use super::{CageOp, Clause, ClauseKind};

/// Enumerates assignments of `vars` (sorted, distinct) over their domains. `feasible`
/// sees each non-empty prefix and may prune; `accept` sees each complete assignment.
fn enumerate(
    vars: &[VarId],
    domains: &DomainTable,
    budget: usize,
    mut feasible: impl FnMut(&[Value]) -> bool,
    mut accept: impl FnMut(&[Value]) -> bool,
) -> Result<SparseFactor> {
    let options: Vec<Vec<Value>> = vars.iter().map(|&v| domains.values(v)).collect();
    let n = vars.len();
    let mut values = Vec::new();
    let mut count = 0usize;
    let mut prefix: Vec<Value> = Vec::with_capacity(n);
    let mut cursor = vec![0usize; n];
    let mut depth = 0usize;

    if n == 0 {
        return Ok(if accept(&[]) {
            SparseFactor::unit()
        } else {
            SparseFactor::from_parts(Vec::new(), Vec::new(), Vec::new())
        });
    }
    loop {
        if cursor[depth] == options[depth].len() {
            if depth == 0 {
                break;
            }
            cursor[depth] = 0;
            depth -= 1;
            prefix.pop();
            cursor[depth] += 1;
            continue;
        }
        prefix.push(options[depth][cursor[depth]]);
        if !feasible(&prefix) {
            prefix.pop();
            cursor[depth] += 1;
            continue;
        }
        if depth + 1 == n {
            if accept(&prefix) {
                count += 1;
                if count > budget {
                    return Err(Error::TableBlowUp {
                        attempted: count as u64,
                        budget: budget as u64,
                    });
                }
                values.extend_from_slice(&prefix);
            }
            prefix.pop();
            cursor[depth] += 1;
        } else {
            depth += 1;
        }
    }
    Ok(SparseFactor::from_parts(vars.to_vec(), values, vec![1.0; count]))
}

fn sorted(vars: &[VarId]) -> Result<Vec<VarId>> {
    let mut out = vars.to_vec();
    out.sort();
    out.dedup();
    if out.len() != vars.len() {
        return Err(Error::contract("clause scope lists a variable twice"));
    }
    Ok(out)
}

fn non_empty(f: SparseFactor, what: &str) -> Result<SparseFactor> {
    if f.is_empty() {
        Err(Error::unsat(format!("{what} clause has no satisfying assignment")))
    } else {
        Ok(f)
    }
}

fn last_is_fresh(prefix: &[Value]) -> bool {
    let (last, rest) = prefix.split_last().expect("non-empty prefix");
    !rest.contains(last)
}

fn alldiff_bounded(vars: &[VarId], domains: &DomainTable, budget: usize) -> Result<SparseFactor> {
    let vars = sorted(vars)?;
    let f = enumerate(&vars, domains, budget, last_is_fresh, |_| true)?;
    non_empty(f, "alldiff")
}

/// Table of injective assignments over the (possibly pruned) domains.
pub fn encode_alldiff(vars: &[VarId], domains: &DomainTable) -> Result<SparseFactor> {
    alldiff_bounded(vars, domains, usize::MAX)
}

fn sum_bounded(
    vars: &[VarId],
    total: u32,
    distinct: bool,
    domains: &DomainTable,
    budget: usize,
) -> Result<SparseFactor> {
    let vars = sorted(vars)?;
    // Remaining-suffix bounds for pruning.
    let n = vars.len();
    let mut min_rest = vec![0u32; n + 1];
    let mut max_rest = vec![0u32; n + 1];
    for i in (0..n).rev() {
        let d = domains.get(vars[i]);
        min_rest[i] = min_rest[i + 1] + u32::from(d.min().unwrap_or(0));
        max_rest[i] = max_rest[i + 1] + u32::from(d.max().unwrap_or(0));
    }
    let feasible = |prefix: &[Value]| {
        if distinct && !last_is_fresh(prefix) {
            return false;
        }
        let s: u32 = prefix.iter().map(|&x| u32::from(x)).sum();
        let k = prefix.len();
        s + min_rest[k] <= total && s + max_rest[k] >= total
    };
    let f = enumerate(&vars, domains, budget, feasible, |a| {
        a.iter().map(|&x| u32::from(x)).sum::<u32>() == total
    })?;
    non_empty(f, "sum")
}

/// Assignments summing to `total`, pairwise distinct when `distinct` is set.
pub fn encode_sum_clause(vars: &[VarId], total: u32, distinct: bool, domains: &DomainTable) -> Result<SparseFactor> {
    sum_bounded(vars, total, distinct, domains, usize::MAX)
}

fn cage_bounded(vars: &[VarId], op: CageOp, target: u32, domains: &DomainTable, budget: usize) -> Result<SparseFactor> {
    match op {
        CageOp::Add => return sum_bounded(vars, target, false, domains, budget).map_err(rename("cage")),
        CageOp::Sub | CageOp::Div if vars.len() != 2 => {
            return Err(Error::contract("sub and div cages need exactly two cells"));
        }
        _ => {}
    }
    let vars = sorted(vars)?;
    let target = u64::from(target);
    let f = match op {
        CageOp::Mul => {
            let all_positive = vars.iter().all(|&v| domains.get(v).min().is_some_and(|m| m >= 1));
            let feasible = |prefix: &[Value]| {
                let p: u64 = prefix.iter().map(|&x| u64::from(x)).product();
                !all_positive || (p <= target && target % p.max(1) == 0)
            };
            enumerate(&vars, domains, budget, feasible, |a| {
                a.iter().map(|&x| u64::from(x)).product::<u64>() == target
            })?
        }
        CageOp::Sub => enumerate(
            &vars,
            domains,
            budget,
            |_| true,
            |a| u64::from(a[0].abs_diff(a[1])) == target,
        )?,
        CageOp::Div => enumerate(
            &vars,
            domains,
            budget,
            |_| true,
            |a| {
                let (hi, lo) = (u64::from(a[0].max(a[1])), u64::from(a[0].min(a[1])));
                lo != 0 && hi % lo == 0 && hi / lo == target
            },
        )?,
        CageOp::Add => unreachable!(),
    };
    non_empty(f, "cage")
}

fn rename(what: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Unsatisfiable(_) => Error::unsat(format!("{what} clause has no satisfying assignment")),
        other => other,
    }
}

/// Arithmetic cage: sum or product equal to `target`; for two-cell `sub`/`div`
/// cages the absolute difference or larger-over-smaller quotient.
pub fn encode_arithmetic_cage(vars: &[VarId], op: CageOp, target: u32, domains: &DomainTable) -> Result<SparseFactor> {
    cage_bounded(vars, op, target, domains, usize::MAX)
}

fn count_bounded(vars: &[VarId], clue: u32, domains: &DomainTable, budget: usize) -> Result<SparseFactor> {
    let vars = sorted(vars)?;
    let n = vars.len();
    let clue = clue as usize;
    if clue > n {
        return Err(Error::unsat("count clue exceeds its neighbourhood"));
    }
    let feasible = |prefix: &[Value]| {
        let ones = prefix.iter().filter(|&&x| x == 1).count();
        ones <= clue && ones + (n - prefix.len()) >= clue
    };
    let f = enumerate(&vars, domains, budget, feasible, |a| {
        a.iter().filter(|&&x| x == 1).count() == clue
    })?;
    non_empty(f, "count")
}

/// Fill-a-pix clue: exactly `clue` ones among the centre cell and its neighbours.
pub fn encode_count_clause(
    center: VarId,
    neighbours: &[VarId],
    clue: u32,
    domains: &DomainTable,
) -> Result<SparseFactor> {
    let mut scope = vec![center];
    scope.extend_from_slice(neighbours);
    count_bounded(&scope, clue, domains, usize::MAX)
}

/// Explicit allowed rows (in `vars` order), filtered to the current domains.
pub fn encode_table(vars: &[VarId], rows: &[Vec<Value>], domains: &DomainTable) -> Result<SparseFactor> {
    sorted(vars)?;
    let keep = rows
        .iter()
        .filter(|r| r.iter().zip(vars).all(|(&x, &v)| domains.get(v).contains(x)));
    let f = SparseFactor::indicator(vars.to_vec(), keep)?;
    non_empty(f, "table")
}

/// Encodes a clause over the current domains; variables with singleton domains act as
/// observed. Fails with [`Error::TableBlowUp`] past `budget` entries.
pub fn encode_clause(clause: &Clause, domains: &DomainTable, budget: usize) -> Result<SparseFactor> {
    let vars = &clause.scope;
    let f = match &clause.kind {
        ClauseKind::AllDiff => alldiff_bounded(vars, domains, budget)?,
        ClauseKind::Sum { total, distinct } => sum_bounded(vars, *total, *distinct, domains, budget)?,
        ClauseKind::Cage { op, target } => cage_bounded(vars, *op, *target, domains, budget)?,
        ClauseKind::Count { clue } => count_bounded(vars, *clue, domains, budget)?,
        ClauseKind::Table { rows } => encode_table(vars, rows, domains)?,
    };
    if f.len() > budget {
        return Err(Error::TableBlowUp {
            attempted: f.len() as u64,
            budget: budget as u64,
        });
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(n: u32) -> Vec<VarId> {
        (0..n).map(VarId).collect()
    }

    fn rows(f: &SparseFactor) -> Vec<Vec<Value>> {
        f.sorted_entries().into_iter().map(|(r, _)| r).collect()
    }

    /// Predicate oracle: filter the full assignment space.
    fn brute(vars: &[VarId], domains: &DomainTable, pred: impl Fn(&[Value]) -> bool) -> Vec<Vec<Value>> {
        let mut out = vec![vec![]];
        for &v in vars {
            out = out
                .into_iter()
                .flat_map(|p: Vec<Value>| {
                    domains.values(v).into_iter().map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().filter(|a| pred(a)).collect()
    }

    #[test]
    fn alldiff_examples() {
        let d = DomainTable::uniform(4, 1..=4);
        assert_eq!(encode_alldiff(&vars(4), &d).unwrap().len(), 24);
        let d1 = DomainTable::uniform(1, 1..=3);
        assert_eq!(
            rows(&encode_alldiff(&vars(1), &d1).unwrap()),
            vec![vec![1], vec![2], vec![3]]
        );
        let pruned = DomainTable::new([vec![1], vec![1, 2], vec![1, 2, 3]]);
        assert_eq!(rows(&encode_alldiff(&vars(3), &pruned).unwrap()), vec![vec![1, 2, 3]]);
        let tight = DomainTable::uniform(3, 1..=2);
        assert!(matches!(encode_alldiff(&vars(3), &tight), Err(Error::Unsatisfiable(_))));
    }

    #[test]
    fn sum_examples() {
        let dice = DomainTable::uniform(2, 1..=6);
        assert_eq!(
            rows(&encode_sum_clause(&vars(2), 10, false, &dice).unwrap()),
            vec![vec![4, 6], vec![5, 5], vec![6, 4]]
        );
        let d9 = DomainTable::uniform(3, 1..=9);
        assert_eq!(
            rows(&encode_sum_clause(&vars(2), 4, true, &d9).unwrap()),
            vec![vec![1, 3], vec![3, 1]]
        );
        let six = encode_sum_clause(&vars(3), 6, true, &d9).unwrap();
        assert_eq!(six.len(), 6);
        assert_eq!(
            rows(&six),
            brute(&vars(3), &d9, |a| {
                a.iter().map(|&x| x as u32).sum::<u32>() == 6 && a[0] != a[1] && a[0] != a[2] && a[1] != a[2]
            })
        );
        assert!(encode_sum_clause(&vars(2), 20, false, &dice).is_err());
    }

    #[test]
    fn cage_examples() {
        let d = DomainTable::uniform(2, 1..=4);
        assert_eq!(
            rows(&encode_arithmetic_cage(&vars(2), CageOp::Mul, 6, &d).unwrap()),
            vec![vec![2, 3], vec![3, 2]]
        );
        assert_eq!(
            rows(&encode_arithmetic_cage(&vars(2), CageOp::Sub, 0, &d).unwrap()),
            vec![vec![1, 1], vec![2, 2], vec![3, 3], vec![4, 4]]
        );
        assert_eq!(
            rows(&encode_arithmetic_cage(&vars(2), CageOp::Div, 2, &d).unwrap()),
            vec![vec![1, 2], vec![2, 1], vec![2, 4], vec![4, 2]]
        );
        let d3 = DomainTable::uniform(3, 1..=4);
        assert!(matches!(
            encode_arithmetic_cage(&vars(3), CageOp::Sub, 1, &d3),
            Err(Error::Contract(_))
        ));
        let mul3 = encode_arithmetic_cage(&vars(3), CageOp::Mul, 12, &d3).unwrap();
        assert_eq!(
            rows(&mul3),
            brute(&vars(3), &d3, |a| a.iter().map(|&x| x as u32).product::<u32>() == 12)
        );
    }

    #[test]
    fn count_examples() {
        let d = DomainTable::uniform(9, 0..=1);
        let all = encode_count_clause(VarId(4), &[0, 1, 2, 3, 5, 6, 7, 8].map(VarId), 9, &d).unwrap();
        assert_eq!(rows(&all), vec![vec![1; 9]]);
        let none = encode_count_clause(VarId(4), &[0, 1, 2, 3, 5, 6, 7, 8].map(VarId), 0, &d).unwrap();
        assert_eq!(rows(&none), vec![vec![0; 9]]);
        let corner = encode_count_clause(VarId(0), &[VarId(1), VarId(2), VarId(3)], 3, &d).unwrap();
        assert_eq!(corner.len(), 4);
        assert_eq!(
            rows(&corner),
            brute(&vars(4), &d, |a| a.iter().filter(|&&x| x == 1).count() == 3)
        );
        assert!(encode_count_clause(VarId(0), &[VarId(1)], 3, &d).is_err());
    }

    #[test]
    fn table_reorders_to_canonical_scope() {
        let d = DomainTable::uniform(2, 1..=3);
        let f = encode_table(&[VarId(1), VarId(0)], &[vec![1, 2], vec![3, 3]], &d).unwrap();
        assert_eq!(rows(&f), vec![vec![2, 1], vec![3, 3]]);
    }

    #[test]
    fn encode_clause_enforces_budget() {
        let d = DomainTable::uniform(5, 1..=5);
        let clause = Clause {
            kind: ClauseKind::AllDiff,
            scope: vars(5),
        };
        assert_eq!(encode_clause(&clause, &d, 120).unwrap().len(), 120);
        assert!(matches!(
            encode_clause(&clause, &d, 100),
            Err(Error::TableBlowUp { budget: 100, .. })
        ));
    }
}
