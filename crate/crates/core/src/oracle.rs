//! Plain backtracking search used as ground truth for small instances.
//!
//! Nothing here touches the factor tables: clauses are evaluated directly from their
//! descriptions, so a bug in the table algebra cannot confirm itself.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::codec::{CageOp, Clause, ClauseKind, CspInstance};
use crate::factor::{Value, VarId};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_nodes: u64,
    pub max_solutions: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_nodes: 50_000_000,
            max_solutions: 1_000_000,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Error)]
pub enum BudgetExceeded {
    #[error("search expanded more than {0} nodes")]
    Nodes(u64),
    #[error("more than {0} solutions")]
    Solutions(usize),
}

/// A complete assignment, indexed by variable id.
pub type Assignment = Vec<Value>;

/// Every solution, in lexicographic order.
pub fn brute_force_solutions(instance: &CspInstance, budget: SearchBudget) -> Result<Vec<Assignment>, BudgetExceeded> {
    let order: Vec<VarId> = (0..instance.num_vars() as u32).map(VarId).collect();
    brute_force_solutions_ordered(instance, &order, budget)
}

/// Same as [`brute_force_solutions`] but assigns variables in `order`, which must
/// be a permutation of all variables. Output is still sorted.
pub fn brute_force_solutions_ordered(
    instance: &CspInstance,
    order: &[VarId],
    budget: SearchBudget,
) -> Result<Vec<Assignment>, BudgetExceeded> {
    let n = instance.num_vars();
    assert_eq!(order.len(), n, "order must list every variable");
    let mut domains: Vec<Vec<Value>> = (0..n)
        .map(|i| {
            let v = VarId(i as u32);
            match instance.evidence.get(v) {
                Some(x) => vec![x],
                None => instance.domains.values(v),
            }
        })
        .collect();
    let mut watching = vec![Vec::new(); n];
    for (i, c) in instance.clauses.iter().enumerate() {
        for v in &c.scope {
            watching[v.index()].push(i);
        }
    }

    // Unary clauses prune before the search starts.
    let mut partial: Vec<Option<Value>> = vec![None; n];
    for c in instance.clauses.iter().filter(|c| c.scope.len() == 1) {
        let v = c.scope[0].index();
        let mut kept = domains[v].clone();
        kept.retain(|&x| {
            partial[v] = Some(x);
            clause_feasible(c, &partial, &domains)
        });
        partial[v] = None;
        domains[v] = kept;
    }

    let mut search = Search {
        instance,
        order,
        watching,
        partial,
        nodes: 0,
        budget,
        solutions: Vec::new(),
    };
    search.descend(0, domains)?;
    let mut out = search.solutions;
    out.sort();
    Ok(out)
}

struct Search<'a> {
    instance: &'a CspInstance,
    order: &'a [VarId],
    watching: Vec<Vec<usize>>,
    partial: Vec<Option<Value>>,
    nodes: u64,
    budget: SearchBudget,
    solutions: Vec<Assignment>,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, domains: Vec<Vec<Value>>) -> Result<(), BudgetExceeded> {
        if depth == self.order.len() {
            if self.solutions.len() == self.budget.max_solutions {
                return Err(BudgetExceeded::Solutions(self.budget.max_solutions));
            }
            self.solutions
                .push(self.partial.iter().map(|x| x.expect("complete")).collect());
            return Ok(());
        }
        let var = self.order[depth].index();
        for &x in &domains[var] {
            self.nodes += 1;
            if self.nodes > self.budget.max_nodes {
                return Err(BudgetExceeded::Nodes(self.budget.max_nodes));
            }
            self.partial[var] = Some(x);
            let mut next = domains.clone();
            next[var] = vec![x];
            if self.forward_check(var, &mut next) {
                self.descend(depth + 1, next)?;
            }
        }
        self.partial[var] = None;
        Ok(())
    }

    /// Checks every clause on `var`, then removes values of unassigned neighbours that
    /// would make one of those clauses infeasible. False on a wipe-out.
    fn forward_check(&mut self, var: usize, domains: &mut [Vec<Value>]) -> bool {
        for &ci in &self.watching[var] {
            let clause = &self.instance.clauses[ci];
            if !clause_feasible(clause, &self.partial, domains) {
                return false;
            }
            for &other in &clause.scope {
                let o = other.index();
                if self.partial[o].is_some() {
                    continue;
                }
                let mut kept = std::mem::take(&mut domains[o]);
                kept.retain(|&y| {
                    self.partial[o] = Some(y);
                    clause_feasible(clause, &self.partial, domains)
                });
                self.partial[o] = None;
                if kept.is_empty() {
                    return false;
                }
                domains[o] = kept;
            }
        }
        true
    }
}

/// Whether a clause can still hold given the assigned values and the remaining
/// domains of unassigned variables. Exact once every scope variable is assigned,
/// never rejects a partial assignment that has an extension.
fn clause_feasible(clause: &Clause, partial: &[Option<Value>], domains: &[Vec<Value>]) -> bool {
    let assigned: Vec<u32> = clause
        .scope
        .iter()
        .filter_map(|v| partial[v.index()].map(u32::from))
        .collect();
    let open: Vec<&Vec<Value>> = clause
        .scope
        .iter()
        .filter(|v| partial[v.index()].is_none())
        .map(|v| &domains[v.index()])
        .collect();
    let distinct = |vals: &[u32]| {
        let mut seen = BTreeSet::new();
        vals.iter().all(|x| seen.insert(*x))
    };
    let lo = |d: &Vec<Value>| d.iter().copied().min().map_or(0, u32::from);
    let hi = |d: &Vec<Value>| d.iter().copied().max().map_or(0, u32::from);
    match &clause.kind {
        ClauseKind::AllDiff => distinct(&assigned),
        ClauseKind::Sum { total, distinct: d } => {
            if *d && !distinct(&assigned) {
                return false;
            }
            let s: u32 = assigned.iter().sum();
            let min: u32 = open.iter().map(|d| lo(d)).sum();
            let max: u32 = open.iter().map(|d| hi(d)).sum();
            s + min <= *total && *total <= s + max
        }
        ClauseKind::Cage { op, target } => {
            if !open.is_empty() {
                return match op {
                    CageOp::Add => {
                        let s: u32 = assigned.iter().sum();
                        let min: u32 = open.iter().map(|d| lo(d)).sum();
                        let max: u32 = open.iter().map(|d| hi(d)).sum();
                        s + min <= *target && *target <= s + max
                    }
                    CageOp::Mul => {
                        let positive = assigned.iter().all(|&x| x > 0) && open.iter().all(|d| lo(d) > 0);
                        let p: u64 = assigned.iter().map(|&x| u64::from(x)).product();
                        !positive || p <= u64::from(*target)
                    }
                    CageOp::Sub | CageOp::Div => true,
                };
            }
            cage_holds(*op, *target, &assigned)
        }
        ClauseKind::Count { clue } => {
            let ones = assigned.iter().filter(|&&x| x == 1).count() as u32;
            let could = open.iter().filter(|d| d.contains(&1)).count() as u32;
            ones <= *clue && *clue <= ones + could
        }
        ClauseKind::Table { rows } => rows.iter().any(|row| {
            clause.scope.iter().zip(row).all(|(v, &x)| match partial[v.index()] {
                Some(y) => x == y,
                None => domains[v.index()].contains(&x),
            })
        }),
    }
}

fn cage_holds(op: CageOp, target: u32, vals: &[u32]) -> bool {
    match op {
        CageOp::Add => vals.iter().sum::<u32>() == target,
        CageOp::Mul => vals.iter().map(|&x| u64::from(x)).product::<u64>() == u64::from(target),
        CageOp::Sub => vals.len() == 2 && vals[0].abs_diff(vals[1]) == target,
        CageOp::Div => match vals {
            &[x, y] => {
                let (a, b) = (x.max(y), x.min(y));
                b != 0 && a == b * target
            }
            _ => false,
        },
    }
}

/// Evaluates one clause on a complete assignment.
pub fn clause_holds(clause: &Clause, values: &[Value]) -> bool {
    let vals: Vec<u32> = clause.scope.iter().map(|v| u32::from(values[v.index()])).collect();
    let mut seen = BTreeSet::new();
    match &clause.kind {
        ClauseKind::AllDiff => vals.iter().all(|x| seen.insert(*x)),
        ClauseKind::Sum { total, distinct } => {
            vals.iter().sum::<u32>() == *total && (!distinct || vals.iter().all(|x| seen.insert(*x)))
        }
        ClauseKind::Cage { op, target } => cage_holds(*op, *target, &vals),
        ClauseKind::Count { clue } => vals.iter().filter(|&&x| x == 1).count() as u32 == *clue,
        ClauseKind::Table { rows } => rows
            .iter()
            .any(|r| r.iter().zip(&vals).all(|(&a, &b)| u32::from(a) == b)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },
    #[error("{var} = {value} is outside its domain")]
    Domain { var: String, value: Value },
    #[error("{var} = {value} contradicts the given {given}")]
    Evidence { var: String, value: Value, given: Value },
    #[error("clause {index} ({kind}) is violated")]
    Clause { index: usize, kind: &'static str },
}

/// Checks a complete assignment against domains, evidence and every clause.
pub fn check_assignment(instance: &CspInstance, values: &[Value]) -> Result<(), Violation> {
    if values.len() != instance.num_vars() {
        return Err(Violation::Length {
            expected: instance.num_vars(),
            found: values.len(),
        });
    }
    for (i, &x) in values.iter().enumerate() {
        let v = VarId(i as u32);
        if !instance.domains.get(v).contains(x) {
            return Err(Violation::Domain {
                var: instance.name(v).to_string(),
                value: x,
            });
        }
        if let Some(g) = instance.evidence.get(v) {
            if g != x {
                return Err(Violation::Evidence {
                    var: instance.name(v).to_string(),
                    value: x,
                    given: g,
                });
            }
        }
    }
    for (index, c) in instance.clauses.iter().enumerate() {
        if !clause_holds(c, values) {
            return Err(Violation::Clause {
                index,
                kind: c.kind.name(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::parse_sudoku;
    use crate::factor::{DomainTable, Evidence};

    fn dice() -> CspInstance {
        CspInstance {
            names: vec!["d1".into(), "d2".into()],
            domains: DomainTable::uniform(2, 1..=6),
            clauses: vec![Clause {
                kind: ClauseKind::Sum {
                    total: 10,
                    distinct: false,
                },
                scope: vec![VarId(0), VarId(1)],
            }],
            evidence: Evidence::new(),
        }
    }

    #[test]
    fn dice_has_three_solutions() {
        let sols = brute_force_solutions(&dice(), SearchBudget::default()).unwrap();
        assert_eq!(sols, vec![vec![4, 6], vec![5, 5], vec![6, 4]]);
    }

    #[test]
    fn contradiction_has_none() {
        let mut inst = dice();
        inst.clauses[0].kind = ClauseKind::Sum {
            total: 13,
            distinct: false,
        };
        assert!(brute_force_solutions(&inst, SearchBudget::default())
            .unwrap()
            .is_empty());
    }

    /// Counts 4×4 grids by stacking row permutations and filtering on the column and
    /// box rules. Shares nothing with the search.
    fn generate_and_filter_4x4() -> usize {
        let perms: Vec<[u8; 4]> = (0..256u32)
            .map(|i| {
                [
                    (i & 3) as u8 + 1,
                    ((i >> 2) & 3) as u8 + 1,
                    ((i >> 4) & 3) as u8 + 1,
                    ((i >> 6) & 3) as u8 + 1,
                ]
            })
            .filter(|p| {
                let mut s = p.to_vec();
                s.sort();
                s == [1, 2, 3, 4]
            })
            .collect();
        let mut count = 0;
        for a in &perms {
            for b in &perms {
                for c in &perms {
                    for d in &perms {
                        let g = [a, b, c, d];
                        let cols = (0..4).all(|j| {
                            let mut s: Vec<u8> = g.iter().map(|r| r[j]).collect();
                            s.sort();
                            s == [1, 2, 3, 4]
                        });
                        let boxes = (0..4).all(|k| {
                            let (r0, c0) = (k / 2 * 2, k % 2 * 2);
                            let mut s = vec![g[r0][c0], g[r0][c0 + 1], g[r0 + 1][c0], g[r0 + 1][c0 + 1]];
                            s.sort();
                            s == [1, 2, 3, 4]
                        });
                        count += usize::from(cols && boxes);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn blank_4x4_has_288_grids() {
        let inst = parse_sudoku(&".".repeat(16)).unwrap();
        let sols = brute_force_solutions(&inst, SearchBudget::default()).unwrap();
        assert_eq!(sols.len(), 288);
        assert_eq!(generate_and_filter_4x4(), 288);
        assert!(sols.iter().all(|s| check_assignment(&inst, s).is_ok()));
    }

    #[test]
    fn order_does_not_matter() {
        let inst = parse_sudoku("1...\n..3.\n.4..\n...2").unwrap();
        let forward = brute_force_solutions(&inst, SearchBudget::default()).unwrap();
        let reverse: Vec<VarId> = (0..16).rev().map(VarId).collect();
        let backward = brute_force_solutions_ordered(&inst, &reverse, SearchBudget::default()).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn budgets_are_reported() {
        let inst = parse_sudoku(&".".repeat(16)).unwrap();
        let tight = SearchBudget {
            max_nodes: 10,
            max_solutions: 1000,
        };
        assert_eq!(brute_force_solutions(&inst, tight), Err(BudgetExceeded::Nodes(10)));
        let few = SearchBudget {
            max_nodes: u64::MAX,
            max_solutions: 5,
        };
        assert_eq!(brute_force_solutions(&inst, few), Err(BudgetExceeded::Solutions(5)));
    }

    #[test]
    fn cage_semantics() {
        assert!(cage_holds(CageOp::Sub, 2, &[1, 3]));
        assert!(cage_holds(CageOp::Sub, 2, &[3, 1]));
        assert!(cage_holds(CageOp::Div, 2, &[4, 2]));
        assert!(!cage_holds(CageOp::Div, 2, &[3, 2]));
        assert!(cage_holds(CageOp::Mul, 24, &[2, 3, 4]));
    }

    #[test]
    fn check_assignment_reports_the_first_problem() {
        let inst = dice();
        assert_eq!(check_assignment(&inst, &[4, 6]), Ok(()));
        assert!(matches!(check_assignment(&inst, &[4]), Err(Violation::Length { .. })));
        assert!(matches!(
            check_assignment(&inst, &[7, 3]),
            Err(Violation::Domain { .. })
        ));
        assert!(matches!(
            check_assignment(&inst, &[3, 3]),
            Err(Violation::Clause { index: 0, .. })
        ));
    }
}
