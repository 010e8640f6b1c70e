//! Shared helpers for the integration tests: seeded random CSPs and support checks.
#![allow(dead_code)]

use std::collections::BTreeSet;

use purgemerge::codec::{CageOp, Clause, ClauseKind, CspInstance};
use purgemerge::{DomainTable, Evidence, SparseFactor, Value, VarId};
use rand::seq::SliceRandom;
use rand::Rng;

/// A random instance over at most `max_vars` variables with domains drawn from
/// `1..=max_dom`. Most instances have a planted solution; some are left to chance
/// so unsatisfiable ones show up too.
pub fn random_csp(rng: &mut impl Rng, max_vars: usize, max_dom: usize) -> CspInstance {
    let n = rng.gen_range(2..=max_vars);
    let mut pool: Vec<Value> = (1..=max_dom as Value).collect();
    let domains: Vec<Vec<Value>> = (0..n)
        .map(|_| {
            pool.shuffle(rng);
            let k = rng.gen_range(1..=max_dom);
            let mut d = pool[..k].to_vec();
            d.sort();
            d
        })
        .collect();
    let hidden: Vec<Value> = domains.iter().map(|d| *d.choose(rng).unwrap()).collect();
    let planted = rng.gen_bool(0.8);

    let vars: Vec<VarId> = (0..n as u32).map(VarId).collect();
    let pick = |rng: &mut dyn rand::RngCore, lo: usize, hi: usize| -> Vec<VarId> {
        let k = rng.gen_range(lo..=hi.min(n));
        let mut s: Vec<VarId> = vars.choose_multiple(rng, k).copied().collect();
        s.shuffle(rng);
        s
    };
    let at = |s: &[VarId]| -> Vec<u32> { s.iter().map(|v| u32::from(hidden[v.index()])).collect() };

    let mut clauses = Vec::new();
    for _ in 0..rng.gen_range(1..=n + 2) {
        let clause = match rng.gen_range(0..6) {
            0 => {
                let scope = pick(rng, 2, 4);
                let vals = at(&scope);
                let distinct = vals.iter().collect::<BTreeSet<_>>().len() == vals.len();
                if planted && !distinct {
                    continue;
                }
                Clause {
                    kind: ClauseKind::AllDiff,
                    scope,
                }
            }
            1 => {
                let scope = pick(rng, 1, 3);
                let vals = at(&scope);
                let distinct = rng.gen_bool(0.5) && vals.iter().collect::<BTreeSet<_>>().len() == vals.len();
                let total = if planted {
                    vals.iter().sum()
                } else {
                    rng.gen_range(1..=3 * max_dom as u32)
                };
                Clause {
                    kind: ClauseKind::Sum { total, distinct },
                    scope,
                }
            }
            2 => {
                let op = *[CageOp::Add, CageOp::Sub, CageOp::Mul, CageOp::Div]
                    .choose(rng)
                    .unwrap();
                let scope = if matches!(op, CageOp::Sub | CageOp::Div) {
                    pick(rng, 2, 2)
                } else {
                    pick(rng, 1, 3)
                };
                let vals = at(&scope);
                let target = match op {
                    CageOp::Add => vals.iter().sum(),
                    CageOp::Mul => vals.iter().product(),
                    CageOp::Sub => vals[0].abs_diff(vals[1]),
                    CageOp::Div => {
                        let (a, b) = (vals[0].max(vals[1]), vals[0].min(vals[1]));
                        if a % b != 0 {
                            continue;
                        }
                        a / b
                    }
                };
                let target = if planted { target } else { rng.gen_range(0..=target + 2) };
                Clause {
                    kind: ClauseKind::Cage { op, target },
                    scope,
                }
            }
            3 => {
                let scope = pick(rng, 1, 4);
                let ones = at(&scope).iter().filter(|&&x| x == 1).count() as u32;
                let clue = if planted {
                    ones
                } else {
                    rng.gen_range(0..=scope.len() as u32)
                };
                Clause {
                    kind: ClauseKind::Count { clue },
                    scope,
                }
            }
            _ => {
                let scope = pick(rng, 1, 3);
                let mut rows: Vec<Vec<Value>> = (0..rng.gen_range(1..=6))
                    .map(|_| scope.iter().map(|v| *domains[v.index()].choose(rng).unwrap()).collect())
                    .collect();
                if planted {
                    rows.push(scope.iter().map(|v| hidden[v.index()]).collect());
                }
                Clause {
                    kind: ClauseKind::Table { rows },
                    scope,
                }
            }
        };
        clauses.push(clause);
    }

    let mut evidence = Evidence::new();
    if rng.gen_bool(0.3) {
        let v = *vars.choose(rng).unwrap();
        let x = if planted {
            hidden[v.index()]
        } else {
            *domains[v.index()].choose(rng).unwrap()
        };
        evidence.insert(v, x).unwrap();
    }
    CspInstance {
        names: (0..n).map(|i| format!("v{i}")).collect(),
        domains: DomainTable::new(domains),
        clauses,
        evidence,
    }
}

/// Every stored row of a factor, in scope order.
pub fn support(f: &SparseFactor) -> BTreeSet<Vec<Value>> {
    (0..f.len()).map(|r| f.row(r).to_vec()).collect()
}

/// True when the assignment restricted to the factor's scope is a stored row.
pub fn projects_into(solution: &[Value], f: &SparseFactor) -> bool {
    let row: Vec<Value> = f.scope().iter().map(|v| solution[v.index()]).collect();
    f.get(&row) > 0.0
}

/// A solution agrees with the solved variables and projects into every factor.
pub fn preserved(solution: &[Value], factors: &[SparseFactor], solved: &Evidence, domains: &DomainTable) -> bool {
    solved.iter().all(|(v, x)| solution[v.index()] == x)
        && (0..solution.len()).all(|i| domains.get(VarId(i as u32)).contains(solution[i]))
        && factors.iter().all(|f| projects_into(solution, f))
}
