//! Table purging beyond propagation: domain reduction and variable reduction.
//! Both run to a fixpoint.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::factor::{DomainTable, Evidence, SparseFactor, Value, ValueSet, VarId};

#[derive(Clone, Debug, Default)]
pub struct PurgeOutcome {
    /// Variables found to take a single value; they no longer appear in any scope.
    pub solved: Evidence,
    /// Domain values proven impossible.
    pub removed: Vec<(VarId, Value)>,
    pub factors: Vec<SparseFactor>,
}

impl PurgeOutcome {
    pub fn changed(&self) -> bool {
        !self.solved.is_empty() || !self.removed.is_empty()
    }
}

/// Shrinks each variable's domain to the values every factor containing it supports,
/// deleting entries that use removed values, until nothing changes.
pub fn reduce_domains(factors: Vec<SparseFactor>, domains: &mut DomainTable) -> Result<PurgeOutcome> {
    let mut factors = factors;
    let mut removed = Vec::new();
    loop {
        let mut allowed: BTreeMap<VarId, ValueSet> = BTreeMap::new();
        for f in &factors {
            for &var in f.scope() {
                let support = f.supported_values(var);
                allowed
                    .entry(var)
                    .and_modify(|s| *s = s.intersection(&support))
                    .or_insert_with(|| support.intersection(domains.get(var)));
            }
        }
        let mut shrunk = Vec::new();
        for (&var, &keep) in &allowed {
            let current = *domains.get(var);
            if keep == current {
                continue;
            }
            if keep.is_empty() {
                return Err(Error::unsat(format!("domain of {var} became empty")));
            }
            removed.extend(current.iter().filter(|&x| !keep.contains(x)).map(|x| (var, x)));
            domains.set(var, keep);
            shrunk.push(var);
        }
        if shrunk.is_empty() {
            break;
        }
        for f in factors.iter_mut() {
            let cols: Vec<(usize, ValueSet)> = shrunk
                .iter()
                .filter_map(|&v| f.position(v).map(|c| (c, *domains.get(v))))
                .collect();
            if cols.is_empty() {
                continue;
            }
            *f = f.retain(|row| cols.iter().all(|(c, s)| s.contains(row[*c])));
            if f.is_empty() {
                return Err(Error::unsat("domain reduction emptied a factor"));
            }
        }
    }
    Ok(PurgeOutcome {
        solved: Evidence::new(),
        removed,
        factors,
    })
}

/// Observes every variable that some factor pins to a single value, removes it from
/// all scopes and repeats until no factor pins anything. Factors left with an empty
/// scope are dropped.
pub fn reduce_variables(factors: Vec<SparseFactor>, domains: &mut DomainTable) -> Result<PurgeOutcome> {
    let mut factors = factors;
    let mut solved = Evidence::new();
    loop {
        let mut found = Evidence::new();
        for f in &factors {
            for &var in f.scope() {
                let support = f.supported_values(var);
                if support.len() == 1 {
                    found.insert(var, support.min().expect("one value"))?;
                }
            }
        }
        if found.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(factors.len());
        for f in &factors {
            let reduced = f.observe(&found)?;
            if reduced.arity() > 0 {
                next.push(reduced);
            }
        }
        factors = next;
        for (var, x) in found.iter() {
            domains.set(var, ValueSet::single(x));
        }
        solved.extend(&found)?;
    }
    Ok(PurgeOutcome {
        solved,
        removed: Vec::new(),
        factors,
    })
}
