//! Sparse factor tables and the max-product factor algebra.
//!
//! A [`SparseFactor`] lists only its non-zero assignments. Rows are stored
//! flat in canonical scope order (variables sorted by id), so two factors with
//! the same support and potentials compare equal regardless of how they were
//! built.

use std::collections::BTreeMap;
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single domain value. Puzzle domains are small integers.
pub type Value = u8;

/// Opaque variable handle; the index of the variable inside its instance.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Bitset over the full [`Value`] range.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash)]
pub struct ValueSet([u64; 4]);

impl ValueSet {
    pub const fn empty() -> Self {
        ValueSet([0; 4])
    }

    pub fn single(v: Value) -> Self {
        let mut s = Self::empty();
        s.insert(v);
        s
    }

    #[inline]
    pub fn insert(&mut self, v: Value) {
        self.0[(v >> 6) as usize] |= 1 << (v & 63);
    }

    #[inline]
    pub fn remove(&mut self, v: Value) {
        self.0[(v >> 6) as usize] &= !(1 << (v & 63));
    }

    #[inline]
    pub fn contains(&self, v: Value) -> bool {
        self.0[(v >> 6) as usize] & (1 << (v & 63)) != 0
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn intersection(&self, other: &ValueSet) -> ValueSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a &= b;
        }
        out
    }

    pub fn is_subset(&self, other: &ValueSet) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }

    /// Values in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        (0..=Value::MAX).filter(move |&v| self.contains(v))
    }

    pub fn min(&self) -> Option<Value> {
        self.iter().next()
    }

    pub fn max(&self) -> Option<Value> {
        (0..=Value::MAX).rev().find(|&v| self.contains(v))
    }
}

impl FromIterator<Value> for ValueSet {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        let mut s = ValueSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Current admissible values of every variable, indexed by [`VarId`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DomainTable {
    domains: Vec<ValueSet>,
}

impl DomainTable {
    pub fn new<I, D>(domains: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = Value>,
    {
        DomainTable {
            domains: domains.into_iter().map(|d| d.into_iter().collect()).collect(),
        }
    }

    /// `count` variables sharing the same domain.
    pub fn uniform(count: usize, values: impl IntoIterator<Item = Value>) -> Self {
        let set: ValueSet = values.into_iter().collect();
        DomainTable {
            domains: vec![set; count],
        }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn get(&self, var: VarId) -> &ValueSet {
        &self.domains[var.index()]
    }

    pub fn size(&self, var: VarId) -> usize {
        self.domains[var.index()].len()
    }

    pub fn values(&self, var: VarId) -> Vec<Value> {
        self.domains[var.index()].iter().collect()
    }

    pub fn set(&mut self, var: VarId, values: ValueSet) {
        self.domains[var.index()] = values;
    }

    pub fn push(&mut self, values: ValueSet) -> VarId {
        self.domains.push(values);
        VarId(self.domains.len() as u32 - 1)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (0..self.domains.len() as u32).map(VarId)
    }

    pub fn max_size(&self) -> usize {
        self.domains.iter().map(ValueSet::len).max().unwrap_or(0)
    }
}

/// Observed variable values. Each variable appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence(BTreeMap<VarId, Value>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `var = value`. Re-observing the same value is a no-op; a different
    /// value is a contradiction.
    pub fn insert(&mut self, var: VarId, value: Value) -> Result<()> {
        match self.0.insert(var, value) {
            Some(old) if old != value => {
                self.0.insert(var, old);
                Err(Error::unsat(format!("{var} observed as both {old} and {value}")))
            }
            _ => Ok(()),
        }
    }

    pub fn get(&self, var: VarId) -> Option<Value> {
        self.0.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.0.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, Value)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    pub fn extend(&mut self, other: &Evidence) -> Result<()> {
        for (var, value) in other.iter() {
            self.insert(var, value)?;
        }
        Ok(())
    }
}

impl FromIterator<(VarId, Value)> for Evidence {
    /// Later pairs overwrite earlier ones; use [`Evidence::insert`] to detect conflicts.
    fn from_iter<I: IntoIterator<Item = (VarId, Value)>>(iter: I) -> Self {
        Evidence(iter.into_iter().collect())
    }
}

/// Upper-bound entropy of a scope: the log2 of its joint domain size.
pub fn upper_bound_entropy(scope: &[VarId], domains: &DomainTable) -> f64 {
    scope.iter().map(|&v| (domains.size(v) as f64).log2()).sum()
}

/// A factor listing only its non-zero assignments.
#[derive(Clone)]
pub struct SparseFactor {
    scope: Vec<VarId>,
    values: Vec<Value>,
    potentials: Vec<f64>,
}

impl SparseFactor {
    /// Builds a factor from rows given in the order of `scope`. The scope may be in any
    /// order; rows are permuted into canonical order. Zero potentials are dropped and
    /// duplicate rows collapse by max.
    pub fn new<I, R>(scope: Vec<VarId>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (R, f64)>,
        R: AsRef<[Value]>,
    {
        let mut order: Vec<usize> = (0..scope.len()).collect();
        order.sort_by_key(|&i| scope[i]);
        let sorted: Vec<VarId> = order.iter().map(|&i| scope[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("factor scope lists a variable twice"));
        }

        let arity = sorted.len();
        let mut seen: FxHashMap<Vec<Value>, usize> = FxHashMap::default();
        let mut values = Vec::new();
        let mut potentials = Vec::new();
        for (row, p) in rows {
            let row = row.as_ref();
            if row.len() != arity {
                return Err(Error::contract(format!(
                    "row of length {} in factor of arity {arity}",
                    row.len()
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::contract(format!("invalid potential {p}")));
            }
            if p == 0.0 {
                continue;
            }
            let canon: Vec<Value> = order.iter().map(|&i| row[i]).collect();
            match seen.get(&canon) {
                Some(&idx) => {
                    if p > potentials[idx] {
                        potentials[idx] = p;
                    }
                }
                None => {
                    seen.insert(canon.clone(), potentials.len());
                    values.extend_from_slice(&canon);
                    potentials.push(p);
                }
            }
        }
        Ok(SparseFactor {
            scope: sorted,
            values,
            potentials,
        })
    }

    /// 0/1 factor over `scope` whose support is `rows`.
    pub fn indicator<I, R>(scope: Vec<VarId>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[Value]>,
    {
        Self::new(scope, rows.into_iter().map(|r| (r, 1.0)))
    }

    /// The empty-scope factor with a single entry of potential 1.
    pub fn unit() -> Self {
        SparseFactor {
            scope: Vec::new(),
            values: Vec::new(),
            potentials: vec![1.0],
        }
    }

    /// All-ones factor over the full domain product of `scope`.
    pub fn full(scope: Vec<VarId>, domains: &DomainTable) -> Self {
        let mut scope = scope;
        scope.sort();
        scope.dedup();
        let mut out = SparseFactor::unit();
        for &var in &scope {
            let column = SparseFactor {
                scope: vec![var],
                values: domains.values(var),
                potentials: vec![1.0; domains.size(var)],
            };
            out = out.product(&column, usize::MAX).expect("unbounded product cannot fail");
        }
        out
    }

    /// Trusted constructor for rows already in canonical order with no duplicates.
    pub(crate) fn from_parts(scope: Vec<VarId>, values: Vec<Value>, potentials: Vec<f64>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(values.len(), potentials.len() * scope.len());
        SparseFactor {
            scope,
            values,
            potentials,
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    /// Number of stored (non-zero) entries.
    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Value] {
        let k = self.scope.len();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn potential(&self, i: usize) -> f64 {
        self.potentials[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[Value], f64)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.potentials[i]))
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.scope.binary_search(&var).ok()
    }

    pub fn contains_var(&self, var: VarId) -> bool {
        self.position(var).is_some()
    }

    /// Potential of a canonical-order row, 0 when absent.
    pub fn get(&self, row: &[Value]) -> f64 {
        self.rows().find(|(r, _)| *r == row).map(|(_, p)| p).unwrap_or(0.0)
    }

    /// Values of `var` that appear in at least one entry.
    pub fn supported_values(&self, var: VarId) -> ValueSet {
        let mut set = ValueSet::empty();
        if let Some(col) = self.position(var) {
            let k = self.arity();
            for i in 0..self.len() {
                set.insert(self.values[i * k + col]);
            }
        }
        set
    }

    /// True when every stored potential is exactly 1.
    pub fn is_binary(&self) -> bool {
        self.potentials.iter().all(|&p| p == 1.0)
    }

    /// Entries sorted lexicographically, for order-insensitive comparison and display.
    pub fn sorted_entries(&self) -> Vec<(Vec<Value>, f64)> {
        let mut out: Vec<(Vec<Value>, f64)> = self.rows().map(|(r, p)| (r.to_vec(), p)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn column_map(&self, target: &[VarId]) -> Option<Vec<usize>> {
        target.iter().map(|&v| self.position(v)).collect()
    }

    /// Projects every row onto the columns in `cols`, returning the flat buffer.
    fn project(&self, cols: &[usize]) -> Vec<Value> {
        let k = self.arity();
        let mut out = Vec::with_capacity(self.len() * cols.len());
        for i in 0..self.len() {
            let row = &self.values[i * k..(i + 1) * k];
            out.extend(cols.iter().map(|&c| row[c]));
        }
        out
    }

    /// Factor product. The output scope is the union of both scopes; an output entry
    /// exists exactly where both inputs are non-zero on the respective projections.
    ///
    /// Fails with [`Error::TableBlowUp`] before allocating when the result would hold more
    /// than `budget` entries.
    pub fn product(&self, other: &SparseFactor, budget: usize) -> Result<SparseFactor> {
        let scope = union_sorted(&self.scope, &other.scope);
        let shared = intersect_sorted(&self.scope, &other.scope);
        let left_cols = self.column_map(&shared).expect("shared vars are in scope");
        let right_cols = other.column_map(&shared).expect("shared vars are in scope");

        // Group the right-hand rows by their projection onto the shared variables.
        let right_keys = other.project(&right_cols);
        let k = shared.len();
        let mut groups: FxHashMap<&[Value], u32> = FxHashMap::default();
        let mut row_group = Vec::with_capacity(other.len());
        for r in 0..other.len() {
            let key = &right_keys[r * k..(r + 1) * k];
            let next = groups.len() as u32;
            row_group.push(*groups.entry(key).or_insert(next));
        }
        let mut offsets = vec![0u32; groups.len() + 1];
        for &g in &row_group {
            offsets[g as usize + 1] += 1;
        }
        for g in 0..groups.len() {
            offsets[g + 1] += offsets[g];
        }
        let mut cursor = offsets.clone();
        let mut ordered = vec![0u32; other.len()];
        for (r, &g) in row_group.iter().enumerate() {
            ordered[cursor[g as usize] as usize] = r as u32;
            cursor[g as usize] += 1;
        }

        // First pass: exact output size.
        let mut scratch = vec![0 as Value; k];
        let mut left_group = Vec::with_capacity(self.len());
        let mut attempted: u64 = 0;
        let lk = self.arity();
        for l in 0..self.len() {
            let row = &self.values[l * lk..(l + 1) * lk];
            for (s, &c) in scratch.iter_mut().zip(&left_cols) {
                *s = row[c];
            }
            match groups.get(scratch.as_slice()) {
                Some(&g) => {
                    attempted += u64::from(offsets[g as usize + 1] - offsets[g as usize]);
                    left_group.push(g);
                }
                None => left_group.push(u32::MAX),
            }
        }
        if attempted > budget as u64 {
            return Err(Error::TableBlowUp {
                attempted,
                budget: budget as u64,
            });
        }

        // Each output column is taken from the left factor when possible.
        enum Src {
            Left(usize),
            Right(usize),
        }
        let sources: Vec<Src> = scope
            .iter()
            .map(|&v| match self.position(v) {
                Some(c) => Src::Left(c),
                None => Src::Right(other.position(v).expect("var from union")),
            })
            .collect();

        let n = attempted as usize;
        let mut values = Vec::with_capacity(n * scope.len());
        let mut potentials = Vec::with_capacity(n);
        let rk = other.arity();
        for (l, &g) in left_group.iter().enumerate() {
            if g == u32::MAX {
                continue;
            }
            let lrow = &self.values[l * lk..(l + 1) * lk];
            let lp = self.potentials[l];
            for &r in &ordered[offsets[g as usize] as usize..offsets[g as usize + 1] as usize] {
                let r = r as usize;
                let p = lp * other.potentials[r];
                if p == 0.0 {
                    continue;
                }
                let rrow = &other.values[r * rk..(r + 1) * rk];
                values.extend(sources.iter().map(|s| match *s {
                    Src::Left(c) => lrow[c],
                    Src::Right(c) => rrow[c],
                }));
                potentials.push(p);
            }
        }
        Ok(SparseFactor::from_parts(scope, values, potentials))
    }

    /// Max-marginal onto `target`, which must be a subset of the scope.
    pub fn max_marginalise(&self, target: &[VarId]) -> Result<SparseFactor> {
        let mut target = target.to_vec();
        target.sort();
        target.dedup();
        let cols = self
            .column_map(&target)
            .ok_or_else(|| Error::contract("marginalisation target is not a subset of the scope"))?;
        if target.len() == self.arity() {
            return Ok(self.clone());
        }
        let k = target.len();
        let projected = self.project(&cols);
        let mut index: FxHashMap<&[Value], usize> = FxHashMap::default();
        let mut values = Vec::new();
        let mut potentials: Vec<f64> = Vec::new();
        for i in 0..self.len() {
            let key = &projected[i * k..(i + 1) * k];
            let p = self.potentials[i];
            match index.get(key) {
                Some(&j) => {
                    if p > potentials[j] {
                        potentials[j] = p;
                    }
                }
                None => {
                    index.insert(key, potentials.len());
                    values.extend_from_slice(key);
                    potentials.push(p);
                }
            }
        }
        Ok(SparseFactor::from_parts(target, values, potentials))
    }

    /// Reduces the factor by evidence: inconsistent entries are dropped and observed
    /// variables leave the scope. Evidence on variables outside the scope is ignored.
    pub fn observe(&self, evidence: &Evidence) -> Result<SparseFactor> {
        let fixed: Vec<(usize, Value)> = self
            .scope
            .iter()
            .enumerate()
            .filter_map(|(c, &v)| evidence.get(v).map(|x| (c, x)))
            .collect();
        if fixed.is_empty() {
            return Ok(self.clone());
        }
        let keep: Vec<usize> = (0..self.arity())
            .filter(|c| !fixed.iter().any(|(f, _)| f == c))
            .collect();
        let scope: Vec<VarId> = keep.iter().map(|&c| self.scope[c]).collect();
        let mut values = Vec::new();
        let mut potentials = Vec::new();
        for (row, p) in self.rows() {
            if fixed.iter().all(|&(c, x)| row[c] == x) {
                values.extend(keep.iter().map(|&c| row[c]));
                potentials.push(p);
            }
        }
        // Rows agreeing on the observed columns and differing elsewhere stay distinct,
        // so no duplicates can appear here.
        if potentials.is_empty() {
            return Err(Error::unsat("observation removed every entry of a factor"));
        }
        Ok(SparseFactor::from_parts(scope, values, potentials))
    }

    /// Keeps only entries satisfying `keep(row)`.
    pub fn retain(&self, mut keep: impl FnMut(&[Value]) -> bool) -> SparseFactor {
        let mut values = Vec::new();
        let mut potentials = Vec::new();
        for (row, p) in self.rows() {
            if keep(row) {
                values.extend_from_slice(row);
                potentials.push(p);
            }
        }
        SparseFactor::from_parts(self.scope.clone(), values, potentials)
    }

    /// Entrywise quotient by a factor over a subset of the scope, with 0/0 = 0.
    ///
    /// A stored (non-zero) numerator entry whose projection is absent from the
    /// denominator is a division of a non-zero by zero and is reported as a contract
    /// violation; it cannot arise from a correct belief-update schedule.
    pub fn divide(&self, denominator: &SparseFactor) -> Result<SparseFactor> {
        let cols = self
            .column_map(&denominator.scope)
            .ok_or_else(|| Error::contract("denominator scope is not a subset of the numerator scope"))?;
        let k = cols.len();
        let den: FxHashMap<&[Value], f64> = denominator.rows().collect();
        let mut scratch = vec![0 as Value; k];
        let mut potentials = Vec::with_capacity(self.len());
        for (row, p) in self.rows() {
            for (s, &c) in scratch.iter_mut().zip(&cols) {
                *s = row[c];
            }
            match den.get(scratch.as_slice()) {
                Some(&q) => potentials.push(p / q),
                None => return Err(Error::contract(format!("division of non-zero entry {row:?} by zero"))),
            }
        }
        Ok(SparseFactor::from_parts(
            self.scope.clone(),
            self.values.clone(),
            potentials,
        ))
    }

    /// Scales potentials so the largest is exactly 1.
    pub fn max_normalise(&self) -> Result<SparseFactor> {
        let max = self.potentials.iter().copied().fold(0.0, f64::max);
        if self.is_empty() || max == 0.0 {
            return Err(Error::unsat("cannot normalise an empty factor"));
        }
        let mut out = self.clone();
        if max != 1.0 {
            for p in &mut out.potentials {
                *p /= max;
            }
        }
        Ok(out)
    }

    /// Number of assignments in exactly one of the two supports.
    pub fn support_divergence(&self, other: &SparseFactor) -> Result<u64> {
        if self.scope != other.scope {
            return Err(Error::contract("support divergence needs identical scopes"));
        }
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let set: FxHashSet<&[Value]> = small.rows().map(|(r, _)| r).collect();
        let common = large.rows().filter(|(r, _)| set.contains(r)).count() as u64;
        Ok(self.len() as u64 + other.len() as u64 - 2 * common)
    }
}

impl PartialEq for SparseFactor {
    fn eq(&self, other: &Self) -> bool {
        self.scope == other.scope && self.len() == other.len() && self.sorted_entries() == other.sorted_entries()
    }
}

impl fmt::Debug for SparseFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 16;
        let entries = self.sorted_entries();
        let mut map = f.debug_map();
        for (row, p) in entries.iter().take(SHOWN) {
            map.entry(row, p);
        }
        map.finish()?;
        if entries.len() > SHOWN {
            write!(f, " (+{} more)", entries.len() - SHOWN)?;
        }
        write!(f, " over {:?}", self.scope)
    }
}

pub fn product(f1: &SparseFactor, f2: &SparseFactor, budget: usize) -> Result<SparseFactor> {
    f1.product(f2, budget)
}

pub fn max_marginalise(f: &SparseFactor, target: &[VarId]) -> Result<SparseFactor> {
    f.max_marginalise(target)
}

pub fn observe(f: &SparseFactor, evidence: &Evidence) -> Result<SparseFactor> {
    f.observe(evidence)
}

pub fn divide(numerator: &SparseFactor, denominator: &SparseFactor) -> Result<SparseFactor> {
    numerator.divide(denominator)
}

pub fn max_normalise(f: &SparseFactor) -> Result<SparseFactor> {
    f.max_normalise()
}

pub fn support_divergence(f1: &SparseFactor, f2: &SparseFactor) -> Result<u64> {
    f1.support_divergence(f2)
}

pub(crate) fn union_sorted(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub(crate) fn intersect_sorted(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn is_subset_sorted(a: &[VarId], b: &[VarId]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}
