//! The outer purge-and-merge loop and joint-solution enumeration.
//!
//! Each round raises the entropy threshold, clusters and merges factors, rebuilds the
//! cluster graph, propagates, and purges. The loop ends once the graph it propagated
//! on has no cycles, at which point the residual factors are calibrated exactly.

use std::time::Duration;

use rustc_hash::FxHashMap;
use serde::Serialize;
use web_time::Instant;

use crate::codec::{encode_clause, CspInstance};
use crate::error::{Error, Result};
use crate::factor::{
    is_subset_sorted, upper_bound_entropy, DomainTable, Evidence, SparseFactor, Value, ValueSet, VarId,
};
use crate::graph::{is_tree, ltrip, ClusterGraph};
use crate::inference::{self, PropagationConfig, DEFAULT_MESSAGES_PER_EDGE};
use crate::merge::{cluster_factors, merge_cluster, MergeOrder, Metric};
use crate::purge::{reduce_domains, reduce_variables};

pub const DEFAULT_MAX_TABLE_ENTRIES: usize = 5_000_000;
pub const DEFAULT_THRESHOLD_INIT: f64 = 1.5;
pub const DEFAULT_ENUMERATION_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Multiplier on the largest initial clause entropy.
    pub threshold_init: f64,
    /// Bits added per round; `None` uses log2 of the largest domain.
    pub threshold_growth: Option<f64>,
    pub max_table_entries: usize,
    pub messages_per_edge: usize,
    pub metric: Metric,
    pub merge_order: MergeOrder,
    pub enumeration_cap: usize,
    pub timeout: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            threshold_init: DEFAULT_THRESHOLD_INIT,
            threshold_growth: None,
            max_table_entries: DEFAULT_MAX_TABLE_ENTRIES,
            messages_per_edge: DEFAULT_MESSAGES_PER_EDGE,
            metric: Metric::default(),
            merge_order: MergeOrder::default(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            timeout: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_init.is_finite() && self.threshold_init > 0.0) {
            return Err(Error::contract("threshold-init must be a positive number"));
        }
        if let Some(g) = self.threshold_growth {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::contract("threshold-growth must be positive"));
            }
        }
        if self.max_table_entries == 0 || self.messages_per_edge == 0 || self.enumeration_cap == 0 {
            return Err(Error::contract("budgets must be positive"));
        }
        Ok(())
    }
}

/// `Ĥτ(step) = base + step * growth`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ThresholdSchedule {
    pub base: f64,
    pub growth: f64,
}

impl ThresholdSchedule {
    pub fn new(instance: &CspInstance, config: &SolverConfig) -> Self {
        let widest = instance
            .clauses
            .iter()
            .map(|c| upper_bound_entropy(&c.scope, &instance.domains))
            .fold(0.0, f64::max);
        let largest = instance.domains.max_size();
        let growth = config
            .threshold_growth
            .unwrap_or(if largest > 1 { (largest as f64).log2() } else { 1.0 });
        ThresholdSchedule {
            base: widest * config.threshold_init,
            growth,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        self.base + step as f64 * self.growth
    }
}

/// Threshold in bits for round `round`, ignoring stall bumps.
pub fn threshold_schedule(round: usize, instance: &CspInstance, config: &SolverConfig) -> f64 {
    ThresholdSchedule::new(instance, config).at(round)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundStats {
    pub round: usize,
    pub threshold: f64,
    pub factors_in: usize,
    pub clusters: usize,
    /// Largest table produced by merging or absorption this round.
    pub max_table_entries: usize,
    pub messages: usize,
    pub entries_purged: u64,
    pub values_removed: usize,
    pub vars_solved: usize,
    pub is_tree: bool,
    pub wall_time_secs: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Every variable was pinned to one value.
    AllSolved,
    /// The residual factors form a forest.
    Tree,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Variables with a single remaining value, givens included.
    pub solved: Evidence,
    /// Residual calibrated factors over the unsolved variables.
    pub factors: Vec<SparseFactor>,
    pub domains: DomainTable,
    pub rounds: Vec<RoundStats>,
    /// Largest table seen: initial clause tables and every merge product.
    pub peak_table_entries: usize,
    pub termination: Termination,
}

impl SolveReport {
    /// Unsolved variables that no residual factor mentions.
    pub fn free_vars(&self) -> Vec<VarId> {
        let mut covered = vec![false; self.domains.len()];
        for (v, _) in self.solved.iter() {
            covered[v.index()] = true;
        }
        for f in &self.factors {
            for v in f.scope() {
                covered[v.index()] = true;
            }
        }
        (0..self.domains.len())
            .filter(|&i| !covered[i])
            .map(|i| VarId(i as u32))
            .collect()
    }

    /// The unique assignment, when every variable is pinned.
    pub fn assignment(&self) -> Option<Vec<Value>> {
        (0..self.domains.len())
            .map(|i| {
                let v = VarId(i as u32);
                self.solved.get(v).or_else(|| {
                    let d = self.domains.get(v);
                    (d.len() == 1 && !self.factors.iter().any(|f| f.contains_var(v)))
                        .then(|| d.min().expect("one value"))
                })
            })
            .collect()
    }
}

/// A failed solve with the statistics gathered up to the failure.
#[derive(Clone, Debug)]
pub struct SolveFailure {
    pub error: Error,
    pub rounds: Vec<RoundStats>,
    pub peak_table_entries: usize,
}

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} rounds)", self.error, self.rounds.len())
    }
}

impl std::error::Error for SolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Stage {
    Encoded,
    Merged { round: usize },
    Propagated { round: usize },
    DomainsReduced { round: usize },
    VariablesReduced { round: usize },
}

/// Hooks into the solver loop. `factors` plus `solved` always describe the full
/// current state of the problem.
pub trait SolveObserver {
    fn on_stage(&mut self, _stage: Stage, _factors: &[SparseFactor], _solved: &Evidence, _domains: &DomainTable) {}

    fn on_graph(&mut self, _round: usize, _graph: &ClusterGraph) {}
}

impl SolveObserver for () {}

pub fn purge_and_merge(
    instance: &CspInstance,
    config: &SolverConfig,
) -> std::result::Result<SolveReport, SolveFailure> {
    purge_and_merge_observed(instance, config, &mut ())
}

pub fn purge_and_merge_observed(
    instance: &CspInstance,
    config: &SolverConfig,
    observer: &mut dyn SolveObserver,
) -> std::result::Result<SolveReport, SolveFailure> {
    let mut run = Run {
        instance,
        config,
        rounds: Vec::new(),
        peak: 0,
        deadline: config.timeout.map(|t| Instant::now() + t),
    };
    match run.solve(observer) {
        Ok((solved, factors, domains, termination)) => Ok(SolveReport {
            solved,
            factors,
            domains,
            rounds: run.rounds,
            peak_table_entries: run.peak,
            termination,
        }),
        Err(error) => Err(SolveFailure {
            error,
            rounds: run.rounds,
            peak_table_entries: run.peak,
        }),
    }
}

struct Run<'a> {
    instance: &'a CspInstance,
    config: &'a SolverConfig,
    rounds: Vec<RoundStats>,
    peak: usize,
    deadline: Option<Instant>,
}

impl Run<'_> {
    fn check_time(&self) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Error::Timeout),
            _ => Ok(()),
        }
    }

    fn solve(
        &mut self,
        observer: &mut dyn SolveObserver,
    ) -> Result<(Evidence, Vec<SparseFactor>, DomainTable, Termination)> {
        self.config.validate()?;
        self.instance
            .validate()
            .map_err(|e| Error::contract(format!("malformed instance: {e}")))?;
        let budget = self.config.max_table_entries;

        let mut domains = self.instance.domains.clone();
        for (v, x) in self.instance.evidence.iter() {
            domains.set(v, ValueSet::single(x));
        }
        let mut solved = self.instance.evidence.clone();
        let mut factors = Vec::with_capacity(self.instance.clauses.len());
        for clause in &self.instance.clauses {
            let f = encode_clause(clause, &domains, budget)?.observe(&solved)?;
            self.peak = self.peak.max(f.len());
            if f.arity() > 0 {
                factors.push(f);
            }
        }
        observer.on_stage(Stage::Encoded, &factors, &solved, &domains);

        let schedule = ThresholdSchedule::new(self.instance, self.config);
        let mut bumps = 0;
        for round in 0.. {
            self.check_time()?;
            if factors.is_empty() {
                return Ok((solved, factors, domains, Termination::AllSolved));
            }
            let started = Instant::now();
            let threshold = schedule.at(round + bumps);
            let factors_in = factors.len();

            let clusters = cluster_factors(
                &factors,
                &domains,
                threshold,
                self.config.metric,
                self.config.merge_order,
            )?;
            let merged_any = clusters.len() < factors.len();
            let mut slots: Vec<Option<SparseFactor>> = factors.into_iter().map(Some).collect();
            let mut merged = Vec::with_capacity(clusters.len());
            let mut round_peak = 0;
            for members in &clusters {
                let group = members
                    .iter()
                    .map(|&i| slots[i].take().expect("each factor in one cluster"))
                    .collect();
                let (f, peak) = merge_cluster(group, budget)?;
                round_peak = round_peak.max(peak);
                merged.push(f);
                self.check_time()?;
            }
            let (factors_merged, absorb_peak) = absorb_subsumed(merged, budget)?;
            round_peak = round_peak.max(absorb_peak);
            self.peak = self.peak.max(round_peak);
            observer.on_stage(Stage::Merged { round }, &factors_merged, &solved, &domains);

            let graph = ltrip(&factors_merged.iter().map(|f| f.scope().to_vec()).collect::<Vec<_>>());
            observer.on_graph(round, &graph);
            let tree = is_tree(&graph);
            let prop = PropagationConfig {
                messages_per_edge: self.config.messages_per_edge,
                deadline: self.deadline,
            };
            let (beliefs, pstats) = inference::propagate(&graph, factors_merged, &domains, &prop)?;
            observer.on_stage(Stage::Propagated { round }, &beliefs, &solved, &domains);

            let dom = reduce_domains(beliefs, &mut domains)?;
            observer.on_stage(Stage::DomainsReduced { round }, &dom.factors, &solved, &domains);
            let var = reduce_variables(dom.factors, &mut domains)?;
            solved.extend(&var.solved)?;
            factors = var.factors;
            observer.on_stage(Stage::VariablesReduced { round }, &factors, &solved, &domains);

            self.rounds.push(RoundStats {
                round,
                threshold,
                factors_in,
                clusters: clusters.len(),
                max_table_entries: round_peak,
                messages: pstats.messages,
                entries_purged: pstats.entries_purged,
                values_removed: dom.removed.len(),
                vars_solved: var.solved.len(),
                is_tree: tree,
                wall_time_secs: started.elapsed().as_secs_f64(),
            });

            if factors.is_empty() {
                return Ok((solved, factors, domains, Termination::AllSolved));
            }
            if tree {
                return Ok((solved, factors, domains, Termination::Tree));
            }
            let purged = pstats.entries_purged > 0 || !dom.removed.is_empty() || !var.solved.is_empty();
            if !merged_any && !purged {
                bumps += 1;
            }
        }
        unreachable!("the round loop only exits by returning")
    }
}

/// Multiplies every factor whose scope lies inside another factor's scope into that
/// factor. Returns the survivors and the largest product formed.
pub fn absorb_subsumed(factors: Vec<SparseFactor>, budget: usize) -> Result<(Vec<SparseFactor>, usize)> {
    let mut order: Vec<usize> = (0..factors.len()).collect();
    // Widest first so every factor meets its potential hosts before itself.
    order.sort_by_key(|&i| (std::cmp::Reverse(factors[i].arity()), i));
    let mut slots: Vec<Option<SparseFactor>> = factors.into_iter().map(Some).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut peak = 0;
    for i in order {
        let f = slots[i].take().expect("visited once");
        let host = kept
            .iter()
            .copied()
            .find(|&k| is_subset_sorted(f.scope(), slots[k].as_ref().expect("kept").scope()));
        match host {
            Some(k) => {
                let h = slots[k].as_mut().expect("kept");
                *h = h.product(&f, budget)?;
                if h.is_empty() {
                    return Err(Error::unsat("absorbing a subsumed factor emptied its host"));
                }
                peak = peak.max(h.len());
            }
            None => {
                slots[i] = Some(f);
                kept.push(i);
            }
        }
    }
    kept.sort();
    Ok((kept.into_iter().map(|k| slots[k].take().expect("kept")).collect(), peak))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Enumeration {
    /// Complete assignments in lexicographic order.
    pub solutions: Vec<Vec<Value>>,
    /// More solutions exist beyond the cap.
    pub truncated: bool,
}

/// Lists the joint solutions of a finished solve by joining the residual factors,
/// then extending with the solved variables and any unconstrained ones.
pub fn enumerate_solutions(report: &SolveReport, cap: usize) -> Enumeration {
    let n = report.domains.len();
    let mut assignment: Vec<Option<Value>> = vec![None; n];
    for (v, x) in report.solved.iter() {
        assignment[v.index()] = Some(x);
    }

    // Visit factors so each one after the first shares variables with an earlier one
    // where possible.
    let mut order = Vec::with_capacity(report.factors.len());
    let mut placed = vec![false; report.factors.len()];
    let mut seen = vec![false; n];
    while order.len() < report.factors.len() {
        let next = (0..report.factors.len())
            .filter(|&i| !placed[i])
            .max_by_key(|&i| {
                let shared = report.factors[i].scope().iter().filter(|v| seen[v.index()]).count();
                (shared, std::cmp::Reverse(report.factors[i].len()), std::cmp::Reverse(i))
            })
            .expect("unplaced factor");
        placed[next] = true;
        for v in report.factors[next].scope() {
            seen[v.index()] = true;
        }
        order.push(next);
    }

    let mut steps = Vec::with_capacity(order.len());
    let mut bound = vec![false; n];
    for &i in &order {
        let f = &report.factors[i];
        let key_cols: Vec<usize> = (0..f.arity()).filter(|&c| bound[f.scope()[c].index()]).collect();
        let mut index: FxHashMap<Vec<Value>, Vec<usize>> = FxHashMap::default();
        for r in 0..f.len() {
            let row = f.row(r);
            index
                .entry(key_cols.iter().map(|&c| row[c]).collect())
                .or_default()
                .push(r);
        }
        for v in f.scope() {
            bound[v.index()] = true;
        }
        steps.push(JoinStep {
            factor: f,
            key_cols,
            index,
        });
    }

    let mut out = Enumeration::default();
    let free = report.free_vars();
    let mut walker = Walker {
        steps: &steps,
        free: &free,
        domains: &report.domains,
        cap,
        out: &mut out,
    };
    walker.walk(0, &mut assignment);
    out.solutions.sort();
    out
}

struct JoinStep<'a> {
    factor: &'a SparseFactor,
    key_cols: Vec<usize>,
    index: FxHashMap<Vec<Value>, Vec<usize>>,
}

struct Walker<'a> {
    steps: &'a [JoinStep<'a>],
    free: &'a [VarId],
    domains: &'a DomainTable,
    cap: usize,
    out: &'a mut Enumeration,
}

impl Walker<'_> {
    /// Returns false once the cap has been hit and a further solution was found.
    fn walk(&mut self, depth: usize, assignment: &mut [Option<Value>]) -> bool {
        if depth < self.steps.len() {
            let step = &self.steps[depth];
            let scope = step.factor.scope();
            let key: Vec<Value> = step
                .key_cols
                .iter()
                .map(|&c| assignment[scope[c].index()].expect("bound earlier"))
                .collect();
            let Some(rows) = step.index.get(&key) else { return true };
            for &r in rows {
                let row = step.factor.row(r);
                for (v, &x) in scope.iter().zip(row) {
                    assignment[v.index()] = Some(x);
                }
                let go_on = self.walk(depth + 1, assignment);
                for (c, v) in scope.iter().enumerate() {
                    if !step.key_cols.contains(&c) {
                        assignment[v.index()] = None;
                    }
                }
                if !go_on {
                    return false;
                }
            }
            return true;
        }
        let k = depth - self.steps.len();
        if k < self.free.len() {
            let v = self.free[k];
            for x in self.domains.get(v).iter() {
                assignment[v.index()] = Some(x);
                let go_on = self.walk(depth + 1, assignment);
                assignment[v.index()] = None;
                if !go_on {
                    return false;
                }
            }
            return true;
        }
        if self.out.solutions.len() == self.cap {
            self.out.truncated = true;
            return false;
        }
        self.out
            .solutions
            .push(assignment.iter().map(|x| x.expect("complete assignment")).collect());
        true
    }
}
