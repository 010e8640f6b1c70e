//! Loopy belief update (Lauritzen-Spiegelhalter) in the max-product, 0/1 regime.
//!
//! Every edge stores one sepset belief shared by both directions. Sending `i -> j`
//! replaces it with the max-marginal of cluster `i` and rescales cluster `j` by
//! `new / old`. Messages are scheduled by residual: the support divergence between
//! the message a cluster would send now and the sepset belief it would replace.
//! Convergence means no directed edge has a non-zero residual.

use std::collections::BTreeSet;

use web_time::Instant;

use crate::error::{Error, Result};
use crate::factor::{DomainTable, SparseFactor, VarId};
use crate::graph::ClusterGraph;

/// Messages per directed edge allowed before propagation gives up.
pub const DEFAULT_MESSAGES_PER_EDGE: usize = 50;

#[derive(Clone, Debug)]
pub struct PropagationConfig {
    pub messages_per_edge: usize,
    pub deadline: Option<Instant>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            messages_per_edge: DEFAULT_MESSAGES_PER_EDGE,
            deadline: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    /// Messages popped from the schedule, including ones that changed nothing.
    pub messages: usize,
    /// Messages that changed a sepset belief.
    pub productive: usize,
    /// Entries removed from cluster beliefs.
    pub entries_purged: u64,
}

/// Cluster beliefs plus per-edge sepset beliefs for one cluster graph.
pub struct BeliefState<'g> {
    graph: &'g ClusterGraph,
    domains: &'g DomainTable,
    beliefs: Vec<SparseFactor>,
    /// `None` is the all-ones belief over the sepset's full domain product.
    sepsets: Vec<Option<SparseFactor>>,
    /// Directed edge ids leaving each cluster.
    outgoing: Vec<Vec<usize>>,
}

/// Directed edge `2e` runs `a -> b` of undirected edge `e`; `2e + 1` runs `b -> a`.
fn endpoints(g: &ClusterGraph, d: usize) -> (usize, usize) {
    let e = &g.edges[d / 2];
    if d.is_multiple_of(2) {
        (e.a, e.b)
    } else {
        (e.b, e.a)
    }
}

impl<'g> BeliefState<'g> {
    /// `beliefs[i]` must be defined over `graph.scopes[i]`.
    pub fn new(graph: &'g ClusterGraph, beliefs: Vec<SparseFactor>, domains: &'g DomainTable) -> Result<Self> {
        if beliefs.len() != graph.scopes.len() {
            return Err(Error::contract("one belief per cluster is required"));
        }
        for (b, s) in beliefs.iter().zip(&graph.scopes) {
            if b.scope() != s.as_slice() {
                return Err(Error::contract("belief scope differs from its cluster scope"));
            }
        }
        let mut outgoing = vec![Vec::new(); graph.scopes.len()];
        for d in 0..graph.edges.len() * 2 {
            outgoing[endpoints(graph, d).0].push(d);
        }
        Ok(BeliefState {
            graph,
            domains,
            beliefs,
            sepsets: vec![None; graph.edges.len()],
            outgoing,
        })
    }

    pub fn beliefs(&self) -> &[SparseFactor] {
        &self.beliefs
    }

    pub fn into_beliefs(self) -> Vec<SparseFactor> {
        self.beliefs
    }

    /// Current sepset belief of undirected edge `e`, materialising the all-ones
    /// initial belief if no message has crossed it yet.
    pub fn sepset_belief(&self, e: usize) -> SparseFactor {
        match &self.sepsets[e] {
            Some(f) => f.clone(),
            None => SparseFactor::full(self.graph.edges[e].sepset.clone(), self.domains),
        }
    }

    pub fn total_support(&self) -> u64 {
        self.beliefs.iter().map(|b| b.len() as u64).sum()
    }

    /// The message cluster `from` would send over directed edge `d`, with its
    /// divergence from the stored sepset belief.
    fn candidate(&self, d: usize) -> Result<(SparseFactor, u64)> {
        let (from, _) = endpoints(self.graph, d);
        let e = d / 2;
        let msg = self.beliefs[from].max_marginalise(&self.graph.edges[e].sepset)?;
        let dev = match &self.sepsets[e] {
            Some(old) => msg.support_divergence(old)?,
            None => full_size(&self.graph.edges[e].sepset, self.domains).saturating_sub(msg.len() as u64),
        };
        Ok((msg, dev))
    }

    /// Sends directed edge `d` (see [`endpoints`]) and returns its deviation.
    pub fn pass_message(&mut self, d: usize) -> Result<u64> {
        let (msg, dev) = self.candidate(d)?;
        self.apply(d, msg, dev)?;
        Ok(dev)
    }

    fn apply(&mut self, d: usize, msg: SparseFactor, dev: u64) -> Result<()> {
        if dev == 0 {
            return Ok(());
        }
        let (_, to) = endpoints(self.graph, d);
        let e = d / 2;
        let target = &self.beliefs[to];
        let scaled = target.product(&msg, target.len())?;
        let updated = match &self.sepsets[e] {
            Some(old) => scaled.divide(old)?,
            None => scaled,
        };
        if updated.is_empty() {
            return Err(Error::unsat("a cluster belief lost its last entry"));
        }
        self.beliefs[to] = updated.max_normalise()?;
        self.sepsets[e] = Some(msg);
        Ok(())
    }

    /// Runs residual-scheduled belief update until every directed edge has deviation 0.
    pub fn propagate(&mut self, config: &PropagationConfig) -> Result<PropagationStats> {
        let directed = self.graph.edges.len() * 2;
        let budget = config.messages_per_edge.saturating_mul(directed);
        let mut priority = vec![u64::MAX; directed];
        // Highest priority first, lowest edge index among ties.
        let mut queue: BTreeSet<(std::cmp::Reverse<u64>, usize)> =
            (0..directed).map(|d| (std::cmp::Reverse(u64::MAX), d)).collect();
        let mut pending: Vec<Option<(SparseFactor, u64)>> = vec![None; directed];
        let mut stats = PropagationStats::default();

        while let Some((_, d)) = queue.pop_first() {
            if stats.messages >= budget {
                queue.insert((std::cmp::Reverse(priority[d]), d));
                let pending = queue
                    .iter()
                    .map(|&(std::cmp::Reverse(p), d)| {
                        let (a, b) = endpoints(self.graph, d);
                        (a, b, p)
                    })
                    .collect();
                return Err(Error::IterationBudget { budget, pending });
            }
            if let Some(deadline) = config.deadline {
                if Instant::now() >= deadline {
                    return Err(Error::Timeout);
                }
            }
            stats.messages += 1;
            priority[d] = 0;
            let (msg, dev) = match pending[d].take() {
                Some(c) => c,
                None => self.candidate(d)?,
            };
            if dev == 0 {
                continue;
            }
            let (_, to) = endpoints(self.graph, d);
            let before = self.beliefs[to].len() as u64;
            self.apply(d, msg, dev)?;
            stats.productive += 1;
            stats.entries_purged += before - self.beliefs[to].len() as u64;

            // The receiving cluster changed: refresh the residual of everything it sends.
            for &out in &self.outgoing[to] {
                let (cand, dev) = self.candidate(out)?;
                queue.remove(&(std::cmp::Reverse(priority[out]), out));
                if dev > 0 {
                    priority[out] = dev;
                    queue.insert((std::cmp::Reverse(dev), out));
                    pending[out] = Some((cand, dev));
                } else {
                    priority[out] = 0;
                    pending[out] = None;
                }
            }
        }
        Ok(stats)
    }
}

/// Size of the full domain product of a scope, saturating at `u64::MAX`.
pub(crate) fn full_size(scope: &[VarId], domains: &DomainTable) -> u64 {
    scope
        .iter()
        .fold(1u64, |acc, &v| acc.saturating_mul(domains.size(v) as u64))
}

/// Calibrates `beliefs` over `graph`, returning the updated beliefs.
pub fn propagate(
    graph: &ClusterGraph,
    beliefs: Vec<SparseFactor>,
    domains: &DomainTable,
    config: &PropagationConfig,
) -> Result<(Vec<SparseFactor>, PropagationStats)> {
    let mut state = BeliefState::new(graph, beliefs, domains)?;
    let stats = state.propagate(config)?;
    Ok((state.into_beliefs(), stats))
}
