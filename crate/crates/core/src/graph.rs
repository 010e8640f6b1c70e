//! Cluster graphs built with LTRIP, plus running-intersection and tree checks.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::factor::{intersect_sorted, VarId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Lower cluster index.
    pub a: usize,
    /// Higher cluster index.
    pub b: usize,
    /// Sorted sepset, a subset of both endpoint scopes.
    pub sepset: Vec<VarId>,
}

/// Clusters (sorted scopes) connected by sepset-labelled edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterGraph {
    pub scopes: Vec<Vec<VarId>>,
    pub edges: Vec<Edge>,
}

/// Outcome of [`validate_rip`]: every variable whose sepset subgraph is not a tree
/// spanning the clusters that contain it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RipReport {
    pub violations: Vec<VarId>,
}

impl RipReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Builds a RIP-satisfying cluster graph by superimposing, for each variable, a
/// maximum-overlap spanning tree over the clusters containing it.
///
/// Callers should absorb subsumed scopes first; the result is still RIP-valid
/// without that, but may carry redundant edges.
pub fn ltrip(scopes: &[Vec<VarId>]) -> ClusterGraph {
    let scopes: Vec<Vec<VarId>> = scopes
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort();
            s.dedup();
            s
        })
        .collect();

    let mut holders: BTreeMap<VarId, Vec<usize>> = BTreeMap::new();
    for (i, scope) in scopes.iter().enumerate() {
        for &v in scope {
            holders.entry(v).or_default().push(i);
        }
    }

    let mut sepsets: BTreeMap<(usize, usize), Vec<VarId>> = BTreeMap::new();
    for (&var, clusters) in &holders {
        for (a, b) in max_spanning_tree(clusters, &scopes) {
            sepsets.entry((a, b)).or_default().push(var);
        }
    }

    let edges = sepsets
        .into_iter()
        .map(|((a, b), sepset)| Edge { a, b, sepset })
        .collect();
    ClusterGraph { scopes, edges }
}

/// Prim growth from the lowest cluster index. Candidate edges are ranked by overlap,
/// ties broken towards the lexicographically smallest `(low, high)` pair.
fn max_spanning_tree(clusters: &[usize], scopes: &[Vec<VarId>]) -> Vec<(usize, usize)> {
    let n = clusters.len();
    if n < 2 {
        return Vec::new();
    }
    let weight = |i: usize, j: usize| intersect_sorted(&scopes[clusters[i]], &scopes[clusters[j]]).len();
    let pair = |i: usize, j: usize| {
        let (x, y) = (clusters[i], clusters[j]);
        (x.min(y), x.max(y))
    };

    let mut in_tree = vec![false; n];
    // best[v] = (weight, pair) of the strongest link into the tree
    let mut best: Vec<Option<(usize, (usize, usize))>> = vec![None; n];
    let better = |cand: (usize, (usize, usize)), cur: Option<(usize, (usize, usize))>| match cur {
        None => true,
        Some((w, p)) => cand.0 > w || (cand.0 == w && cand.1 < p),
    };

    in_tree[0] = true;
    for (v, slot) in best.iter_mut().enumerate().skip(1) {
        *slot = Some((weight(0, v), pair(0, v)));
    }
    let mut out = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let link = best[v].expect("every outside node has a link");
            if pick.is_none_or(|u| better(link, best[u])) {
                pick = Some(v);
            }
        }
        let v = pick.expect("tree not yet spanning");
        in_tree[v] = true;
        out.push(best[v].unwrap().1);
        for u in 0..n {
            if !in_tree[u] {
                let cand = (weight(v, u), pair(v, u));
                if better(cand, best[u]) {
                    best[u] = Some(cand);
                }
            }
        }
    }
    out
}

/// Checks the running intersection property for every variable, along with the
/// sepset-subset and non-empty-sepset conditions.
pub fn validate_rip(g: &ClusterGraph) -> RipReport {
    let mut holders: BTreeMap<VarId, Vec<usize>> = BTreeMap::new();
    for (i, scope) in g.scopes.iter().enumerate() {
        for &v in scope {
            holders.entry(v).or_default().push(i);
        }
    }
    let mut carriers: BTreeMap<VarId, Vec<(usize, usize)>> = BTreeMap::new();
    let mut violations = Vec::new();
    for e in &g.edges {
        for &v in &e.sepset {
            let inside = g.scopes[e.a].binary_search(&v).is_ok() && g.scopes[e.b].binary_search(&v).is_ok();
            if !inside {
                violations.push(v);
            }
            carriers.entry(v).or_default().push((e.a, e.b));
        }
    }
    for (&var, clusters) in &holders {
        let edges = carriers.get(&var).map(Vec::as_slice).unwrap_or(&[]);
        if edges.len() + 1 != clusters.len() {
            violations.push(var);
            continue;
        }
        let mut uf = UnionFind::new(g.scopes.len());
        if !edges.iter().all(|&(a, b)| uf.union(a, b)) {
            violations.push(var);
            continue;
        }
        let root = uf.find(clusters[0]);
        if clusters.iter().any(|&c| uf.find(c) != root) {
            violations.push(var);
        }
    }
    violations.sort();
    violations.dedup();
    RipReport { violations }
}

/// True when the edge set is acyclic. A forest counts: inference is exact per component.
pub fn is_tree(g: &ClusterGraph) -> bool {
    let mut uf = UnionFind::new(g.scopes.len());
    g.edges.iter().all(|e| uf.union(e.a, e.b))
}

impl ClusterGraph {
    pub fn len(&self) -> usize {
        self.scopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    /// Every sepset is non-empty and lies inside both endpoint scopes.
    pub fn sepsets_well_formed(&self) -> bool {
        self.edges.iter().all(|e| {
            !e.sepset.is_empty()
                && e.sepset == intersect_sorted(&e.sepset, &intersect_sorted(&self.scopes[e.a], &self.scopes[e.b]))
        })
    }

    /// Text adjacency listing; `name` renders variables.
    pub fn dump(&self, name: impl Fn(VarId) -> String) -> String {
        let join = |vs: &[VarId]| vs.iter().map(|&v| name(v)).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        for (i, s) in self.scopes.iter().enumerate() {
            let _ = writeln!(out, "cluster {i}: {}", join(s));
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} -- {}: {}", e.a, e.b, join(&e.sepset));
        }
        out
    }
}

impl fmt::Display for ClusterGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump(|v| v.to_string()))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(ids: &[u32]) -> Vec<VarId> {
        ids.iter().map(|&i| VarId(i)).collect()
    }

    #[test]
    fn single_cluster_has_no_edges() {
        let g = ltrip(&[v(&[0, 1])]);
        assert!(g.edges.is_empty());
        assert!(validate_rip(&g).is_valid());
        assert!(is_tree(&g));
    }

    #[test]
    fn two_overlapping_clusters() {
        let g = ltrip(&[v(&[0, 1]), v(&[1, 2])]);
        assert_eq!(
            g.edges,
            vec![Edge {
                a: 0,
                b: 1,
                sepset: v(&[1])
            }]
        );
    }

    /// Every spanning tree over three clusters, scored by total overlap.
    fn best_spanning_trees(scopes: &[Vec<VarId>]) -> Vec<Vec<(usize, usize)>> {
        let candidates = [vec![(0, 1), (1, 2)], vec![(0, 1), (0, 2)], vec![(0, 2), (1, 2)]];
        let w = |(a, b): (usize, usize)| intersect_sorted(&scopes[a], &scopes[b]).len();
        let total = |t: &Vec<(usize, usize)>| t.iter().map(|&e| w(e)).sum::<usize>();
        let best = candidates.iter().map(total).max().unwrap();
        candidates.into_iter().filter(|t| total(t) == best).collect()
    }

    #[test]
    fn chain_of_three() {
        // A=0 .. E=4
        let scopes = [v(&[0, 1, 2]), v(&[1, 2, 3]), v(&[2, 3, 4])];
        assert_eq!(best_spanning_trees(&scopes), vec![vec![(0, 1), (1, 2)]]);
        let g = ltrip(&scopes);
        assert_eq!(
            g.edges,
            vec![
                Edge {
                    a: 0,
                    b: 1,
                    sepset: v(&[1, 2])
                },
                Edge {
                    a: 1,
                    b: 2,
                    sepset: v(&[2, 3])
                },
            ]
        );
        assert!(validate_rip(&g).is_valid());
        assert!(is_tree(&g));
    }

    #[test]
    fn triangle_carrying_shared_variable_violates_rip() {
        let scopes = vec![v(&[0, 1]), v(&[0, 2]), v(&[0, 3])];
        let g = ClusterGraph {
            scopes,
            edges: vec![
                Edge {
                    a: 0,
                    b: 1,
                    sepset: v(&[0]),
                },
                Edge {
                    a: 1,
                    b: 2,
                    sepset: v(&[0]),
                },
                Edge {
                    a: 0,
                    b: 2,
                    sepset: v(&[0]),
                },
            ],
        };
        assert_eq!(validate_rip(&g).violations, v(&[0]));
        assert!(!is_tree(&g));
    }

    #[test]
    fn missing_link_violates_rip() {
        let g = ClusterGraph {
            scopes: vec![v(&[0, 1]), v(&[0, 2])],
            edges: vec![],
        };
        assert_eq!(validate_rip(&g).violations, v(&[0]));
    }

    #[test]
    fn forest_counts_as_tree() {
        let g = ltrip(&[v(&[0, 1]), v(&[2, 3])]);
        assert!(g.edges.is_empty());
        assert!(is_tree(&g));
        assert!(validate_rip(&g).is_valid());
    }

    #[test]
    fn ltrip_is_deterministic() {
        let scopes = [v(&[0, 1, 2]), v(&[0, 3]), v(&[1, 3, 4]), v(&[2, 4]), v(&[0, 4])];
        assert_eq!(ltrip(&scopes), ltrip(&scopes));
    }

    #[test]
    fn bethe_graph_satisfies_rip() {
        // Clause clusters {0,1},{1,2},{0,2} plus one singleton cluster per variable,
        // linked by univariate sepsets.
        let mut scopes = vec![v(&[0, 1]), v(&[1, 2]), v(&[0, 2])];
        let mut edges = Vec::new();
        for var in 0..3u32 {
            let hub = scopes.len();
            scopes.push(v(&[var]));
            for (i, s) in scopes[..3].iter().enumerate() {
                if s.contains(&VarId(var)) {
                    edges.push(Edge {
                        a: i,
                        b: hub,
                        sepset: v(&[var]),
                    });
                }
            }
        }
        let g = ClusterGraph { scopes, edges };
        assert!(validate_rip(&g).is_valid());
        assert!(!is_tree(&g));
    }

    #[test]
    fn dump_lists_clusters_and_edges() {
        let g = ltrip(&[v(&[0, 1]), v(&[1, 2])]);
        assert_eq!(g.to_string(), "cluster 0: x0 x1\ncluster 1: x1 x2\nedge 0 -- 1: x1\n");
    }
}
