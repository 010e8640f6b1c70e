//! Attraction metrics and greedy factor clustering.
//!
//! Clustering starts from singleton clusters and repeatedly takes the strongest
//! remaining attraction. The pair merges when its union scope stays within the
//! upper-bound entropy threshold; otherwise that one attraction is discarded.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{
    intersect_sorted, is_subset_sorted, union_sorted, upper_bound_entropy, DomainTable, SparseFactor, VarId,
};

/// Slack for comparing entropies accumulated in floating point.
const ENTROPY_EPS: f64 = 1e-9;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Gravity,
    Entropy,
    Overlap,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Gravity, Metric::Entropy, Metric::Overlap];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Gravity => "gravity",
            Metric::Entropy => "entropy",
            Metric::Overlap => "overlap",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric `{s}` (expected gravity, entropy or overlap)"))
    }
}

/// Which end of the attraction ranking is merged first.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeOrder {
    #[default]
    StrongestFirst,
    WeakestFirst,
}

impl FromStr for MergeOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strongest-first" => Ok(MergeOrder::StrongestFirst),
            "weakest-first" => Ok(MergeOrder::WeakestFirst),
            _ => Err(format!(
                "unknown merge order `{s}` (expected strongest-first or weakest-first)"
            )),
        }
    }
}

/// Number of shared variables.
pub fn attraction_overlap(a: &[VarId], b: &[VarId]) -> usize {
    intersect_sorted(a, b).len()
}

/// Upper-bound entropy of the shared variables.
pub fn attraction_entropy(a: &[VarId], b: &[VarId], domains: &DomainTable) -> f64 {
    upper_bound_entropy(&intersect_sorted(a, b), domains)
}

/// KL divergence (bits) of the factor's normalised distribution from the uniform
/// distribution over its scope's full domain product. For a 0/1 factor with `k`
/// entries over a space of size `D` this is `log2(D / k)`.
pub fn mass(f: &SparseFactor, domains: &DomainTable) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::unsat("mass of an empty factor"));
    }
    let log_space = upper_bound_entropy(f.scope(), domains);
    let m = if f.is_binary() {
        log_space - (f.len() as f64).log2()
    } else {
        let total: f64 = f.rows().map(|(_, p)| p).sum();
        let neg_entropy: f64 = f
            .rows()
            .map(|(_, p)| {
                let q = p / total;
                q * q.log2()
            })
            .sum();
        log_space + neg_entropy
    };
    Ok(m.max(0.0))
}

/// `log2(H(a ∪ b) / H(a ∩ b))` with upper-bound entropies. `None` when the shared
/// variables carry no entropy (disjoint scopes, or only single-valued variables).
pub fn distance(a: &[VarId], b: &[VarId], domains: &DomainTable) -> Option<f64> {
    let shared = upper_bound_entropy(&intersect_sorted(a, b), domains);
    if shared <= 0.0 {
        return None;
    }
    let joint = upper_bound_entropy(&union_sorted(a, b), domains);
    Some((joint / shared).log2().max(0.0))
}

/// `mass / r²`; zero distance (one scope inside the other) is infinitely attractive.
pub fn attraction_gravity(mass: f64, r: f64) -> f64 {
    if r <= 0.0 {
        f64::INFINITY
    } else {
        mass / (r * r)
    }
}

/// Per-cluster state of the clustering procedure.
#[derive(Clone, Debug)]
struct Cluster {
    members: Vec<usize>,
    scope: Vec<VarId>,
    mass: f64,
}

/// Clusters, masses and directed attractions `a[(i, j)]` = attraction of `j` towards `i`.
#[derive(Clone, Debug)]
pub struct AttractionState<'d> {
    clusters: Vec<Option<Cluster>>,
    attractions: BTreeMap<(usize, usize), f64>,
    domains: &'d DomainTable,
    metric: Metric,
}

impl<'d> AttractionState<'d> {
    pub fn new(factors: &[SparseFactor], domains: &'d DomainTable, metric: Metric) -> Result<Self> {
        let clusters = factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                Ok(Some(Cluster {
                    members: vec![i],
                    scope: f.scope().to_vec(),
                    mass: if metric == Metric::Gravity {
                        mass(f, domains)?
                    } else {
                        0.0
                    },
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut state = AttractionState {
            clusters,
            attractions: BTreeMap::new(),
            domains,
            metric,
        };
        // Index variables so only overlapping pairs are visited.
        let mut holders: BTreeMap<VarId, Vec<usize>> = BTreeMap::new();
        for (i, f) in factors.iter().enumerate() {
            for &v in f.scope() {
                holders.entry(v).or_default().push(i);
            }
        }
        let mut pairs = std::collections::BTreeSet::new();
        for list in holders.values() {
            for (x, &i) in list.iter().enumerate() {
                for &j in &list[x + 1..] {
                    pairs.insert((i, j));
                }
            }
        }
        for (i, j) in pairs {
            state.link(i, j);
        }
        Ok(state)
    }

    fn cluster(&self, i: usize) -> &Cluster {
        self.clusters[i].as_ref().expect("live cluster")
    }

    /// Attraction of `j` towards `i`, or `None` when the pair shares no entropy.
    fn attraction(&self, i: usize, j: usize) -> Option<f64> {
        let (ci, cj) = (self.cluster(i), self.cluster(j));
        match self.metric {
            Metric::Overlap => {
                let n = attraction_overlap(&ci.scope, &cj.scope);
                (n > 0).then_some(n as f64)
            }
            Metric::Entropy => {
                if intersect_sorted(&ci.scope, &cj.scope).is_empty() {
                    None
                } else {
                    Some(attraction_entropy(&ci.scope, &cj.scope, self.domains))
                }
            }
            Metric::Gravity => {
                if is_subset_sorted(&ci.scope, &cj.scope) || is_subset_sorted(&cj.scope, &ci.scope) {
                    return Some(f64::INFINITY);
                }
                distance(&ci.scope, &cj.scope, self.domains).map(|r| attraction_gravity(ci.mass, r))
            }
        }
    }

    fn link(&mut self, i: usize, j: usize) {
        if let Some(a) = self.attraction(i, j) {
            self.attractions.insert((i, j), a);
        }
        if let Some(a) = self.attraction(j, i) {
            self.attractions.insert((j, i), a);
        }
    }

    /// Strongest (or weakest) available attraction; ties go to the smallest pair.
    fn select(&self, order: MergeOrder) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&pair, &a) in &self.attractions {
            let take = match best {
                None => true,
                Some((_, b)) => match order {
                    MergeOrder::StrongestFirst => a > b,
                    MergeOrder::WeakestFirst => a < b,
                },
            };
            if take {
                best = Some((pair, a));
            }
        }
        best.map(|(p, _)| p)
    }

    fn run(mut self, threshold: f64, order: MergeOrder) -> Vec<Vec<usize>> {
        while let Some((i, j)) = self.select(order) {
            let union = union_sorted(&self.cluster(i).scope, &self.cluster(j).scope);
            if upper_bound_entropy(&union, self.domains) > threshold + ENTROPY_EPS {
                self.attractions.remove(&(i, j));
                continue;
            }
            let absorbed = self.clusters[j].take().expect("live cluster");
            let target = self.clusters[i].as_mut().expect("live cluster");
            target.members.extend(absorbed.members);
            target.scope = union;
            target.mass += absorbed.mass;

            self.attractions
                .retain(|&(x, y), _| x != j && y != j && x != i && y != i);
            let neighbours: Vec<usize> = (0..self.clusters.len())
                .filter(|&k| k != i && self.clusters[k].is_some())
                .filter(|&k| !intersect_sorted(&self.cluster(i).scope, &self.cluster(k).scope).is_empty())
                .collect();
            for k in neighbours {
                self.link(i, k);
            }
        }
        let mut out: Vec<Vec<usize>> = self
            .clusters
            .into_iter()
            .flatten()
            .map(|mut c| {
                c.members.sort();
                c.members
            })
            .collect();
        out.sort();
        out
    }
}

/// Groups factor indices into clusters whose union scope has upper-bound entropy at
/// most `threshold` (singletons are returned as-is even when they exceed it).
pub fn cluster_factors(
    factors: &[SparseFactor],
    domains: &DomainTable,
    threshold: f64,
    metric: Metric,
    order: MergeOrder,
) -> Result<Vec<Vec<usize>>> {
    Ok(AttractionState::new(factors, domains, metric)?.run(threshold, order))
}

/// Multiplies a cluster of factors together. Returns the product and the largest
/// intermediate table produced along the way.
///
/// The fold starts from the smallest table and repeatedly takes the smallest
/// remaining factor that shares a variable with the accumulated scope, so
/// unrelated factors are only crossed when nothing connected is left.
pub fn merge_cluster(cluster: Vec<SparseFactor>, budget: usize) -> Result<(SparseFactor, usize)> {
    let mut rest = cluster;
    if rest.is_empty() {
        return Err(Error::contract("cannot merge an empty cluster"));
    }
    rest.sort_by_key(|f| f.len());
    let mut acc = rest.remove(0);
    let mut peak = acc.len();
    while !rest.is_empty() {
        let next = rest
            .iter()
            .position(|f| !intersect_sorted(f.scope(), acc.scope()).is_empty())
            .unwrap_or(0);
        let f = rest.remove(next);
        acc = acc.product(&f, budget)?;
        peak = peak.max(acc.len());
    }
    Ok((acc, peak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::Value;

    fn v(ids: &[u32]) -> Vec<VarId> {
        ids.iter().map(|&i| VarId(i)).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-3
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(attraction_overlap(&v(&[0, 1, 2]), &v(&[1, 2, 3])), 2);
        assert_eq!(attraction_overlap(&v(&[0]), &v(&[1])), 0);
        assert_eq!(attraction_overlap(&v(&[0, 1, 2]), &v(&[0, 1, 2])), 3);
    }

    #[test]
    fn entropy_examples() {
        let d4 = DomainTable::uniform(4, 1..=4);
        assert_eq!(attraction_entropy(&v(&[0, 1, 2]), &v(&[1, 2, 3]), &d4), 4.0);
        assert_eq!(attraction_entropy(&v(&[0]), &v(&[1]), &d4), 0.0);
        let d9 = DomainTable::uniform(2, 1..=9);
        assert!(close(attraction_entropy(&v(&[0]), &v(&[0, 1]), &d9), 3.17));
    }

    /// Direct KL sum of the uniform-on-support distribution against uniform-on-space.
    fn kl_oracle(k: usize, space: usize) -> f64 {
        let p = 1.0 / k as f64;
        let q = 1.0 / space as f64;
        (0..k).map(|_| p * (p / q).log2()).sum()
    }

    #[test]
    fn mass_examples() {
        let d = DomainTable::uniform(4, 1..=4);
        let full = SparseFactor::full(v(&[0, 1]), &d);
        assert_eq!(mass(&full, &d).unwrap(), 0.0);

        let four = SparseFactor::indicator(v(&[0, 1]), [[1, 1], [2, 2], [3, 3], [4, 4]]).unwrap();
        assert!((mass(&four, &d).unwrap() - kl_oracle(4, 16)).abs() < 1e-12);
        assert_eq!(mass(&four, &d).unwrap(), 2.0);

        let mut rows = Vec::new();
        for a in 1..=4u8 {
            for b in 1..=4u8 {
                for c in 1..=4u8 {
                    for e in 1..=4u8 {
                        if a != b && a != c && a != e && b != c && b != e && c != e {
                            rows.push([a, b, c, e]);
                        }
                    }
                }
            }
        }
        let alldiff = SparseFactor::indicator(v(&[0, 1, 2, 3]), rows).unwrap();
        let m = mass(&alldiff, &d).unwrap();
        assert!((m - kl_oracle(24, 256)).abs() < 1e-12);
        assert!(close(m, 3.415));
    }

    #[test]
    fn distance_examples() {
        let d4 = DomainTable::uniform(3, 1..=4);
        assert!(close(distance(&v(&[0, 1]), &v(&[1, 2]), &d4).unwrap(), 3f64.log2()));
        assert_eq!(distance(&v(&[0, 1]), &v(&[0, 1]), &d4).unwrap(), 0.0);
        assert_eq!(distance(&v(&[0]), &v(&[1]), &d4), None);
        let d2 = DomainTable::uniform(3, 1..=2);
        assert!(close(distance(&v(&[0, 1]), &v(&[0, 1, 2]), &d2).unwrap(), 0.585));
    }

    #[test]
    fn gravity_examples() {
        assert_eq!(attraction_gravity(2.0, 1.0), 2.0);
        assert_eq!(attraction_gravity(0.0, 1.5), 0.0);
        let m = (256.0f64 / 24.0).log2();
        let r = 3f64.log2();
        assert!(close(attraction_gravity(m, r), 1.359));
        assert_eq!(attraction_gravity(1.0, 0.0), f64::INFINITY);
    }

    fn ind(scope: &[u32], rows: &[&[Value]]) -> SparseFactor {
        SparseFactor::indicator(v(scope), rows.iter().copied()).unwrap()
    }

    #[test]
    fn low_threshold_keeps_singletons() {
        let d = DomainTable::uniform(4, 1..=2);
        let fs = [ind(&[0, 1], &[&[1, 2]]), ind(&[1, 2], &[&[1, 2]])];
        // Each factor has 2 bits; the union would need 3.
        for metric in Metric::ALL {
            let c = cluster_factors(&fs, &d, 2.5, metric, MergeOrder::StrongestFirst).unwrap();
            assert_eq!(c, vec![vec![0], vec![1]]);
        }
    }

    #[test]
    fn two_overlapping_factors_merge_under_a_large_threshold() {
        let d = DomainTable::uniform(4, 1..=2);
        let fs = [
            ind(&[0, 1, 2], &[&[1, 2, 1], &[2, 1, 2]]),
            ind(&[1, 2, 3], &[&[2, 1, 1], &[1, 2, 2]]),
        ];
        for metric in Metric::ALL {
            let c = cluster_factors(&fs, &d, 1e9, metric, MergeOrder::StrongestFirst).unwrap();
            assert_eq!(c, vec![vec![0, 1]]);
        }
    }

    #[test]
    fn disjoint_factors_never_attract() {
        let d = DomainTable::uniform(4, 1..=2);
        let fs = [ind(&[0, 1], &[&[1, 2]]), ind(&[2, 3], &[&[1, 2]])];
        for metric in Metric::ALL {
            let c = cluster_factors(&fs, &d, 1e9, metric, MergeOrder::StrongestFirst).unwrap();
            assert_eq!(c, vec![vec![0], vec![1]]);
        }
    }

    #[test]
    fn gravity_merges_towards_the_most_informed_factor() {
        // A chain {0,1} - {1,2} - {2,3}; every pair shares one variable, so distances
        // tie and the receiving cluster's mass decides. Only one merge fits the threshold.
        let d = DomainTable::uniform(4, 1..=4);
        let pinned = ind(&[0, 1], &[&[1, 2]]); // 4 bits
        let diagonal = SparseFactor::full(v(&[1, 2]), &d).retain(|r| r[0] == r[1]); // 2 bits
        let loose = SparseFactor::full(v(&[2, 3]), &d).retain(|r| r != [1, 1]); // ~0.09 bits
        let fs = [pinned, diagonal, loose];
        let strongest = cluster_factors(&fs, &d, 6.0, Metric::Gravity, MergeOrder::StrongestFirst).unwrap();
        assert_eq!(strongest, vec![vec![0, 1], vec![2]]);
        let weakest = cluster_factors(&fs, &d, 6.0, Metric::Gravity, MergeOrder::WeakestFirst).unwrap();
        assert_eq!(weakest, vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn merge_cluster_examples() {
        let f = ind(&[0, 1], &[&[1, 2], &[2, 1]]);
        assert_eq!(merge_cluster(vec![f.clone()], 10).unwrap().0, f);

        let neq = |a: u32, b: u32| {
            let rows: Vec<[Value; 2]> = (1..=4)
                .flat_map(|x| (1..=4).filter(move |&y| y != x).map(move |y| [x, y]))
                .collect();
            SparseFactor::indicator(vec![VarId(a), VarId(b)], rows).unwrap()
        };
        let clique = vec![neq(0, 1), neq(0, 2), neq(0, 3), neq(1, 2), neq(1, 3), neq(2, 3)];
        let (table, _) = merge_cluster(clique, usize::MAX).unwrap();
        assert_eq!(table.len(), 24);

        let a = ind(&[0], &[&[1], &[2]]);
        let b = ind(&[1], &[&[1], &[2], &[3]]);
        let (p, peak) = merge_cluster(vec![a, b], 100).unwrap();
        assert_eq!((p.len(), peak), (6, 6));
    }

    #[test]
    fn merge_cluster_respects_budget() {
        let a = ind(&[0], &[&[1], &[2]]);
        let b = ind(&[1], &[&[1], &[2], &[3]]);
        assert!(matches!(
            merge_cluster(vec![a, b], 5),
            Err(Error::TableBlowUp {
                attempted: 6,
                budget: 5
            })
        ));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("nearest".parse::<Metric>().is_err());
    }
}
