//! Density clustering of the pooled decimation eigenvalues and validation.
//!
//! Every decimation contributes one estimate per physical term, close to the
//! same point on both the `u`-side (`lambda^u`) and the `s`-side
//! (`lambda^s`). Noise eigenvalues move from one decimation to the next, so
//! they stay isolated and DBSCAN discards them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::decimation::{candidate_sets, euclid_recover, RecoveryStrategy};
use crate::error::Result;
use crate::scalar::{cabs, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    U,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub value: Complex<T>,
    pub k: usize,
    pub i: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster<T> {
    /// Indices into the clustered point list, ascending.
    pub members: Vec<usize>,
    pub centroid: Complex<T>,
    pub radius: T,
}

impl<T> Cluster<T> {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering<T> {
    pub clusters: Vec<Cluster<T>>,
    pub noise: Vec<usize>,
}

impl<T> Clustering<T> {
    /// Cluster label per point, `None` for noise.
    pub fn labels(&self, len: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; len];
        for (c, cl) in self.clusters.iter().enumerate() {
            for &m in &cl.members {
                out[m] = Some(c);
            }
        }
        out
    }
}

pub fn centroid<T: Real>(points: &[Complex<T>]) -> Complex<T> {
    let sum: Complex<T> = points.iter().copied().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
    sum / T::of_usize(points.len().max(1))
}

fn summarise<T: Real>(points: &[Complex<T>], members: Vec<usize>) -> Cluster<T> {
    let vals: Vec<_> = members.iter().map(|&m| points[m]).collect();
    let c = centroid(&vals);
    let radius = vals.iter().map(|v| cabs(v - c)).fold(T::zero(), |a, b| a.max(b));
    Cluster { members, centroid: c, radius }
}

/// DBSCAN in the complex plane.
///
/// A point is core when at least `m_delta` points, itself included, lie
/// within `delta`. Clusters are the connected components of the core points,
/// numbered by their first core point; a border point joins the earliest
/// numbered cluster with a core point in reach.
pub fn dbscan<T: Real>(points: &[Complex<T>], delta: T, m_delta: usize) -> Clustering<T> {
    let n = points.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|a| (0..n).filter(|&b| cabs(points[a] - points[b]) <= delta).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= m_delta.max(1)).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut count = 0;
    for start in 0..n {
        if !core[start] || label[start].is_some() {
            continue;
        }
        label[start] = Some(count);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if core[q] && label[q].is_none() {
                    label[q] = Some(count);
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }
    for p in 0..n {
        if !core[p] {
            label[p] = neighbours[p].iter().filter(|&&q| core[q]).filter_map(|&q| label[q]).min();
        }
    }
    let mut groups = vec![Vec::new(); count];
    let mut noise = Vec::new();
    for (p, l) in label.iter().enumerate() {
        match l {
            Some(c) => groups[*c].push(p),
            None => noise.push(p),
        }
    }
    Clustering {
        clusters: groups.into_iter().map(|g| summarise(points, g)).collect(),
        noise,
    }
}

/// Keeps at most one member per decimation in every cluster, the one
/// closest to the centroid, and dissolves clusters left with fewer than
/// `m_delta` members. Removed points become noise.
pub fn prune_per_decimation<T: Real>(
    clustering: Clustering<T>,
    points: &[Complex<T>],
    decimation: &[usize],
    m_delta: usize,
) -> Clustering<T> {
    let mut noise = clustering.noise;
    let mut clusters = Vec::new();
    for cl in clustering.clusters {
        let mut best: BTreeMap<usize, usize> = BTreeMap::new();
        for &m in &cl.members {
            let d = cabs(points[m] - cl.centroid);
            best.entry(decimation[m])
                .and_modify(|b| {
                    let db = cabs(points[*b] - cl.centroid);
                    if d < db || (d == db && m < *b) {
                        *b = m;
                    }
                })
                .or_insert(m);
        }
        let mut kept: Vec<usize> = best.into_values().collect();
        kept.sort_unstable();
        if kept.len() < m_delta.max(1) {
            noise.extend(cl.members);
            continue;
        }
        noise.extend(cl.members.iter().filter(|m| kept.binary_search(m).is_err()));
        clusters.push(summarise(points, kept));
    }
    noise.sort_unstable();
    Clustering { clusters, noise }
}

/// Distance from each point to its `k`-th nearest other point.
fn k_distances<T: Real>(points: &[Complex<T>], k: usize) -> Vec<T> {
    points
        .iter()
        .enumerate()
        .map(|(a, pa)| {
            let mut d: Vec<T> = points
                .iter()
                .enumerate()
                .filter(|(b, _)| *b != a)
                .map(|(_, pb)| cabs(pa - pb))
                .collect();
            d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
            d.get(k.saturating_sub(1)).copied().unwrap_or_else(|| T::max_value().unwrap_or_else(T::one))
        })
        .collect()
}

/// Data-driven neighbourhood radius.
///
/// Sorted core distances (distance to the `(m_delta - 1)`-th neighbour) of
/// true terms are small and those of noise eigenvalues are large. When the
/// sorted list has a clear jump (ratio of at least `GAP_RATIO`) past the
/// first `m_delta` entries, the radius is placed at the geometric mean
/// across the largest one, capped at `cap`. Without such a jump the points
/// are uniformly scattered and the radius collapses to `sqrt(eps)`, so only
/// numerically coincident points can still form clusters.
pub fn default_delta<T: Real>(points: &[Complex<T>], m_delta: usize, cap: T) -> T {
    const GAP_RATIO: f64 = 2.0;
    let floor = T::default_epsilon().sqrt();
    if points.len() < 2 {
        return cap;
    }
    let k = m_delta.saturating_sub(1).max(1);
    let mut kd: Vec<T> = k_distances(points, k).into_iter().map(|d| d.max(floor)).collect();
    kd.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let first = m_delta.saturating_sub(1);
    let mut best: Option<(T, usize)> = None;
    for j in first..kd.len().saturating_sub(1) {
        let ratio = kd[j + 1] / kd[j];
        if best.map_or(true, |(r, _)| ratio > r) {
            best = Some((ratio, j));
        }
    }
    let delta = match best {
        Some((ratio, j)) if ratio >= T::of(GAP_RATIO) => (kd[j] * kd[j + 1]).sqrt(),
        // no separation between dense and sparse points: nothing clusters
        _ => floor,
    };
    delta.min(cap)
}

/// Radius cap: a quarter of the smallest spacing between `q`-th roots on the
/// unit circle.
pub fn delta_cap<T: Real>(q: usize) -> T {
    T::PI() / T::of_usize(4 * q.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams<T> {
    pub delta: T,
    pub m_delta: usize,
}

/// One `u`-side cluster together with the clustering of its linked `s` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedCluster<T> {
    pub u_cluster: Cluster<T>,
    /// Indices into the `s` point list.
    pub s_points: Vec<usize>,
    /// Member indices refer to positions in `s_points`.
    pub s_clustering: Clustering<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage<T> {
    pub linked: Vec<LinkedCluster<T>>,
    /// `s` points whose `(k, i)` has no `u` point.
    pub dangling: Vec<usize>,
}

/// Gathers, per `u` cluster, the `s` points sharing a `(k, i)` key with one
/// of its members and clusters them with `params`.
pub fn link_clusters<T: Real>(
    u_points: &[Point<T>],
    u_clusters: &Clustering<T>,
    s_points: &[Point<T>],
    params: DbscanParams<T>,
) -> Linkage<T> {
    let keys: BTreeSet<(usize, usize)> = u_points.iter().map(|p| (p.k, p.i)).collect();
    let dangling = s_points
        .iter()
        .enumerate()
        .filter(|(_, p)| !keys.contains(&(p.k, p.i)))
        .map(|(j, _)| j)
        .collect();
    let linked = u_clusters
        .clusters
        .iter()
        .map(|uc| {
            let member_keys: BTreeSet<(usize, usize)> =
                uc.members.iter().map(|&m| (u_points[m].k, u_points[m].i)).collect();
            let s_idx: Vec<usize> = s_points
                .iter()
                .enumerate()
                .filter(|(_, p)| member_keys.contains(&(p.k, p.i)))
                .map(|(j, _)| j)
                .collect();
            let vals: Vec<_> = s_idx.iter().map(|&j| s_points[j].value).collect();
            let ks: Vec<usize> = s_idx.iter().map(|&j| s_points[j].k).collect();
            let raw = dbscan(&vals, params.delta, params.m_delta);
            LinkedCluster {
                u_cluster: uc.clone(),
                s_clustering: prune_per_decimation(raw, &vals, &ks, params.m_delta),
                s_points: s_idx,
            }
        })
        .collect();
    Linkage { linked, dangling }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Standard,
    Outlier,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord<T> {
    pub lambda: Complex<T>,
    pub u_cluster_count: usize,
    pub s_cluster_count: usize,
    pub u_radius: T,
    pub s_radius: T,
    pub u_centroid: Complex<T>,
    pub s_centroid: Complex<T>,
    pub scenario: Scenario,
    pub decimations: Vec<usize>,
    /// Distance between the matched `U` and `S` candidates.
    pub match_distance: T,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unvalidated<T> {
    pub u_centroid: Complex<T>,
    pub u_cluster_count: usize,
    pub s_point_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation<T> {
    pub records: Vec<ValidationRecord<T>>,
    pub unvalidated: Vec<Unvalidated<T>>,
}

impl<T> Validation<T> {
    pub fn model_order(&self) -> usize {
        self.records.len()
    }
}

/// Turns each linked cluster into one validated node per `s` cluster.
///
/// With several `s` clusters (a collision on the `u` side) the `u` centroid
/// of each node is taken over the `u` points linked to that `s` cluster
/// only.
pub fn classify_and_validate<T: Real>(
    linkage: &Linkage<T>,
    u_points: &[Point<T>],
    s_points: &[Point<T>],
    u: usize,
    s: usize,
    strategy: RecoveryStrategy,
) -> Result<Validation<T>> {
    let mut records = Vec::new();
    let mut unvalidated = Vec::new();
    let index: BTreeMap<(usize, usize), usize> =
        u_points.iter().enumerate().map(|(j, p)| ((p.k, p.i), j)).collect();
    for lc in &linkage.linked {
        let uc = &lc.u_cluster;
        let sc = &lc.s_clustering.clusters;
        if sc.is_empty() {
            unvalidated.push(Unvalidated {
                u_centroid: uc.centroid,
                u_cluster_count: uc.cardinality(),
                s_point_count: lc.s_points.len(),
            });
            continue;
        }
        let collision = sc.len() > 1;
        for cl in sc {
            let linked_u: BTreeSet<usize> = cl
                .members
                .iter()
                .map(|&m| s_points[lc.s_points[m]])
                .filter_map(|p| index.get(&(p.k, p.i)).copied())
                .collect();
            let (u_centroid, u_radius, u_count, decimations) = if collision {
                let vals: Vec<_> = linked_u.iter().map(|&j| u_points[j].value).collect();
                let c = centroid(&vals);
                let r = vals.iter().map(|v| cabs(v - c)).fold(T::zero(), |a, b| a.max(b));
                let ks: BTreeSet<usize> = linked_u.iter().map(|&j| u_points[j].k).collect();
                (c, r, vals.len(), ks.into_iter().collect())
            } else {
                let ks: BTreeSet<usize> = uc.members.iter().map(|&m| u_points[m].k).collect();
                (uc.centroid, uc.radius, uc.cardinality(), ks.into_iter().collect::<Vec<_>>())
            };
            let cs = candidate_sets(u_centroid, cl.centroid, u, s);
            let lambda = match strategy {
                RecoveryStrategy::Euclid => euclid_recover(u_centroid, cl.centroid, u, s)?,
                _ => cs.matched,
            };
            let scenario = if collision {
                Scenario::Collision
            } else if uc.cardinality() < u || cl.cardinality() < uc.cardinality() {
                Scenario::Outlier
            } else {
                Scenario::Standard
            };
            records.push(ValidationRecord {
                lambda,
                u_cluster_count: u_count,
                s_cluster_count: cl.cardinality(),
                u_radius,
                s_radius: cl.radius,
                u_centroid,
                s_centroid: cl.centroid,
                scenario,
                decimations,
                match_distance: cs.best_distance,
                low_confidence: cs.low_confidence,
            });
        }
    }
    Ok(Validation { records, unvalidated })
}
