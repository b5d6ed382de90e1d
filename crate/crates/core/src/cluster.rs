//! K-means over TF-IDF rows and the cluster-rate derived 1..k ratings.
//!
//! Points are sparse; centroids are dense over the vocabulary. Squared
//! Euclidean distance is evaluated as `|x|² − 2x·c + |c|²` so a step costs
//! O(nnz · k) rather than O(n · k · |V|).

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sentiment::SentimentScore;
use crate::vectorize::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 42,
            max_iters: 100,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point, in input order.
    pub assignments: Vec<usize>,
    pub iterations_run: usize,
    /// SSE after each assignment step; the last entry equals `final_sse`.
    pub sse_history: Vec<f64>,
    pub final_sse: f64,
}

impl KMeansResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(x: &SparseVector, x_sq: f64, c: &[f64], c_sq: f64) -> f64 {
    (x_sq - 2.0 * x.dot_dense(c) + c_sq).max(0.0)
}

fn nearest(x: &SparseVector, x_sq: f64, centroids: &[Vec<f64>], c_sq: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, x_sq, c, c_sq[j]);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn count_distinct(points: &[SparseVector]) -> usize {
    let keys: HashSet<Vec<(u32, u64)>> = points
        .iter()
        .map(|p| p.iter().map(|(i, w)| (i, (w + 0.0).to_bits())).collect())
        .collect();
    keys.len()
}

/// k-means++ seeding: first centre uniform, each next centre drawn with
/// probability proportional to squared distance from the nearest chosen one.
fn seed_plus_plus(
    points: &[SparseVector],
    sq_norms: &[f64],
    dim: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_dense(dim)];
    let c_sq0 = centroids[0].iter().map(|v| v * v).sum::<f64>();
    let mut min_d: Vec<f64> = points
        .iter()
        .zip(sq_norms)
        .map(|(p, &x_sq)| sq_dist(p, x_sq, &centroids[0], c_sq0))
        .collect();

    while centroids.len() < k {
        let total: f64 = min_d.iter().sum();
        if total <= 0.0 {
            return Err(Error::Cluster(format!(
                "only {} distinct points for k = {k}",
                centroids.len()
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &d) in min_d.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            chosen = Some(i);
            if acc > target {
                break;
            }
        }
        // `chosen` is always set because `total > 0`.
        let chosen = chosen.expect("positive total mass");
        let c = points[chosen].to_dense(dim);
        let c_sq = c.iter().map(|v| v * v).sum::<f64>();
        for ((d, p), &x_sq) in min_d.iter_mut().zip(points).zip(sq_norms) {
            *d = d.min(sq_dist(p, x_sq, &c, c_sq));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// `dim` must cover every index stored in `points`. The assignment step runs
/// in parallel; the SSE and centroid reductions are sequential in input order,
/// so a given `(points, params)` always yields bit-identical output.
pub fn kmeans(points: &[SparseVector], dim: usize, params: KMeansParams) -> Result<KMeansResult> {
    let k = params.k;
    if k == 0 {
        return Err(Error::Cluster("k must be at least 1".into()));
    }
    if let Some(p) = points.iter().find(|p| p.min_dim() > dim) {
        return Err(Error::Cluster(format!(
            "point index {} out of range for dimension {dim}",
            p.min_dim() - 1
        )));
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(Error::Cluster(format!(
            "{distinct} distinct points is fewer than k = {k}"
        )));
    }

    let sq_norms: Vec<f64> = points.iter().map(SparseVector::squared_norm).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = seed_plus_plus(points, &sq_norms, dim, k, &mut rng)?;

    let assign = |centroids: &[Vec<f64>]| -> Vec<(usize, f64)> {
        let c_sq: Vec<f64> = centroids.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        points
            .par_iter()
            .zip(sq_norms.par_iter())
            .map(|(p, &x_sq)| nearest(p, x_sq, centroids, &c_sq))
            .collect()
    };

    let mut sse_history = Vec::new();
    let mut iterations_run = 0;
    while iterations_run < params.max_iters {
        iterations_run += 1;
        let assigned = assign(&centroids);
        sse_history.push(assigned.iter().map(|&(_, d)| d).sum());

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.iter().zip(&assigned) {
            counts[c] += 1;
            for (i, w) in p.iter() {
                sums[c][i as usize] += w;
            }
        }

        // Empty clusters take the point farthest from its current centroid.
        let mut taken: HashSet<usize> = HashSet::new();
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                sums[j].iter_mut().for_each(|v| *v *= inv);
                continue;
            }
            let far = assigned
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken.contains(i))
                .fold(None::<(usize, f64)>, |best, (i, &(_, d))| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                })
                .map(|(i, _)| i)
                .expect("n >= k guarantees a spare point");
            taken.insert(far);
            sums[j] = points[far].to_dense(dim);
        }

        let shift = centroids
            .iter()
            .zip(&sums)
            .map(|(old, new)| old.iter().zip(new).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        centroids = sums;
        if shift < params.tol {
            break;
        }
    }

    let assigned = assign(&centroids);
    let final_sse: f64 = assigned.iter().map(|&(_, d)| d).sum();
    sse_history.push(final_sse);
    Ok(KMeansResult {
        k,
        seed: params.seed,
        centroids,
        assignments: assigned.into_iter().map(|(c, _)| c).collect(),
        iterations_run,
        sse_history,
        final_sse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

/// Positive iff `pos > neg`; an exact tie counts as negative.
pub fn label_review(score: SentimentScore) -> Label {
    if score.pos > score.neg {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Share of positive labels in a cluster: `x_p / (x_p + x_n)`.
pub fn cluster_rate(x_p: u64, x_n: u64) -> Result<f64> {
    let total = x_p + x_n;
    if total == 0 {
        return Err(Error::Cluster("cluster rate undefined for an unlabeled cluster".into()));
    }
    Ok(x_p as f64 / total as f64)
}

/// Ranks clusters by rate ascending and hands out ratings `1..=k` in that
/// order. Equal rates go to the lower cluster index first.
pub fn assign_cluster_ratings(rates: &[f64]) -> Vec<u8> {
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)));
    let mut ratings = vec![0u8; rates.len()];
    for (rank, &cluster) in order.iter().enumerate() {
        ratings[cluster] = (rank + 1) as u8;
    }
    ratings
}

/// Rating used for reviews that could not be clustered (empty TF-IDF row).
pub fn median_rating(k: usize) -> u8 {
    k.div_ceil(2).max(1) as u8
}

/// Mean of the given cluster ratings rounded half-up, or `None` when empty.
pub fn consistent_rating(ratings: &[u8]) -> Option<u8> {
    if ratings.is_empty() {
        return None;
    }
    let sum: u64 = ratings.iter().map(|&r| r as u64).sum();
    let n = ratings.len() as u64;
    // floor(sum / n + 1/2) in integer arithmetic
    Some(((2 * sum + n) / (2 * n)) as u8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub index: usize,
    pub x_p: u64,
    pub x_n: u64,
    #[serde(rename = "Y")]
    pub rate: f64,
    pub rating: u8,
}

/// Counts labels per cluster and derives rates and ratings.
pub fn cluster_stats(k: usize, assignments: &[usize], labels: &[Label]) -> Result<Vec<ClusterStats>> {
    if assignments.len() != labels.len() {
        return Err(Error::Cluster(format!(
            "{} assignments but {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    let mut counts = vec![(0u64, 0u64); k];
    for (&c, &l) in assignments.iter().zip(labels) {
        match l {
            Label::Positive => counts[c].0 += 1,
            Label::Negative => counts[c].1 += 1,
        }
    }
    let rates = counts
        .iter()
        .map(|&(p, n)| cluster_rate(p, n))
        .collect::<Result<Vec<_>>>()?;
    let ratings = assign_cluster_ratings(&rates);
    Ok((0..k)
        .map(|index| ClusterStats {
            index,
            x_p: counts[index].0,
            x_n: counts[index].1,
            rate: rates[index],
            rating: ratings[index],
        })
        .collect())
}

/// The fitted review clustering as persisted in `clusters.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    pub iterations_run: usize,
    pub final_sse: f64,
    pub per_cluster: Vec<ClusterStats>,
    pub assignments: BTreeMap<String, usize>,
}

impl ClusterModel {
    pub fn rating_of(&self, review_id: &str) -> Option<u8> {
        self.assignments.get(review_id).map(|&c| self.per_cluster[c].rating)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_cluster.len() != self.k {
            return Err(Error::Validation(format!(
                "clusters: {} cluster entries for k = {}",
                self.per_cluster.len(),
                self.k
            )));
        }
        if let Some((id, c)) = self.assignments.iter().find(|(_, &c)| c >= self.k) {
            return Err(Error::Validation(format!(
                "clusters: review {id} assigned to cluster {c} >= k"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[[f64; 2]]) -> Vec<SparseVector> {
        raw.iter().map(|p| SparseVector::from_dense(p)).collect()
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let p = pts(&[[1.0, 0.0], [3.0, 2.0], [2.0, 4.0]]);
        let r = kmeans(
            &p,
            2,
            KMeansParams {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.assignments.iter().all(|&a| a == 0));
        assert!((r.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_points_give_zero_sse() {
        let p = pts(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [5.0, 5.0], [5.0, 5.0]]);
        let r = kmeans(
            &p,
            2,
            KMeansParams {
                k: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.final_sse, 0.0);
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_eq!(r.assignments[4], r.assignments[5]);
    }

    #[test]
    fn too_few_distinct_points() {
        let p = pts(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert!(kmeans(
            &p,
            2,
            KMeansParams {
                k: 2,
                ..Default::default()
            }
        )
        .is_err());
        assert!(kmeans(
            &p,
            2,
            KMeansParams {
                k: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn out_of_range_index_rejected() {
        let p = vec![SparseVector::from_pairs([(7, 1.0)])];
        assert!(kmeans(
            &p,
            3,
            KMeansParams {
                k: 1,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn labels_and_tie_rule() {
        assert_eq!(label_review(SentimentScore { pos: 0.9, neg: 0.1 }), Label::Positive);
        assert_eq!(label_review(SentimentScore { pos: 0.2, neg: 0.8 }), Label::Negative);
        assert_eq!(label_review(SentimentScore { pos: 0.5, neg: 0.5 }), Label::Negative);
    }

    #[test]
    fn cluster_rate_examples() {
        assert_eq!(cluster_rate(3, 1).unwrap(), 0.75);
        assert_eq!(cluster_rate(0, 5).unwrap(), 0.0);
        assert_eq!(cluster_rate(2, 2).unwrap(), 0.5);
        assert!(cluster_rate(0, 0).is_err());
    }

    #[test]
    fn rating_assignment_examples() {
        assert_eq!(assign_cluster_ratings(&[0.9, 0.1, 0.5, 0.7, 0.3]), vec![5, 1, 3, 4, 2]);
        assert_eq!(assign_cluster_ratings(&[0.4; 5]), vec![1, 2, 3, 4, 5]);
        assert_eq!(assign_cluster_ratings(&[0.1, 0.2, 0.3, 0.4, 0.5]), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn consistent_rating_rounds_half_up() {
        assert_eq!(consistent_rating(&[5, 5, 5]), Some(5));
        assert_eq!(consistent_rating(&[1, 2]), Some(2));
        assert_eq!(consistent_rating(&[3]), Some(3));
        assert_eq!(consistent_rating(&[1, 1, 2]), Some(1));
        assert_eq!(consistent_rating(&[]), None);
        assert_eq!(median_rating(5), 3);
    }

    #[test]
    fn stats_count_labels() {
        let stats = cluster_stats(
            2,
            &[0, 0, 1, 1, 1],
            &[
                Label::Positive,
                Label::Positive,
                Label::Negative,
                Label::Positive,
                Label::Negative,
            ],
        )
        .unwrap();
        assert_eq!((stats[0].x_p, stats[0].x_n, stats[0].rating), (2, 0, 2));
        assert_eq!((stats[1].x_p, stats[1].x_n, stats[1].rating), (1, 2, 1));
        assert!((stats[1].rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unlabeled_cluster_is_an_error() {
        assert!(cluster_stats(2, &[0], &[Label::Positive]).is_err());
    }
}
