//! Temporal aggregation: horizon partitioning, k-means clustering of input
//! periods and selection of representative periods.
//!
//! Representatives are real input periods (cluster medoids), so every
//! representative `w` has a designated period `n(w)` it stands for.
//! Indices in this module are 0-based; files written by [`write_mapping_csv`]
//! use 1-based numbering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::TimeSeriesTable;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid cluster count k = {k} for {n} periods")]
    InvalidK { k: usize, n: usize },
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("inconsistent period mapping: {0}")]
    InvalidMapping(String),
}

/// Dense row-major matrix of per-period features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<FeatureMatrix, AggregationError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AggregationError::Dimension("ragged feature rows".into()));
        }
        let n = rows.len();
        Ok(FeatureMatrix {
            data: rows.into_iter().flatten().collect(),
            rows: n,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row `n` holds, column after column, that column's values over period `n`,
/// each column scaled by its global maximum (all-zero columns stay zero).
pub fn build_feature_matrix(
    ts: &TimeSeriesTable,
    periods: usize,
    period_len: usize,
) -> Result<FeatureMatrix, AggregationError> {
    if periods * period_len != ts.len() {
        return Err(AggregationError::Dimension(format!(
            "table has {} steps, expected N·T = {}·{}",
            ts.len(),
            periods,
            period_len
        )));
    }
    let cols = ts.num_columns() * period_len;
    let mut data = vec![0.0; periods * cols];
    for (c, (_, values)) in ts.columns().enumerate() {
        let max = values.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            continue;
        }
        for n in 0..periods {
            for t in 0..period_len {
                data[n * cols + c * period_len + t] = values[n * period_len + t] / max;
            }
        }
    }
    Ok(FeatureMatrix {
        data,
        rows: periods,
        cols,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Cluster of each period, in `0..k`.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances of periods to their centroids.
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusteringResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

/// Lloyd's k-means with k-means++ seeding from a deterministic PRNG.
///
/// Ties in nearest-centroid assignment go to the lowest cluster index.
/// A cluster left empty after an assignment step receives the point that is
/// farthest from its own centroid among clusters with more than one member.
pub fn cluster_kmeans(
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusteringResult, AggregationError> {
    let n = features.rows();
    if k == 0 || k > n {
        return Err(AggregationError::InvalidK { k, n });
    }
    let max_iter = max_iter.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = kmeans_plus_plus(features, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut next: Vec<usize> = (0..n)
            .map(|i| nearest(features.row(i), &centroids).0)
            .collect();
        repair_empty(features, &centroids, &mut next, k);
        let changed = next != assignment;
        assignment = next;
        centroids = recompute_centroids(features, &assignment, k);
        history.push(inertia(features, &assignment, &centroids));
        if !changed {
            break;
        }
    }

    Ok(ClusteringResult {
        inertia: *history.last().expect("at least one iteration"),
        inertia_history: history,
        assignment,
        centroids,
        iterations,
    })
}

fn kmeans_plus_plus(features: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = features.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(features.row(i), features.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if r < d {
                        break;
                    }
                    r -= d;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Every point coincides with a chosen center.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(features.row(i), features.row(pick)));
        }
    }
    chosen
        .into_iter()
        .map(|i| features.row(i).to_vec())
        .collect()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn repair_empty(
    features: &FeatureMatrix,
    centroids: &[Vec<f64>],
    assignment: &mut [usize],
    k: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, &a) in assignment.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(features.row(i), &centroids[a]);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        // k <= n guarantees a donor exists while some cluster is empty.
        let (i, _) = donor.expect("k <= n");
        assignment[i] = empty;
    }
}

fn recompute_centroids(features: &FeatureMatrix, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; features.cols()]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(features.row(i)) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

fn inertia(features: &FeatureMatrix, assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(features.row(i), &centroids[a]))
        .sum()
}

/// Assignment of input periods to representative periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodMapping {
    period_len: usize,
    /// `rep_of[n]` = representative of input period `n`.
    rep_of: Vec<usize>,
    /// `designated[w]` = the input period representative `w` is.
    designated: Vec<usize>,
    /// Number of input periods each representative stands for.
    weight: Vec<usize>,
}

impl PeriodMapping {
    /// Builds a mapping from an explicit assignment; weights are derived.
    pub fn new(
        rep_of: Vec<usize>,
        designated: Vec<usize>,
        period_len: usize,
    ) -> Result<PeriodMapping, AggregationError> {
        let reps = designated.len();
        let mut weight = vec![0; reps];
        for (n, &w) in rep_of.iter().enumerate() {
            if w >= reps {
                return Err(AggregationError::InvalidMapping(format!(
                    "period {n} maps to representative {w} of {reps}"
                )));
            }
            weight[w] += 1;
        }
        let mapping = PeriodMapping {
            period_len,
            rep_of,
            designated,
            weight,
        };
        mapping.check()?;
        Ok(mapping)
    }

    /// Checks the mapping invariants.
    pub fn check(&self) -> Result<(), AggregationError> {
        let bad = |m: String| Err(AggregationError::InvalidMapping(m));
        if self.period_len == 0 || self.rep_of.is_empty() {
            return bad("empty mapping".into());
        }
        if self.weight.iter().sum::<usize>() != self.rep_of.len() {
            return bad("weights do not sum to the number of periods".into());
        }
        for (w, &n) in self.designated.iter().enumerate() {
            if n >= self.rep_of.len() || self.rep_of[n] != w {
                return bad(format!(
                    "representative {w} is not a member of its own cluster"
                ));
            }
            if self.weight[w] == 0 {
                return bad(format!("representative {w} represents no period"));
            }
        }
        Ok(())
    }

    /// |N|
    pub fn periods(&self) -> usize {
        self.rep_of.len()
    }

    /// |T|
    pub fn period_len(&self) -> usize {
        self.period_len
    }

    /// |W|
    pub fn representatives(&self) -> usize {
        self.designated.len()
    }

    /// |H| = |N|·|T|
    pub fn horizon_len(&self) -> usize {
        self.periods() * self.period_len
    }

    pub fn rep_of(&self, period: usize) -> usize {
        self.rep_of[period]
    }

    pub fn designated(&self, rep: usize) -> usize {
        self.designated[rep]
    }

    pub fn weight(&self, rep: usize) -> usize {
        self.weight[rep]
    }

    pub fn rep_assignment(&self) -> &[usize] {
        &self.rep_of
    }

    pub fn designated_periods(&self) -> &[usize] {
        &self.designated
    }

    pub fn weights(&self) -> &[usize] {
        &self.weight
    }

    /// Horizon step (0-based) of step `t` in input period `n`.
    pub fn step(&self, period: usize, t: usize) -> usize {
        period * self.period_len + t
    }
}

const TIE_EPS: f64 = 1e-12;

/// One representative per cluster: the member closest to the centroid,
/// lowest period index on ties.
pub fn select_representatives(
    clustering: &ClusteringResult,
    features: &FeatureMatrix,
    period_len: usize,
) -> Result<PeriodMapping, AggregationError> {
    if clustering.assignment.len() != features.rows() {
        return Err(AggregationError::Dimension(
            "clustering and features disagree on the number of periods".into(),
        ));
    }
    let mut designated = Vec::with_capacity(clustering.k());
    for (w, centroid) in clustering.centroids.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (n, _) in clustering
            .assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == w)
        {
            let d = sq_dist(features.row(n), centroid);
            // distances equal up to rounding count as a tie
            if best.is_none_or(|(_, bd)| d < bd - TIE_EPS * (1.0 + bd)) {
                best = Some((n, d));
            }
        }
        let (n, _) = best.ok_or(AggregationError::EmptyCluster(w))?;
        designated.push(n);
    }
    PeriodMapping::new(clustering.assignment.clone(), designated, period_len)
}

/// Every period represents itself (full temporal resolution).
pub fn identity_mapping(periods: usize, period_len: usize) -> PeriodMapping {
    assert!(
        periods >= 1 && period_len >= 1,
        "identity mapping needs N, T >= 1"
    );
    PeriodMapping {
        period_len,
        rep_of: (0..periods).collect(),
        designated: (0..periods).collect(),
        weight: vec![1; periods],
    }
}

/// Convenience pipeline: features → k-means → medoids.
pub fn aggregate(
    ts: &TimeSeriesTable,
    periods: usize,
    period_len: usize,
    k: usize,
    seed: u64,
) -> Result<PeriodMapping, AggregationError> {
    let features = build_feature_matrix(ts, periods, period_len)?;
    let clustering = cluster_kmeans(&features, k, seed, 300)?;
    select_representatives(&clustering, &features, period_len)
}

pub const MAPPING_FILE: &str = "mapping.csv";
pub const REPRESENTATIVES_FILE: &str = "representatives.csv";

/// `period,representative` and `representative,designated_period,weight`
/// tables, both 1-based.
pub fn mapping_csv(mapping: &PeriodMapping) -> (String, String) {
    let mut periods = String::from("period,representative\n");
    for (n, w) in mapping.rep_assignment().iter().enumerate() {
        let _ = writeln!(periods, "{},{}", n + 1, w + 1);
    }
    let mut reps = String::from("representative,designated_period,weight\n");
    for w in 0..mapping.representatives() {
        let _ = writeln!(
            reps,
            "{},{},{}",
            w + 1,
            mapping.designated(w) + 1,
            mapping.weight(w)
        );
    }
    (periods, reps)
}

pub fn write_mapping_csv(mapping: &PeriodMapping, dir: &Path) -> std::io::Result<()> {
    let (periods, reps) = mapping_csv(mapping);
    fs::write(dir.join(MAPPING_FILE), periods)?;
    fs::write(dir.join(REPRESENTATIVES_FILE), reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;
    use proptest::prelude::*;

    fn table(cols: &[(&str, Vec<f64>)]) -> TimeSeriesTable {
        let map: IndexMap<String, Vec<f64>> = cols
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        TimeSeriesTable::new(map).unwrap()
    }

    #[test]
    fn features_are_normalized_by_column_max() {
        let ts = table(&[("a", vec![0.0, 5.0, 10.0, 10.0, 5.0, 0.0])]);
        let f = build_feature_matrix(&ts, 2, 3).unwrap();
        assert_eq!(f.row(0), &[0.0, 0.5, 1.0]);
        assert_eq!(f.row(1), &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn zero_column_gives_zero_features() {
        let ts = table(&[("a", vec![0.0; 6])]);
        let f = build_feature_matrix(&ts, 3, 2).unwrap();
        assert!((0..3).all(|i| f.row(i).iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn columns_are_concatenated_per_period() {
        let ts = table(&[
            ("a", vec![1.0, 2.0, 3.0, 4.0]),
            ("b", vec![4.0, 3.0, 2.0, 1.0]),
        ]);
        let f = build_feature_matrix(&ts, 2, 2).unwrap();
        assert_eq!(f.cols(), 4);
        assert_eq!(f.row(0), &[0.25, 0.5, 1.0, 0.75]);
        assert_eq!(f.row(1), &[0.75, 1.0, 0.5, 0.25]);
        assert!(matches!(
            build_feature_matrix(&ts, 3, 2),
            Err(AggregationError::Dimension(_))
        ));
    }

    #[test]
    fn identical_rows_single_cluster() {
        let f = FeatureMatrix::from_rows(vec![vec![1.0, 2.0]; 5]).unwrap();
        let c = cluster_kmeans(&f, 1, 3, 50).unwrap();
        assert!(c.assignment.iter().all(|&a| a == 0));
        assert_eq!(c.inertia, 0.0);
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let f = FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![1.0], vec![3.0]]).unwrap();
        let c = cluster_kmeans(&f, 4, 11, 50).unwrap();
        let mut seen = c.assignment.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert_eq!(c.inertia, 0.0);
    }

    #[test]
    fn invalid_k() {
        let f = FeatureMatrix::from_rows(vec![vec![0.0]; 3]).unwrap();
        assert_eq!(
            cluster_kmeans(&f, 4, 1, 10),
            Err(AggregationError::InvalidK { k: 4, n: 3 })
        );
        assert_eq!(
            cluster_kmeans(&f, 0, 1, 10),
            Err(AggregationError::InvalidK { k: 0, n: 3 })
        );
    }

    #[test]
    fn separated_clouds_are_split_exactly() {
        let mut rows = Vec::new();
        for i in 0..6 {
            let j = i as f64 * 0.01;
            rows.push(vec![j, 0.1 - j]);
            rows.push(vec![10.0 + j, 10.0 - j]);
        }
        let f = FeatureMatrix::from_rows(rows).unwrap();
        for seed in 0..20 {
            let c = cluster_kmeans(&f, 2, seed, 100).unwrap();
            // brute-force: each point is nearer its own centroid than the other
            for i in 0..f.rows() {
                let own = sq_dist(f.row(i), &c.centroids[c.assignment[i]]);
                let other = sq_dist(f.row(i), &c.centroids[1 - c.assignment[i]]);
                assert!(own < other);
                assert_eq!(c.assignment[i], c.assignment[i % 2]);
            }
            assert_ne!(c.assignment[0], c.assignment[1]);
        }
    }

    #[test]
    fn single_cluster_medoid_is_nearest_to_mean() {
        let f = FeatureMatrix::from_rows(vec![vec![0.0], vec![4.0], vec![1.0], vec![3.0]]).unwrap();
        let c = cluster_kmeans(&f, 1, 0, 10).unwrap();
        let m = select_representatives(&c, &f, 2).unwrap();
        // mean 2.0: periods 2 and 3 tie at distance 1, lowest index wins
        assert_eq!(m.designated(0), 2);
        assert_eq!(m.weight(0), 4);
    }

    #[test]
    fn medoid_ties_prefer_lowest_index() {
        let f =
            FeatureMatrix::from_rows(vec![vec![5.0], vec![0.0], vec![5.0], vec![0.0], vec![5.0]])
                .unwrap();
        let c = cluster_kmeans(&f, 2, 9, 10).unwrap();
        let m = select_representatives(&c, &f, 1).unwrap();
        let w_hi = m.rep_of(0);
        assert_eq!(m.designated(w_hi), 0);
        assert_eq!(m.designated(1 - w_hi), 1);
        assert_eq!(m.weight(w_hi), 3);
    }

    #[test]
    fn identity_mapping_shapes() {
        let m = identity_mapping(4, 3);
        assert_eq!(m.rep_assignment(), &[0, 1, 2, 3]);
        assert_eq!(m.weights(), &[1, 1, 1, 1]);
        assert!(m.check().is_ok());
        let one = identity_mapping(1, 24);
        assert_eq!(one.representatives(), 1);
        assert_eq!(one.horizon_len(), 24);
        for w in 0..m.representatives() {
            assert_eq!(m.rep_of(m.designated(w)), w);
        }
    }

    #[test]
    fn mapping_rejects_foreign_designated_period() {
        assert!(PeriodMapping::new(vec![0, 0, 1], vec![2, 2], 4).is_err());
        assert!(PeriodMapping::new(vec![0, 0, 1], vec![1, 2], 4).is_ok());
    }

    #[test]
    fn mapping_csv_is_one_based() {
        let m = PeriodMapping::new(vec![0, 0, 1], vec![1, 2], 4).unwrap();
        let (p, r) = mapping_csv(&m);
        assert_eq!(p, "period,representative\n1,1\n2,1\n3,2\n");
        assert_eq!(r, "representative,designated_period,weight\n1,2,2\n2,3,1\n");
    }

    fn features_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, usize, u64)> {
        (2usize..12, 1usize..5, any::<u64>()).prop_flat_map(|(n, d, seed)| {
            (
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), n),
                1..=n,
                Just(seed),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn clustering_invariants((rows, k, seed) in features_strategy()) {
            let f = FeatureMatrix::from_rows(rows).unwrap();
            let c = cluster_kmeans(&f, k, seed, 100).unwrap();
            prop_assert!(c.assignment.iter().all(|&a| a < k));
            prop_assert!(c.inertia >= 0.0);
            for pair in c.inertia_history.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12);
            }
            let m = select_representatives(&c, &f, 3).unwrap();
            prop_assert_eq!(m.weights().iter().sum::<usize>(), f.rows());
            for w in 0..k {
                prop_assert_eq!(c.assignment[m.designated(w)], w);
            }
            let again = cluster_kmeans(&f, k, seed, 100).unwrap();
            prop_assert_eq!(&again, &c);
            prop_assert_eq!(mapping_csv(&select_representatives(&again, &f, 3).unwrap()), mapping_csv(&m));
        }
    }
}
