//! Resident aggregation and spectral clustering on the WWO kernel.

pub mod kernel;
pub mod kmeans;
pub mod spectral;

use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DayTrajectory, EncodedLocation, SpatioTemporalMatrix, SLOTS_PER_DAY};

pub use kernel::{
    overlap_similarity, similarity, weighted_distance, wwo_distance, PairwiseKernel, WeightKind, WeightVector,
    DEFAULT_ACTIVE_RATIO, DEFAULT_H_SLOTS,
};
pub use kmeans::{kmeans, KMeansResult, DEFAULT_RESTARTS};
pub use spectral::{embedding, normalized_laplacian, spectrum, Spectrum};

/// One representative day per resident.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedTrajectory {
    resident_id: String,
    slots: Vec<EncodedLocation>,
}

impl AggregatedTrajectory {
    pub fn new(resident_id: impl Into<String>, slots: Vec<EncodedLocation>) -> Result<Self> {
        if slots.len() != SLOTS_PER_DAY {
            return Err(Error::SlotCount {
                expected: SLOTS_PER_DAY,
                actual: slots.len(),
            });
        }
        Ok(AggregatedTrajectory {
            resident_id: resident_id.into(),
            slots,
        })
    }

    pub fn resident_id(&self) -> &str {
        &self.resident_id
    }

    pub fn slots(&self) -> &[EncodedLocation] {
        &self.slots
    }
}

/// Per-slot mode of the given days. `Missing` is not counted; a slot no day
/// observes stays `Missing`. Ties go to `origin` when it is among the tied
/// locations, otherwise to the lowest code.
pub fn mode_slots(days: &[&DayTrajectory], origin: Option<EncodedLocation>) -> Vec<EncodedLocation> {
    (0..SLOTS_PER_DAY)
        .map(|q| {
            let mut counts = [0usize; 8];
            for d in days {
                let loc = d.slots()[q];
                if !loc.is_missing() {
                    counts[loc.code() as usize] += 1;
                }
            }
            let top = *counts.iter().max().expect("non-empty");
            if top == 0 {
                return EncodedLocation::Missing;
            }
            if let Some(o) = origin.filter(|o| !o.is_missing()) {
                if counts[o.code() as usize] == top {
                    return o;
                }
            }
            let code = counts.iter().position(|c| *c == top).expect("top exists");
            EncodedLocation::OBSERVABLE[code]
        })
        .collect()
}

/// Representative day of a resident over its valid days.
pub fn aggregate(
    matrix: &SpatioTemporalMatrix,
    min_valid_fraction: f64,
    origin: Option<EncodedLocation>,
) -> Result<AggregatedTrajectory> {
    let days: Vec<&DayTrajectory> = matrix.valid_days(min_valid_fraction).collect();
    if days.is_empty() {
        return Err(Error::NoValidDays(matrix.resident_id().to_string()));
    }
    AggregatedTrajectory::new(matrix.resident_id(), mode_slots(&days, origin))
}

#[derive(Debug, Clone)]
pub struct ClusterOptions {
    pub weights: WeightVector,
    pub h_slots: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            weights: WeightVector::active_day_focus(DEFAULT_ACTIVE_RATIO).expect("positive ratio"),
            h_slots: DEFAULT_H_SLOTS,
            seed: 0,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

/// Resident to cluster label. Labels are `0..k`, numbered in order of first
/// appearance when residents are sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: BTreeMap<String, usize>,
    /// Fewer distinct residents than clusters, or an empty cluster was refilled.
    #[serde(default)]
    pub degenerate: bool,
}

impl ClusterAssignment {
    /// Members of each cluster, sorted by id.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.k];
        for (rid, &l) in &self.labels {
            out[l].push(rid.as_str());
        }
        out
    }
}

fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    raw.iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Kernel and Laplacian spectrum of a cohort, reusable across `k`.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    ids: Vec<String>,
    kernel: PairwiseKernel,
    spectrum: Spectrum,
    distinct: usize,
}

impl SpectralModel {
    /// Residents are processed in id order whatever the input order.
    pub fn fit(trajs: &[AggregatedTrajectory], opts: &ClusterOptions) -> Result<Self> {
        let mut sorted: Vec<&AggregatedTrajectory> = trajs.iter().collect();
        sorted.sort_by(|a, b| a.resident_id().cmp(b.resident_id()));
        if let Some(w) = sorted.windows(2).find(|w| w[0].resident_id() == w[1].resident_id()) {
            return Err(Error::InvalidParameter(format!(
                "resident {} appears twice",
                w[0].resident_id()
            )));
        }
        if sorted.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "clustering needs at least 3 residents, got {}",
                sorted.len()
            )));
        }
        let slots: Vec<&[EncodedLocation]> = sorted.iter().map(|t| t.slots()).collect();
        let kernel = PairwiseKernel::compute(&slots, &opts.weights, opts.h_slots);
        let spectrum = spectrum(&normalized_laplacian(&kernel.similarity))?;
        let mut uniq = slots.clone();
        uniq.sort();
        uniq.dedup();
        Ok(SpectralModel {
            ids: sorted.iter().map(|t| t.resident_id().to_string()).collect(),
            kernel,
            spectrum,
            distinct: uniq.len(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn kernel(&self) -> &PairwiseKernel {
        &self.kernel
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn cluster(&self, k: usize, opts: &ClusterOptions) -> Result<ClusterAssignment> {
        let n = self.ids.len();
        if k < 2 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must satisfy 2 <= k < n = {n}"
            )));
        }
        let points = embedding(&self.spectrum, k);
        let run = kmeans(&points, k, opts.seed, opts.restarts);
        let mut rows: Vec<&Vec<f64>> = points.iter().collect();
        rows.sort_by(|a, b| a.partial_cmp(b).expect("finite embedding"));
        rows.dedup();
        let degenerate = self.distinct < k || rows.len() < k || run.repaired;
        if degenerate {
            warn!(
                "degenerate clustering at k = {k}: {} distinct trajectories, {} distinct embedded rows",
                self.distinct,
                rows.len()
            );
        }
        let labels = canonical_labels(&run.labels);
        Ok(ClusterAssignment {
            k,
            labels: self.ids.iter().cloned().zip(labels).collect(),
            degenerate,
        })
    }

    /// Sum over clusters of squared plain WWO distances of intra-cluster pairs.
    pub fn ssd(&self, assignment: &ClusterAssignment) -> f64 {
        let labels: Vec<Option<usize>> = self.ids.iter().map(|id| assignment.labels.get(id).copied()).collect();
        let n = self.ids.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..i {
                if labels[i].is_some() && labels[i] == labels[j] {
                    total += self.kernel.distance[(i, j)].powi(2);
                }
            }
        }
        total
    }
}

pub fn spectral_cluster(trajs: &[AggregatedTrajectory], k: usize, opts: &ClusterOptions) -> Result<ClusterAssignment> {
    SpectralModel::fit(trajs, opts)?.cluster(k, opts)
}

/// Clusterings for every `k` in a range, with their SSD.
#[derive(Debug, Clone)]
pub struct ClusterSweep {
    pub assignments: Vec<ClusterAssignment>,
    pub ssd_curve: Vec<(usize, f64)>,
    pub best_k: usize,
}

impl ClusterSweep {
    pub fn best(&self) -> &ClusterAssignment {
        self.assignments
            .iter()
            .find(|a| a.k == self.best_k)
            .expect("best k is in the sweep")
    }
}

pub fn cluster_sweep(
    trajs: &[AggregatedTrajectory],
    k_min: usize,
    k_max: usize,
    opts: &ClusterOptions,
) -> Result<ClusterSweep> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::InvalidParameter(format!(
            "k range {k_min}:{k_max} must satisfy 2 <= k_min <= k_max"
        )));
    }
    let model = SpectralModel::fit(trajs, opts)?;
    let assignments = (k_min..=k_max)
        .map(|k| model.cluster(k, opts))
        .collect::<Result<Vec<_>>>()?;
    let ssd_curve: Vec<(usize, f64)> = assignments.iter().map(|a| (a.k, model.ssd(a))).collect();
    let best_k = select_k(&ssd_curve).expect("non-empty range");
    Ok(ClusterSweep {
        assignments,
        ssd_curve,
        best_k,
    })
}

pub fn ssd_curve(
    trajs: &[AggregatedTrajectory],
    k_min: usize,
    k_max: usize,
    opts: &ClusterOptions,
) -> Result<Vec<(usize, f64)>> {
    Ok(cluster_sweep(trajs, k_min, k_max, opts)?.ssd_curve)
}

/// `k` with the lowest SSD; near-equal values (within 1e-12) go to the smaller `k`.
pub fn select_k(curve: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, ssd) in curve {
        let better = match best {
            None => true,
            Some((bk, bs)) => ssd < bs - 1e-12 || ((ssd - bs).abs() <= 1e-12 && k < bk),
        };
        if better {
            best = Some((k, ssd));
        }
    }
    best.map(|(k, _)| k)
}

fn choose2(x: usize) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index of two labelings of the same items. Identical
/// partitions score 1 even when the index is undefined (single cluster or
/// all singletons).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return if canonical_labels(a) == canonical_labels(b) {
            1.0
        } else {
            0.0
        };
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use EncodedLocation::*;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 10, d).unwrap()
    }

    fn agg(id: &str, f: impl Fn(usize) -> EncodedLocation) -> AggregatedTrajectory {
        AggregatedTrajectory::new(id, (0..SLOTS_PER_DAY).map(f).collect()).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let days: Vec<_> = (1..=10)
            .map(|d| DayTrajectory::filled("R", date(d), OriginL3))
            .collect();
        let m = SpatioTemporalMatrix::new("R", days).unwrap();
        assert!(aggregate(&m, 0.5, Some(OriginL3))
            .unwrap()
            .slots()
            .iter()
            .all(|s| *s == OriginL3));

        // 5 PublicB1 vs 5 OriginL2: the origin wins the tie
        let days: Vec<_> = (1..=10)
            .map(|d| DayTrajectory::filled("R", date(d), if d % 2 == 0 { PublicB1 } else { OriginL2 }))
            .collect();
        let m = SpatioTemporalMatrix::new("R", days).unwrap();
        assert_eq!(aggregate(&m, 0.5, Some(OriginL2)).unwrap().slots()[0], OriginL2);
        // without an origin the lower code wins
        assert_eq!(aggregate(&m, 0.5, None).unwrap().slots()[0], OriginL2);
        let days: Vec<_> = (1..=2)
            .map(|d| DayTrajectory::filled("R", date(d), if d == 1 { PublicB1 } else { Restricted }))
            .collect();
        let m = SpatioTemporalMatrix::new("R", days).unwrap();
        assert_eq!(aggregate(&m, 0.5, Some(OriginL3)).unwrap().slots()[0], PublicB1);

        // A, A, B
        let locs = [PublicL2, PublicL2, PublicL3];
        let days: Vec<_> = locs
            .iter()
            .enumerate()
            .map(|(i, l)| DayTrajectory::filled("R", date(i as u32 + 1), *l))
            .collect();
        let m = SpatioTemporalMatrix::new("R", days).unwrap();
        assert_eq!(aggregate(&m, 0.5, None).unwrap().slots()[0], PublicL2);
    }

    #[test]
    fn aggregate_skips_invalid_days() {
        let mut slots = vec![Missing; SLOTS_PER_DAY];
        slots[0] = PublicB1;
        let sparse = DayTrajectory::new("R", date(1), slots).unwrap();
        let full = DayTrajectory::filled("R", date(2), OriginL2);
        let m = SpatioTemporalMatrix::new("R", vec![sparse.clone(), full]).unwrap();
        assert_eq!(aggregate(&m, 0.5, None).unwrap().slots()[0], OriginL2);
        let m = SpatioTemporalMatrix::new("R", vec![sparse]).unwrap();
        assert!(matches!(aggregate(&m, 0.5, None), Err(Error::NoValidDays(_))));
    }

    #[test]
    fn three_identical_residents() {
        let trajs: Vec<_> = ["a", "b", "c"].iter().map(|id| agg(id, |_| OriginL2)).collect();
        let a = spectral_cluster(&trajs, 2, &ClusterOptions::default()).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.labels.len(), 3);
        assert!(a.labels.values().all(|l| *l < 2));
    }

    #[test]
    fn rejects_bad_k() {
        let trajs: Vec<_> = ["a", "b", "c"].iter().map(|id| agg(id, |_| OriginL2)).collect();
        assert!(spectral_cluster(&trajs, 3, &ClusterOptions::default()).is_err());
        assert!(spectral_cluster(&trajs, 1, &ClusterOptions::default()).is_err());
        assert!(spectral_cluster(&trajs[..2], 1, &ClusterOptions::default()).is_err());
    }

    #[test]
    fn planted_pair_of_groups() {
        let mut trajs = Vec::new();
        for i in 0..3 {
            trajs.push(agg(&format!("x{i}"), |q| {
                if (96..200).contains(&q) {
                    PublicL2
                } else {
                    OriginL2
                }
            }));
            trajs.push(agg(&format!("y{i}"), |q| {
                if (96..200).contains(&q) {
                    PublicL3
                } else {
                    OriginL3
                }
            }));
        }
        let a = spectral_cluster(&trajs, 2, &ClusterOptions::default()).unwrap();
        assert!(!a.degenerate);
        assert_eq!(a.labels["x0"], 0);
        assert_eq!(a.labels["x1"], 0);
        assert_eq!(a.labels["x2"], 0);
        assert_eq!(a.labels["y0"], 1);
    }

    #[test]
    fn select_k_prefers_smaller_on_ties() {
        assert_eq!(select_k(&[(2, 3.0), (3, 1.0), (4, 1.0), (5, 2.0)]), Some(3));
        assert_eq!(select_k(&[(2, 0.0), (3, 0.0)]), Some(2));
        assert_eq!(select_k(&[]), None);
    }

    // pair-counting form: ARI = 2(ad - bc) / ((a+b)(b+d) + (a+c)(c+d))
    fn pair_ari(x: &[usize], y: &[usize]) -> f64 {
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            for j in 0..i {
                match (x[i] == x[j], y[i] == y[j]) {
                    (true, true) => a += 1.0,
                    (true, false) => b += 1.0,
                    (false, true) => c += 1.0,
                    (false, false) => d += 1.0,
                }
            }
        }
        let den = (a + b) * (b + d) + (a + c) * (c + d);
        2.0 * (a * d - b * c) / den
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[5, 5, 5]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 1, 2], &[0, 1, 2]), 1.0);
        let x = [0, 0, 0, 1, 1, 1];
        let y = [0, 0, 1, 1, 2, 2];
        assert!((adjusted_rand_index(&x, &y) - pair_ari(&x, &y)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ari_matches_pair_counting(x in prop::collection::vec(0usize..4, 4..30), seed in 0usize..1000) {
            let y: Vec<usize> = x.iter().enumerate().map(|(i, v)| (v + (i * seed) % 3) % 4).collect();
            let den_zero = {
                let u: std::collections::BTreeSet<_> = x.iter().collect();
                let v: std::collections::BTreeSet<_> = y.iter().collect();
                u.len() == 1 && v.len() == 1
            };
            prop_assume!(!den_zero);
            let oracle = pair_ari(&x, &y);
            prop_assume!(oracle.is_finite());
            prop_assert!((adjusted_rand_index(&x, &y) - oracle).abs() < 1e-9);
        }

        #[test]
        fn partition_ignores_input_order(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
            let trajs: Vec<_> = (0..8usize)
                .map(|i| {
                    let start = 90 + 24 * (i % 3);
                    agg(&format!("r{i}"), move |q| if (start..start + 60).contains(&q) { PublicL2 } else { OriginL2 })
                })
                .collect();
            let shuffled: Vec<_> = perm.iter().map(|&i| trajs[i].clone()).collect();
            let opts = ClusterOptions::default();
            prop_assert_eq!(spectral_cluster(&trajs, 3, &opts).unwrap(), spectral_cluster(&shuffled, 3, &opts).unwrap());
        }
    }
}
