use hybridnorm::cluster::{
    adjusted_rand_index, aggregate, cluster_sweep, normalized_laplacian, spectral_cluster, spectrum,
    AggregatedTrajectory, ClusterOptions, PairwiseKernel, WeightVector,
};
use hybridnorm::model::group_by_resident;
use hybridnorm::preprocess::detect_origin;
use hybridnorm::synth::{generate, planted_groups, CohortSpec};
use hybridnorm::{EncodedLocation, SLOTS_PER_DAY};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn planted(n: usize, g: usize, days: usize, seed: u64) -> (Vec<AggregatedTrajectory>, Vec<usize>) {
    let cohort = generate(&CohortSpec::planted(n, g, days), seed).unwrap();
    let groups = planted_groups(&cohort.plan);
    let mats = group_by_resident(cohort.days).unwrap();
    let aggs = mats
        .iter()
        .map(|m| aggregate(m, 0.5, Some(detect_origin(m).unwrap())).unwrap())
        .collect::<Vec<_>>();
    let truth = aggs.iter().map(|a| groups[a.resident_id()]).collect();
    (aggs, truth)
}

#[test]
fn recovers_planted_groups() {
    let (aggs, truth) = planted(20, 4, 8, 5);
    let a = spectral_cluster(&aggs, 4, &ClusterOptions::default()).unwrap();
    let found: Vec<usize> = aggs.iter().map(|t| a.labels[t.resident_id()]).collect();
    assert_eq!(adjusted_rand_index(&truth, &found), 1.0);
    assert!(!a.degenerate);

    let sweep = cluster_sweep(&aggs, 2, 7, &ClusterOptions::default()).unwrap();
    assert_eq!(sweep.ssd_curve.len(), 6);
    assert_eq!(sweep.best_k, 4);
}

/// Normalized cut of a two-way split of a similarity matrix.
fn ncut(w: &DMatrix<f64>, side: &[bool]) -> f64 {
    let n = side.len();
    let (mut cut, mut vol_a, mut vol_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if side[i] {
                vol_a += w[(i, j)];
            } else {
                vol_b += w[(i, j)];
            }
            if side[i] && !side[j] {
                cut += w[(i, j)];
            }
        }
    }
    cut / vol_a + cut / vol_b
}

fn noisy_copy(base: &[EncodedLocation], rng: &mut ChaCha8Rng) -> Vec<EncodedLocation> {
    let mut v = base.to_vec();
    for _ in 0..3 {
        let start = rng.gen_range(0..SLOTS_PER_DAY - 12);
        let loc = EncodedLocation::OBSERVABLE[rng.gen_range(0..8)];
        v[start..start + 12].fill(loc);
    }
    v
}

fn random_day(rng: &mut ChaCha8Rng) -> Vec<EncodedLocation> {
    let mut v = Vec::with_capacity(SLOTS_PER_DAY);
    while v.len() < SLOTS_PER_DAY {
        let loc = EncodedLocation::OBSERVABLE[rng.gen_range(0..8)];
        let len = rng.gen_range(6..30).min(SLOTS_PER_DAY - v.len());
        v.extend(std::iter::repeat_n(loc, len));
    }
    v
}

#[test]
fn two_way_split_matches_brute_force_ncut() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bases = [random_day(&mut rng), random_day(&mut rng)];
        let aggs: Vec<AggregatedTrajectory> = (0..6)
            .map(|i| AggregatedTrajectory::new(format!("r{i}"), noisy_copy(&bases[i % 2], &mut rng)).unwrap())
            .collect();
        let opts = ClusterOptions::default();
        let slots: Vec<&[EncodedLocation]> = aggs.iter().map(|a| a.slots()).collect();
        let w = PairwiseKernel::compute(&slots, &opts.weights, opts.h_slots).similarity;

        let mut best = (f64::INFINITY, 0u32);
        // resident 0 fixed on side A; every other split once
        for mask in 0u32..32 {
            let side: Vec<bool> = (0..6).map(|i| i == 0 || mask >> (i - 1) & 1 == 1).collect();
            if side.iter().all(|s| *s) {
                continue;
            }
            let c = ncut(&w, &side);
            if c < best.0 {
                best = (c, mask);
            }
        }
        let brute: Vec<usize> = (0..6)
            .map(|i| usize::from(!(i == 0 || best.1 >> (i - 1) & 1 == 1)))
            .collect();
        let a = spectral_cluster(&aggs, 2, &opts).unwrap();
        let found: Vec<usize> = aggs.iter().map(|t| a.labels[t.resident_id()]).collect();
        assert_eq!(adjusted_rand_index(&brute, &found), 1.0, "seed {seed}");
    }
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn laplacian_spectrum_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in [3usize, 5, 9, 14] {
        let days: Vec<Vec<EncodedLocation>> = (0..n).map(|_| random_day(&mut rng)).collect();
        let slots: Vec<&[EncodedLocation]> = days.iter().map(|d| d.as_slice()).collect();
        let w = PairwiseKernel::compute(&slots, &WeightVector::uniform(), 3).similarity;
        let l = normalized_laplacian(&w);
        let spec = spectrum(&l).unwrap();
        let oracle = jacobi_eigenvalues(&l);
        for (a, b) in spec.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "n = {n}: {a} vs {b}");
        }
        assert!(spec.eigenvalues[0].abs() < 1e-8);
    }
}
