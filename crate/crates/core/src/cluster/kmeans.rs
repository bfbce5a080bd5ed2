//! Deterministic k-means with farthest-first starts.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_RESTARTS: usize = 100;
pub const MAX_ITER: usize = 300;
pub const REL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// An empty cluster had to be refilled during the winning run.
    pub repaired: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Centers grown from `start` by repeatedly taking the point farthest from
/// all chosen centers (ties: lowest index).
fn farthest_first(points: &[Vec<f64>], start: usize, k: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![points[start].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &points[start])).collect();
    while centers.len() < k {
        let mut pick = 0;
        for (i, d) in nearest.iter().enumerate() {
            if *d > nearest[pick] {
                pick = i;
            }
        }
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(p, &points[pick]));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeansResult {
    let n = points.len();
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; n];
    let mut repaired = false;
    let mut prev = f64::INFINITY;
    let mut inertia = f64::INFINITY;

    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let current = labels[i];
            let mut best = current;
            let mut best_d = if current < k {
                dist2(p, &centers[current])
            } else {
                f64::INFINITY
            };
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if best != current {
                labels[i] = best;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut pick: Option<(f64, usize)> = None;
            for (i, p) in points.iter().enumerate() {
                if counts[labels[i]] < 2 {
                    continue;
                }
                let d = dist2(p, &centers[labels[i]]);
                if pick.is_none_or(|(bd, _)| d >= bd) {
                    pick = Some((d, i));
                }
            }
            let (_, i) = pick.expect("n > k leaves a cluster with two members");
            counts[labels[i]] -= 1;
            labels[i] = c;
            counts[c] = 1;
            repaired = true;
            changed = true;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, s) in sums.into_iter().enumerate() {
            centers[c] = s.into_iter().map(|x| x / counts[c] as f64).collect();
        }
        inertia = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centers[l])).sum();

        if !changed || (prev - inertia).abs() <= REL_TOLERANCE * prev {
            break;
        }
        prev = inertia;
    }
    KMeansResult {
        labels,
        inertia,
        repaired,
    }
}

/// Best of several Lloyd runs by inertia. Starts are farthest-first from
/// every point when there are at most `restarts` points, otherwise from
/// `restarts` seeded random points.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> KMeansResult {
    let n = points.len();
    assert!(k >= 1 && k <= n, "k must lie in [1, n]");
    let restarts = restarts.max(1);
    let starts: Vec<usize> = if n <= restarts {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = sample(&mut rng, n, restarts).into_vec();
        s.sort_unstable();
        s
    };
    let mut best: Option<KMeansResult> = None;
    for start in starts {
        let run = lloyd(points, farthest_first(points, start, k));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one start")
}
