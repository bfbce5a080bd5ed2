//! Weighted windowed overlap kernel.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EncodedLocation, SLOTS_PER_DAY};

/// Half-width of the comparison window (30 minutes).
pub const DEFAULT_H_SLOTS: usize = 6;
/// Active-day to night weight ratio of [`WeightKind::ActiveDayFocus`].
pub const DEFAULT_ACTIVE_RATIO: f64 = 4.0;

/// 06:00, start of the elevated part of `ActiveDayFocus`.
pub const ACTIVE_FOCUS_START: usize = 72;
/// 07:00 to 20:00, support of `OnlyActiveDay`.
pub const ONLY_ACTIVE_START: usize = 84;
pub const ONLY_ACTIVE_END: usize = 240;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Uniform,
    ActiveDayFocus,
    OnlyActiveDay,
}

impl std::str::FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Uniform" | "uniform" => Ok(WeightKind::Uniform),
            "ActiveDayFocus" | "active-day-focus" => Ok(WeightKind::ActiveDayFocus),
            "OnlyActiveDay" | "only-active-day" => Ok(WeightKind::OnlyActiveDay),
            _ => Err(Error::InvalidParameter(format!("unknown weight kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

/// Per-slot weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    kind: WeightKind,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn uniform() -> Self {
        WeightVector {
            kind: WeightKind::Uniform,
            weights: vec![1.0 / SLOTS_PER_DAY as f64; SLOTS_PER_DAY],
        }
    }

    /// Piecewise constant: slots from 06:00 weigh `ratio` times the night slots.
    pub fn active_day_focus(ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "active-day weight ratio must be positive, got {ratio}"
            )));
        }
        let total = ACTIVE_FOCUS_START as f64 + ratio * (SLOTS_PER_DAY - ACTIVE_FOCUS_START) as f64;
        let weights = (0..SLOTS_PER_DAY)
            .map(|i| if i < ACTIVE_FOCUS_START { 1.0 } else { ratio } / total)
            .collect();
        Ok(WeightVector {
            kind: WeightKind::ActiveDayFocus,
            weights,
        })
    }

    /// Uniform over 07:00-20:00, zero elsewhere.
    pub fn only_active_day() -> Self {
        let width = (ONLY_ACTIVE_END - ONLY_ACTIVE_START) as f64;
        let weights = (0..SLOTS_PER_DAY)
            .map(|i| {
                if (ONLY_ACTIVE_START..ONLY_ACTIVE_END).contains(&i) {
                    1.0 / width
                } else {
                    0.0
                }
            })
            .collect();
        WeightVector {
            kind: WeightKind::OnlyActiveDay,
            weights,
        }
    }

    pub fn of_kind(kind: WeightKind, active_ratio: f64) -> Result<Self> {
        match kind {
            WeightKind::Uniform => Ok(Self::uniform()),
            WeightKind::ActiveDayFocus => Self::active_day_focus(active_ratio),
            WeightKind::OnlyActiveDay => Ok(Self::only_active_day()),
        }
    }

    /// Arbitrary weights; must be 288 non-negative values summing to 1.
    pub fn custom(kind: WeightKind, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != SLOTS_PER_DAY {
            return Err(Error::SlotCount {
                expected: SLOTS_PER_DAY,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, expected 1")));
        }
        Ok(WeightVector { kind, weights })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn mismatch(a: EncodedLocation, b: EncodedLocation) -> bool {
    a != b || a.is_missing()
}

/// Per-slot mismatch rate over the window `[i-h, i+h]`, clamped to the day
/// and divided by the clamped width. `Missing` never matches.
pub fn window_mismatch(a: &[EncodedLocation], b: &[EncodedLocation], h_slots: usize) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut prefix = vec![0u32; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + mismatch(a[i], b[i]) as u32;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h_slots);
            let hi = (i + h_slots).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) as f64 / (hi - lo + 1) as f64
        })
        .collect()
}

/// Unweighted WWO distance, in `[0, 1]`.
pub fn wwo_distance(a: &[EncodedLocation], b: &[EncodedLocation], h_slots: usize) -> f64 {
    let m = window_mismatch(a, b, h_slots);
    m.iter().sum::<f64>() / m.len() as f64
}

/// Weighted WWO distance `sum_i w_i m(i)`.
pub fn weighted_distance(a: &[EncodedLocation], b: &[EncodedLocation], w: &WeightVector, h_slots: usize) -> f64 {
    window_mismatch(a, b, h_slots)
        .iter()
        .zip(w.weights())
        .map(|(m, w)| m * w)
        .sum()
}

/// `1 / (1 + weighted distance)`.
pub fn similarity(a: &[EncodedLocation], b: &[EncodedLocation], w: &WeightVector, h_slots: usize) -> f64 {
    1.0 / (1.0 + weighted_distance(a, b, w, h_slots))
}

/// Share of slots holding the same observed symbol.
pub fn overlap_similarity(a: &[EncodedLocation], b: &[EncodedLocation]) -> f64 {
    assert_eq!(a.len(), b.len());
    let same = a.iter().zip(b).filter(|(x, y)| !mismatch(**x, **y)).count();
    same as f64 / a.len() as f64
}

/// Pairwise similarity (zero diagonal) and plain distance matrices.
#[derive(Debug, Clone)]
pub struct PairwiseKernel {
    pub similarity: DMatrix<f64>,
    pub distance: DMatrix<f64>,
}

impl PairwiseKernel {
    pub fn compute(trajs: &[&[EncodedLocation]], w: &WeightVector, h_slots: usize) -> Self {
        let n = trajs.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values: Vec<(f64, f64)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let m = window_mismatch(trajs[i], trajs[j], h_slots);
                let dist_w: f64 = m.iter().zip(w.weights()).map(|(m, w)| m * w).sum();
                let dist = m.iter().sum::<f64>() / m.len() as f64;
                (1.0 / (1.0 + dist_w), dist)
            })
            .collect();
        let mut similarity = DMatrix::zeros(n, n);
        let mut distance = DMatrix::zeros(n, n);
        for (&(i, j), &(s, d)) in pairs.iter().zip(&values) {
            similarity[(i, j)] = s;
            similarity[(j, i)] = s;
            distance[(i, j)] = d;
            distance[(j, i)] = d;
        }
        PairwiseKernel { similarity, distance }
    }
}
