use std::fs;
use std::path::Path;

use hybridnorm::classify::{AwakeRule, ThresholdSource};
use hybridnorm::cluster::kernel::{WeightKind, DEFAULT_ACTIVE_RATIO, DEFAULT_H_SLOTS};
use hybridnorm::cluster::kmeans::DEFAULT_RESTARTS;
use hybridnorm::localize::DEFAULT_RSSI_THRESHOLD_DBM;
use hybridnorm::norm::{TransitionMode, DEFAULT_H_GAP};
use hybridnorm::preprocess::DEFAULT_MIN_STAY_SLOTS;
use hybridnorm::SLOTS_PER_DAY;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const CONFIG_VERSION: u32 = 1;

/// Every tunable of the pipeline. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub h_slots: usize,
    pub min_stay_slots: usize,
    pub min_valid_fraction: f64,
    pub weight_kind: WeightKind,
    pub active_ratio: f64,
    pub awake_rule: AwakeRule,
    pub transition_mode: TransitionMode,
    pub h_gap: usize,
    pub leave_one_out: bool,
    /// Inclusive range of `k` scanned for the SSD curve.
    pub k_range: (usize, usize),
    /// Fixed cluster count; the SSD argmin when absent.
    pub k: Option<usize>,
    pub restarts: usize,
    pub rssi_threshold_dbm: i32,
    pub utc_offset_minutes: i32,
    pub thresholds: ThresholdSource,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            version: CONFIG_VERSION,
            h_slots: DEFAULT_H_SLOTS,
            min_stay_slots: DEFAULT_MIN_STAY_SLOTS,
            min_valid_fraction: 0.5,
            weight_kind: WeightKind::ActiveDayFocus,
            active_ratio: DEFAULT_ACTIVE_RATIO,
            awake_rule: AwakeRule::Uav,
            transition_mode: TransitionMode::Literal,
            h_gap: DEFAULT_H_GAP,
            leave_one_out: false,
            k_range: (2, 7),
            k: None,
            restarts: DEFAULT_RESTARTS,
            rssi_threshold_dbm: DEFAULT_RSSI_THRESHOLD_DBM,
            utc_offset_minutes: 0,
            thresholds: ThresholdSource::Fitted,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, Failure> {
        let text =
            fs::read_to_string(path).map_err(|e| Failure::validation("config", format!("{}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| Failure::validation("config", format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let fail = |m: String| Err(Failure::validation("config", m));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {}", self.version));
        }
        if self.h_slots >= SLOTS_PER_DAY || self.h_gap >= SLOTS_PER_DAY {
            return fail("h_slots and h_gap must be below 288".into());
        }
        if self.min_stay_slots == 0 {
            return fail("min_stay_slots must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return fail("min_valid_fraction must lie in [0, 1]".into());
        }
        if !(self.active_ratio.is_finite() && self.active_ratio > 0.0) {
            return fail("active_ratio must be positive".into());
        }
        let (lo, hi) = self.k_range;
        if lo < 2 || lo > hi {
            return fail(format!("k range {lo}:{hi} must satisfy 2 <= min <= max"));
        }
        if self.k.is_some_and(|k| k < 2) {
            return fail("k must be at least 2".into());
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1".into());
        }
        if self.utc_offset_minutes.abs() >= 24 * 60 {
            return fail("utc_offset_minutes must be within a day".into());
        }
        Ok(())
    }
}

/// Parses `min:max`.
pub fn parse_k_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected MIN:MAX")?;
    let lo = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}
