//! Period probabilities, quartile fences and behavior labels.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::deviation::DeviationDay;
use crate::error::{Error, Result};
use crate::model::{EncodedLocation, SLOTS_PER_DAY};
use crate::norm::{HybridNorm, NOON_SLOT};

/// One hour in slots.
pub const HOUR_SLOTS: usize = 12;
/// Profiles needed before quartiles are fitted.
pub const MIN_PROFILES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Period {
    Midnight1,
    Morning,
    PreGroup,
    Group,
    PostGroup,
    Evening,
    Midnight2,
}

impl Period {
    pub const ALL: [Period; 7] = [
        Period::Midnight1,
        Period::Morning,
        Period::PreGroup,
        Period::Group,
        Period::PostGroup,
        Period::Evening,
        Period::Midnight2,
    ];

    /// The two midnight periods share one rule period.
    pub fn rule_period(self) -> RulePeriod {
        match self {
            Period::Midnight1 | Period::Midnight2 => RulePeriod::Midnight,
            Period::Morning => RulePeriod::Morning,
            Period::PreGroup => RulePeriod::PreGroup,
            Period::Group => RulePeriod::Group,
            Period::PostGroup => RulePeriod::PostGroup,
            Period::Evening => RulePeriod::Evening,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RulePeriod {
    Midnight,
    Morning,
    PreGroup,
    Group,
    PostGroup,
    Evening,
}

impl RulePeriod {
    pub const ALL: [RulePeriod; 6] = [
        RulePeriod::Midnight,
        RulePeriod::Morning,
        RulePeriod::PreGroup,
        RulePeriod::Group,
        RulePeriod::PostGroup,
        RulePeriod::Evening,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RulePeriod::Midnight => "midnight",
            RulePeriod::Morning => "morning",
            RulePeriod::PreGroup => "pre_group",
            RulePeriod::Group => "group",
            RulePeriod::PostGroup => "post_group",
            RulePeriod::Evening => "evening",
        }
    }
}

/// Coarse location category of a slot against its norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    /// Matched the norm.
    C1,
    /// Deviated to an origin.
    C2,
    /// Deviated to a public area.
    C3,
    /// Deviated to another resident's room.
    C4,
    /// Deviated to a restricted room.
    C5,
}

impl Category {
    pub const ALL: [Category; 5] = [Category::C1, Category::C2, Category::C3, Category::C4, Category::C5];

    /// Category of a deviated location; `None` for `Missing`.
    pub fn of_deviation(loc: EncodedLocation) -> Option<Category> {
        use EncodedLocation::*;
        match loc {
            OriginL2 | OriginL3 => Some(Category::C2),
            PublicB1 | PublicL2 | PublicL3 => Some(Category::C3),
            PrivateL2 | PrivateL3 => Some(Category::C4),
            Restricted => Some(Category::C5),
            Missing => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::C1 => "c1",
            Category::C2 => "c2",
            Category::C3 => "c3",
            Category::C4 => "c4",
            Category::C5 => "c5",
        }
    }
}

/// Seven contiguous periods covering the day, derived from `p5`/`p6`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeriodLayout {
    pub p5: usize,
    pub p6: usize,
    /// Boundaries; period `i` is `bounds[i]..bounds[i + 1]`.
    bounds: [usize; 8],
    /// The group window was shorter than two hours.
    pub truncated: bool,
}

impl PeriodLayout {
    pub fn range(&self, period: Period) -> Range<usize> {
        let i = period as usize;
        self.bounds[i]..self.bounds[i + 1]
    }

    pub fn period_of(&self, slot: usize) -> Period {
        assert!(slot < SLOTS_PER_DAY);
        Period::ALL
            .into_iter()
            .find(|p| self.range(*p).contains(&slot))
            .expect("periods tile the day")
    }

    pub fn len(&self, period: Period) -> usize {
        self.range(period).len()
    }
}

/// Layout for average transition points `p5 <= p6`. Pre- and post-group
/// are an hour each; when the window is under two hours the group period
/// is empty and the window is split in half between them.
pub fn period_layout(p5: usize, p6: usize) -> Result<PeriodLayout> {
    if p5 > p6 || p6 > SLOTS_PER_DAY {
        return Err(Error::InvalidParameter(format!(
            "period layout needs 0 <= p5 <= p6 <= {SLOTS_PER_DAY}, got p5 = {p5}, p6 = {p6}"
        )));
    }
    let truncated = p6 - p5 < 2 * HOUR_SLOTS;
    let (pre_end, post_start) = if truncated {
        warn!("group window [{p5}, {p6}) shorter than two hours, group period left empty");
        let mid = p5 + (p6 - p5) / 2;
        (mid, mid)
    } else {
        (p5 + HOUR_SLOTS, p6 - HOUR_SLOTS)
    };
    let evening_end = p6 + (SLOTS_PER_DAY - p6) / 2;
    Ok(PeriodLayout {
        p5,
        p6,
        bounds: [0, p5 / 2, p5, pre_end, post_start, p6, evening_end, SLOTS_PER_DAY],
        truncated,
    })
}

/// Rounded mean of `p5`/`p6` over days with a non-empty group window, or
/// noon/noon when there is none.
pub fn average_transitions<'a>(norms: impl IntoIterator<Item = &'a HybridNorm>) -> (usize, usize) {
    let (mut s5, mut s6, mut n) = (0usize, 0usize, 0usize);
    for norm in norms {
        if norm.p5 < norm.p6 {
            s5 += norm.p5;
            s6 += norm.p6;
            n += 1;
        }
    }
    if n == 0 {
        return (NOON_SLOT, NOON_SLOT);
    }
    let avg = |s: usize| (s as f64 / n as f64).round() as usize;
    (avg(s5), avg(s6))
}

/// Valid and per-category deviated slot counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub valid: usize,
    /// Indexed by category; the `C1` entry stays 0.
    pub deviated: [usize; 5],
}

impl SlotCounts {
    fn add(&mut self, other: &SlotCounts) {
        self.valid += other.valid;
        for (a, b) in self.deviated.iter_mut().zip(other.deviated) {
            *a += b;
        }
    }

    /// `None` when no slot was valid. `C1` takes the remainder.
    pub fn probabilities(&self) -> Option<BTreeMap<Category, f64>> {
        if self.valid == 0 {
            return None;
        }
        let mut out = BTreeMap::new();
        let mut rest = 1.0;
        for cat in &Category::ALL[1..] {
            let p = self.deviated[cat.index()] as f64 / self.valid as f64;
            rest -= p;
            out.insert(*cat, p);
        }
        out.insert(Category::C1, rest.max(0.0));
        Some(out)
    }
}

pub fn period_counts(history: &[DeviationDay], layout: &PeriodLayout) -> BTreeMap<Period, SlotCounts> {
    let mut out: BTreeMap<Period, SlotCounts> = Period::ALL.iter().map(|p| (*p, SlotCounts::default())).collect();
    for day in history {
        for period in Period::ALL {
            let c = out.get_mut(&period).expect("all periods present");
            for slot in layout.range(period) {
                let s = day.slots[slot];
                if !s.is_valid() {
                    continue;
                }
                c.valid += 1;
                if let Some(cat) = s.deviated().and_then(Category::of_deviation) {
                    c.deviated[cat.index()] += 1;
                }
            }
        }
    }
    out
}

pub type ProbabilityTable = BTreeMap<RulePeriod, BTreeMap<Category, f64>>;

/// Per rule period (midnights pooled by count) probability of each
/// category. Periods without valid slots are absent.
pub fn deviation_probabilities(history: &[DeviationDay], layout: &PeriodLayout) -> ProbabilityTable {
    let mut pooled: BTreeMap<RulePeriod, SlotCounts> = BTreeMap::new();
    for (period, counts) in period_counts(history, layout) {
        pooled.entry(period.rule_period()).or_default().add(&counts);
    }
    pooled
        .into_iter()
        .filter_map(|(p, c)| c.probabilities().map(|probs| (p, probs)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    SleepIrregularity,
    AwakeIrregularity,
    PrivateVisiting,
}

impl Label {
    pub const ALL: [Label; 3] = [
        Label::SleepIrregularity,
        Label::AwakeIrregularity,
        Label::PrivateVisiting,
    ];
}

/// Upper and lower fences of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Fence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lav: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdTable {
    pub cells: BTreeMap<RulePeriod, BTreeMap<Category, Fence>>,
}

impl ThresholdTable {
    pub fn fence(&self, period: RulePeriod, cat: Category) -> Fence {
        self.cells
            .get(&period)
            .and_then(|m| m.get(&cat))
            .copied()
            .unwrap_or_default()
    }

    pub fn set(&mut self, period: RulePeriod, cat: Category, fence: Fence) {
        self.cells.entry(period).or_default().insert(cat, fence);
    }

    /// Fixed reference fences for the classification rules.
    pub fn published() -> Self {
        use Category::*;
        use RulePeriod::*;
        let lav = |v| Fence {
            uav: None,
            lav: Some(v),
        };
        let uav = |v| Fence {
            uav: Some(v),
            lav: None,
        };
        let mut t = ThresholdTable::default();
        t.set(Midnight, C1, lav(0.8762));
        t.set(Morning, C1, lav(0.7323));
        t.set(Evening, C1, lav(0.7522));
        t.set(PreGroup, C2, uav(0.2717));
        t.set(Morning, C4, uav(0.0118));
        t.set(PreGroup, C4, uav(0.0312));
        t.set(Group, C4, uav(0.0521));
        t.set(PostGroup, C4, uav(0.0223));
        t.set(Evening, C4, uav(0.0174));
        t
    }
}

/// Nearest-rank quantile of sorted data: `sorted[ceil(p n) - 1]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Tukey fences `Q1 - 1.5 IQR` and `Q3 + 1.5 IQR`, clamped to `[0, 1]`.
pub fn fences(values: &[f64]) -> Fence {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = nearest_rank(&v, 0.25);
    let q3 = nearest_rank(&v, 0.75);
    let iqr = q3 - q1;
    Fence {
        uav: Some((q3 + 1.5 * iqr).clamp(0.0, 1.0)),
        lav: Some((q1 - 1.5 * iqr).clamp(0.0, 1.0)),
    }
}

/// Fences for every cell from the cohort's probability tables.
pub fn fit_thresholds<'a>(tables: impl IntoIterator<Item = &'a ProbabilityTable>) -> Result<ThresholdTable> {
    let tables: Vec<&ProbabilityTable> = tables.into_iter().collect();
    if tables.len() < MIN_PROFILES {
        return Err(Error::TooFewProfiles {
            needed: MIN_PROFILES,
            got: tables.len(),
        });
    }
    let mut out = ThresholdTable::default();
    for period in RulePeriod::ALL {
        for cat in Category::ALL {
            let values: Vec<f64> = tables
                .iter()
                .filter_map(|t| t.get(&period).and_then(|m| m.get(&cat)).copied())
                .collect();
            if !values.is_empty() {
                out.set(period, cat, fences(&values));
            }
        }
    }
    Ok(out)
}

/// Reading of the awake rule's origin condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AwakeRule {
    /// Pre-group origin probability above its upper fence.
    #[default]
    Uav,
    /// Pre-group origin probability below its lower fence.
    Literal,
}

impl std::str::FromStr for AwakeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Uav" | "uav" | "UAV" => Ok(AwakeRule::Uav),
            "Literal" | "literal" => Ok(AwakeRule::Literal),
            _ => Err(Error::InvalidParameter(format!("unknown awake rule {s:?}"))),
        }
    }
}

fn below_lav(p: &ProbabilityTable, t: &ThresholdTable, period: RulePeriod, cat: Category) -> bool {
    match (p.get(&period).and_then(|m| m.get(&cat)), t.fence(period, cat).lav) {
        (Some(v), Some(lav)) => *v < lav,
        _ => false,
    }
}

fn above_uav(p: &ProbabilityTable, t: &ThresholdTable, period: RulePeriod, cat: Category) -> bool {
    match (p.get(&period).and_then(|m| m.get(&cat)), t.fence(period, cat).uav) {
        (Some(v), Some(uav)) => *v > uav,
        _ => false,
    }
}

pub fn classify(p: &ProbabilityTable, t: &ThresholdTable, awake: AwakeRule) -> BTreeSet<Label> {
    use Category::*;
    use RulePeriod::*;
    let mut labels = BTreeSet::new();
    if below_lav(p, t, Midnight, C1) || below_lav(p, t, Evening, C1) {
        labels.insert(Label::SleepIrregularity);
    }
    let origin_late = match awake {
        AwakeRule::Uav => above_uav(p, t, PreGroup, C2),
        AwakeRule::Literal => below_lav(p, t, PreGroup, C2),
    };
    if below_lav(p, t, Morning, C1) || origin_late {
        labels.insert(Label::AwakeIrregularity);
    }
    if [Morning, PreGroup, Group, PostGroup, Evening]
        .into_iter()
        .any(|period| above_uav(p, t, period, C4))
    {
        labels.insert(Label::PrivateVisiting);
    }
    labels
}

/// A resident's period probabilities and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub resident_id: String,
    pub p5: usize,
    pub p6: usize,
    #[serde(rename = "P")]
    pub probabilities: ProbabilityTable,
    pub labels: BTreeSet<Label>,
}

/// Profile of one resident from its deviation history and hybrid norms;
/// labels are left empty.
pub fn build_profile(resident_id: &str, history: &[DeviationDay], norms: &[&HybridNorm]) -> Result<DeviationProfile> {
    let (p5, p6) = average_transitions(norms.iter().copied());
    let layout = period_layout(p5, p6)?;
    Ok(DeviationProfile {
        resident_id: resident_id.to_string(),
        p5,
        p6,
        probabilities: deviation_probabilities(history, &layout),
        labels: BTreeSet::new(),
    })
}

/// Where the classification fences come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThresholdSource {
    #[default]
    Fitted,
    Published,
}

impl std::str::FromStr for ThresholdSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Fitted" | "fitted" => Ok(ThresholdSource::Fitted),
            "Published" | "published" => Ok(ThresholdSource::Published),
            _ => Err(Error::InvalidParameter(format!("unknown threshold source {s:?}"))),
        }
    }
}

/// Fits (or loads) fences and labels every profile in place.
pub fn label_cohort(
    profiles: &mut [DeviationProfile],
    source: ThresholdSource,
    awake: AwakeRule,
) -> Result<ThresholdTable> {
    let thresholds = match source {
        ThresholdSource::Fitted => fit_thresholds(profiles.iter().map(|p| &p.probabilities))?,
        ThresholdSource::Published => ThresholdTable::published(),
    };
    for p in profiles.iter_mut() {
        p.labels = classify(&p.probabilities, &thresholds, awake);
    }
    Ok(thresholds)
}

/// Share of residents by label count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub residents: usize,
    pub zero: f64,
    pub one: f64,
    pub two_plus: f64,
    pub per_label: BTreeMap<Label, usize>,
    /// Label counts among residents with exactly one label.
    pub one_label: BTreeMap<Label, usize>,
}

pub fn cohort_report<'a>(labels: impl IntoIterator<Item = &'a BTreeSet<Label>>) -> CohortReport {
    let mut n = 0usize;
    let mut by_count = [0usize; 3];
    let mut per_label: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 0)).collect();
    let mut one_label = per_label.clone();
    for set in labels {
        n += 1;
        by_count[set.len().min(2)] += 1;
        for l in set {
            *per_label.get_mut(l).expect("known label") += 1;
        }
        if set.len() == 1 {
            *one_label.get_mut(set.first().expect("one label")).expect("known label") += 1;
        }
    }
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    CohortReport {
        residents: n,
        zero: frac(by_count[0]),
        one: frac(by_count[1]),
        two_plus: frac(by_count[2]),
        per_label,
        one_label,
    }
}
