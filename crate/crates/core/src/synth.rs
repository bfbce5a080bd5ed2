//! Synthetic cohorts with planted group schedules and injected deviations.
//!
//! Every member of a group follows the same day plan: nights in their own
//! room, an active window `[wake, return)` spent in the group's default
//! public area with overlaid blocks. Deviations are written on top and
//! recorded in a plan, which is the ground truth for the rest of the
//! pipeline. Noise is applied last and never touches injected slots.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localize::{
    ReceiverMap, Registry, Room, RoomId, ScanRecord, CYCLE_SECONDS, SUB_WINDOWS, SUB_WINDOW_SECONDS,
};
use crate::model::{DayTrajectory, EncodedLocation, SLOTS_PER_DAY, SLOT_SECONDS};
use crate::preprocess::{smooth_slots, DEFAULT_MIN_STAY_SLOTS};

pub const SPEC_VERSION: u32 = 1;

/// Slots at each end of the active window that must not be the origin.
pub const EDGE_SLOTS: usize = 6;

const SLEEP_SLOTS: usize = 24;
const AWAKE_SLOTS: usize = 18;
const VISIT_OFFSET: usize = 18;
const VISIT_SLOTS: usize = 30;

/// Half-open slot range `[start, end)` with one location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub location: EncodedLocation,
}

impl Block {
    fn new(start: usize, end: usize, location: EncodedLocation) -> Self {
        Block { start, end, location }
    }
}

/// Shared day plan of one group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSchedule {
    /// Building level of the members' rooms (2 or 3).
    pub level: u8,
    pub wake: usize,
    #[serde(rename = "return")]
    pub return_slot: usize,
    pub default_location: EncodedLocation,
    #[serde(default)]
    pub blocks: Vec<Block>,
    /// Extra blocks by day index modulo the number of variants.
    #[serde(default)]
    pub day_variants: Vec<Vec<Block>>,
}

impl GroupSchedule {
    pub fn origin(&self) -> EncodedLocation {
        EncodedLocation::origin_on_level(self.level).expect("validated level")
    }

    /// Planned day for day index `day`.
    pub fn day_plan(&self, day: usize) -> Vec<EncodedLocation> {
        let mut v = vec![self.origin(); SLOTS_PER_DAY];
        v[self.wake..self.return_slot].fill(self.default_location);
        let variant = (!self.day_variants.is_empty()).then(|| &self.day_variants[day % self.day_variants.len()]);
        for b in self.blocks.iter().chain(variant.into_iter().flatten()) {
            v[b.start..b.end].fill(b.location);
        }
        v
    }

    fn shifted(mut self, by: usize) -> Self {
        self.wake += by;
        self.return_slot += by;
        for b in self.blocks.iter_mut().chain(self.day_variants.iter_mut().flatten()) {
            b.start += by;
            b.end += by;
        }
        self
    }
}

/// Built-in schedules; group `g` uses template `g % 5`, later rounds start
/// half an hour later.
pub fn default_groups(n_groups: usize) -> Vec<GroupSchedule> {
    use EncodedLocation::*;
    let templates = [
        GroupSchedule {
            level: 3,
            wake: 84,
            return_slot: 240,
            default_location: PublicL3,
            blocks: vec![Block::new(144, 156, PublicB1), Block::new(204, 216, PublicB1)],
            day_variants: vec![vec![], vec![Block::new(108, 132, PublicL2)]],
        },
        GroupSchedule {
            level: 3,
            wake: 90,
            return_slot: 228,
            default_location: PublicL3,
            blocks: vec![Block::new(150, 162, PublicB1), Block::new(198, 210, PublicB1)],
            day_variants: vec![vec![], vec![], vec![Block::new(168, 192, PublicB1)]],
        },
        GroupSchedule {
            level: 3,
            wake: 78,
            return_slot: 234,
            default_location: PublicB1,
            blocks: vec![Block::new(120, 150, PublicL3), Block::new(180, 204, PublicL3)],
            day_variants: vec![],
        },
        GroupSchedule {
            level: 2,
            wake: 84,
            return_slot: 222,
            default_location: PublicL2,
            blocks: vec![Block::new(138, 150, PublicB1), Block::new(198, 210, PublicB1)],
            day_variants: vec![vec![], vec![Block::new(108, 120, PublicL3)]],
        },
        GroupSchedule {
            level: 2,
            wake: 96,
            return_slot: 240,
            default_location: PublicL2,
            blocks: vec![Block::new(144, 156, PublicB1), Block::new(168, 192, PublicL3)],
            day_variants: vec![],
        },
    ];
    (0..n_groups)
        .map(|g| {
            templates[g % templates.len()]
                .clone()
                .shifted((g / templates.len()) * 6)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Chance a slot is replaced by a different observed location.
    #[serde(default)]
    pub flip_rate: f64,
    /// Chance a slot becomes `Missing`.
    #[serde(default)]
    pub missing_rate: f64,
    /// Uniform jitter bound on the raw-mode RSSI of the true room.
    #[serde(default)]
    pub rssi_jitter_db: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeviationKind {
    Sleep,
    Awake,
    PrivateVisit,
}

/// One planted deviation; `end_slot` is inclusive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Injection {
    pub resident: String,
    pub date: NaiveDate,
    pub kind: DeviationKind,
    pub start_slot: usize,
    pub end_slot: usize,
    pub location: EncodedLocation,
}

/// A recurring deviation on a share of a resident's days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub resident: String,
    pub kind: DeviationKind,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub version: u32,
    pub n_residents: usize,
    pub n_groups: usize,
    pub days: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Empty: built-in schedules.
    #[serde(default)]
    pub groups: Vec<GroupSchedule>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub behaviors: Vec<Behavior>,
    /// Leading days also emitted as raw scan logs.
    #[serde(default)]
    pub raw_days: usize,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 10, 1).expect("valid date")
}

impl CohortSpec {
    /// Noise-free cohort on the built-in schedules.
    pub fn planted(n_residents: usize, n_groups: usize, days: usize) -> Self {
        CohortSpec {
            version: SPEC_VERSION,
            n_residents,
            n_groups,
            days,
            start_date: default_start(),
            groups: Vec::new(),
            noise: NoiseModel::default(),
            injections: Vec::new(),
            behaviors: Vec::new(),
            raw_days: 0,
        }
    }

    pub fn resident_id(i: usize) -> String {
        format!("R{i:03}")
    }

    pub fn resident_ids(&self) -> Vec<String> {
        (0..self.n_residents).map(Self::resident_id).collect()
    }

    /// Balanced contiguous blocks of residents per group.
    pub fn group_of(&self, resident_index: usize) -> usize {
        resident_index * self.n_groups / self.n_residents
    }

    pub fn schedules(&self) -> Vec<GroupSchedule> {
        if self.groups.is_empty() {
            default_groups(self.n_groups)
        } else {
            self.groups.clone()
        }
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start_date).num_days();
        (d >= 0 && (d as usize) < self.days).then_some(d as usize)
    }
}

/// Ground-truth plan line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanRecord {
    Membership {
        resident: String,
        group: usize,
        origin_room: u32,
        origin: EncodedLocation,
    },
    Injection(Injection),
}

pub fn write_plan<W: Write>(mut writer: W, plan: &[PlanRecord]) -> Result<()> {
    for r in plan {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_plan<R: BufRead>(reader: R, path: &str) -> Result<Vec<PlanRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Planted group of every resident.
pub fn planted_groups(plan: &[PlanRecord]) -> BTreeMap<String, usize> {
    plan.iter()
        .filter_map(|r| match r {
            PlanRecord::Membership { resident, group, .. } => Some((resident.clone(), *group)),
            _ => None,
        })
        .collect()
}

/// Every injected `(resident, date, slot)`.
pub fn injected_slots(plan: &[PlanRecord]) -> BTreeSet<(String, NaiveDate, usize)> {
    let mut out = BTreeSet::new();
    for r in plan {
        if let PlanRecord::Injection(inj) = r {
            for s in inj.start_slot..=inj.end_slot {
                out.insert((inj.resident.clone(), inj.date, s));
            }
        }
    }
    out
}

/// Residents carrying each injected deviation kind.
pub fn planted_kinds(plan: &[PlanRecord]) -> BTreeMap<String, BTreeSet<DeviationKind>> {
    let mut out: BTreeMap<String, BTreeSet<DeviationKind>> = BTreeMap::new();
    for r in plan {
        if let PlanRecord::Injection(inj) = r {
            out.entry(inj.resident.clone()).or_default().insert(inj.kind);
        }
    }
    out
}

/// Slot range and location of a deviation kind for a group schedule.
pub fn kind_range(kind: DeviationKind, s: &GroupSchedule) -> (usize, usize, EncodedLocation) {
    match kind {
        DeviationKind::Sleep => (
            s.return_slot,
            s.return_slot + SLEEP_SLOTS - 1,
            EncodedLocation::public_on_level(s.level as i8).expect("validated level"),
        ),
        DeviationKind::Awake => (s.wake, s.wake + AWAKE_SLOTS - 1, s.origin()),
        DeviationKind::PrivateVisit => (
            s.wake + VISIT_OFFSET,
            s.wake + VISIT_OFFSET + VISIT_SLOTS - 1,
            EncodedLocation::private_on_level(s.level).expect("validated level"),
        ),
    }
}

/// A generated cohort.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub seed: u64,
    /// Ordered by resident, then date.
    pub days: Vec<DayTrajectory>,
    pub plan: Vec<PlanRecord>,
    pub warnings: Vec<String>,
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::CohortSpec(msg.into())
}

fn validate_schedule(g: usize, s: &GroupSchedule) -> Result<()> {
    if s.level != 2 && s.level != 3 {
        return Err(spec_err(format!("group {g}: level must be 2 or 3")));
    }
    if s.wake < EDGE_SLOTS || s.wake >= s.return_slot || s.return_slot + SLEEP_SLOTS > SLOTS_PER_DAY {
        return Err(spec_err(format!(
            "group {g}: need {EDGE_SLOTS} <= wake < return <= {}",
            SLOTS_PER_DAY - SLEEP_SLOTS
        )));
    }
    if s.return_slot - s.wake < VISIT_OFFSET + VISIT_SLOTS + EDGE_SLOTS {
        return Err(spec_err(format!("group {g}: active window too short")));
    }
    let bad_loc = |l: EncodedLocation| l.is_missing() || l.is_residential();
    if bad_loc(s.default_location) {
        return Err(spec_err(format!(
            "group {g}: default location must be public or restricted"
        )));
    }
    for b in s.blocks.iter().chain(s.day_variants.iter().flatten()) {
        if b.start >= b.end || b.start < s.wake || b.end > s.return_slot || bad_loc(b.location) {
            return Err(spec_err(format!(
                "group {g}: block {}..{} must lie in the active window with a public or restricted location",
                b.start, b.end
            )));
        }
    }
    let variants = s.day_variants.len().max(1);
    for v in 0..variants {
        let plan = s.day_plan(v);
        if smooth_slots(&plan, DEFAULT_MIN_STAY_SLOTS) != plan {
            return Err(spec_err(format!(
                "group {g}: day plan {v} has stays shorter than the smoothing window"
            )));
        }
    }
    Ok(())
}

fn validate(spec: &CohortSpec, schedules: &[GroupSchedule]) -> Result<()> {
    if spec.version != SPEC_VERSION {
        return Err(spec_err(format!("unsupported version {}", spec.version)));
    }
    if spec.n_residents == 0 || spec.days == 0 || spec.n_groups == 0 || spec.n_groups > spec.n_residents {
        return Err(spec_err("need n_residents >= n_groups >= 1 and days >= 1"));
    }
    if schedules.len() != spec.n_groups {
        return Err(spec_err(format!(
            "{} group schedules for {} groups",
            schedules.len(),
            spec.n_groups
        )));
    }
    for (g, s) in schedules.iter().enumerate() {
        validate_schedule(g, s)?;
    }
    let n = &spec.noise;
    let rate = |r: f64| r.is_finite() && (0.0..=1.0).contains(&r);
    if !rate(n.flip_rate) || !rate(n.missing_rate) || n.flip_rate + n.missing_rate > 1.0 {
        return Err(spec_err("noise rates must lie in [0, 1] and sum to at most 1"));
    }
    if n.rssi_jitter_db >= 12 {
        return Err(spec_err("rssi jitter must stay below 12 dB"));
    }
    if spec.raw_days > spec.days {
        return Err(spec_err("raw_days exceeds days"));
    }
    Ok(())
}

fn resident_index(spec: &CohortSpec, id: &str) -> Result<usize> {
    id.strip_prefix('R')
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|i| *i < spec.n_residents && CohortSpec::resident_id(*i) == id)
        .ok_or_else(|| spec_err(format!("unknown resident {id}")))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Explicit injections plus expanded behaviors, sorted.
fn expand_injections(spec: &CohortSpec, schedules: &[GroupSchedule], seed: u64) -> Result<Vec<Injection>> {
    let mut rng = rng_for(seed, 1);
    let mut out = spec.injections.clone();
    for b in &spec.behaviors {
        if !(b.frequency.is_finite() && (0.0..=1.0).contains(&b.frequency)) {
            return Err(spec_err(format!("behavior frequency {} outside [0, 1]", b.frequency)));
        }
        let idx = resident_index(spec, &b.resident)?;
        let s = &schedules[spec.group_of(idx)];
        let (start, end, loc) = kind_range(b.kind, s);
        let mut days: Vec<usize> = (0..spec.days).collect();
        days.shuffle(&mut rng);
        let count = (b.frequency * spec.days as f64).round() as usize;
        let mut chosen = days[..count].to_vec();
        chosen.sort_unstable();
        out.extend(chosen.into_iter().map(|d| Injection {
            resident: b.resident.clone(),
            date: spec.date(d),
            kind: b.kind,
            start_slot: start,
            end_slot: end,
            location: loc,
        }));
    }
    out.sort();
    Ok(out)
}

pub fn generate(spec: &CohortSpec, seed: u64) -> Result<Cohort> {
    let schedules = spec.schedules();
    validate(spec, &schedules)?;
    let injections = expand_injections(spec, &schedules, seed)?;
    let mut warnings = Vec::new();

    let ids = spec.resident_ids();
    // planned days, resident-major
    let mut grid: Vec<Vec<Vec<EncodedLocation>>> = (0..spec.n_residents)
        .map(|i| {
            let s = &schedules[spec.group_of(i)];
            (0..spec.days).map(|d| s.day_plan(d)).collect()
        })
        .collect();
    let mut injected = vec![vec![vec![false; SLOTS_PER_DAY]; spec.days]; spec.n_residents];

    for inj in &injections {
        let i = resident_index(spec, &inj.resident)?;
        let d = spec.day_index(inj.date).ok_or_else(|| {
            spec_err(format!(
                "injection for {} on {} is outside the cohort days",
                inj.resident, inj.date
            ))
        })?;
        if inj.start_slot > inj.end_slot || inj.end_slot >= SLOTS_PER_DAY {
            return Err(spec_err(format!(
                "injection slots {}..={} outside the day",
                inj.start_slot, inj.end_slot
            )));
        }
        if inj.location.is_missing() {
            return Err(spec_err("injection location cannot be Missing"));
        }
        for q in inj.start_slot..=inj.end_slot {
            if injected[i][d][q] {
                return Err(spec_err(format!(
                    "overlapping injections for {} on {}",
                    inj.resident, inj.date
                )));
            }
            if grid[i][d][q] == inj.location {
                return Err(spec_err(format!(
                    "injection for {} on {} equals the planned location at slot {q}",
                    inj.resident, inj.date
                )));
            }
            grid[i][d][q] = inj.location;
            injected[i][d][q] = true;
        }
        if smooth_slots(&grid[i][d], DEFAULT_MIN_STAY_SLOTS) != grid[i][d] {
            return Err(spec_err(format!(
                "injection for {} on {} would be altered by smoothing",
                inj.resident, inj.date
            )));
        }
    }

    // injections that could move a mode
    for (id, days) in ids.iter().zip(&injected) {
        let worst = (0..SLOTS_PER_DAY)
            .map(|q| days.iter().filter(|d| d[q]).count())
            .max()
            .unwrap_or(0);
        if worst > 0 && 2 * worst >= spec.days {
            warnings.push(format!("{id}: a slot is injected on {worst} of {} days", spec.days));
        }
    }
    for (g, schedule) in schedules.iter().enumerate() {
        let members: Vec<usize> = (0..spec.n_residents).filter(|i| spec.group_of(*i) == g).collect();
        if members.len() < 3 && !schedule.day_variants.is_empty() {
            warnings.push(format!("group {g}: day variants with fewer than 3 members"));
        }
        let crowded = (0..spec.days).find_map(|d| {
            let c = (0..SLOTS_PER_DAY)
                .map(|q| members.iter().filter(|i| injected[**i][d][q]).count())
                .max()
                .unwrap_or(0);
            (c > 0 && 2 * c >= members.len()).then_some((d, c))
        });
        if let Some((d, c)) = crowded {
            warnings.push(format!(
                "group {g}: {c} of {} members injected on {}",
                members.len(),
                spec.date(d)
            ));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }

    let noise = spec.noise;
    if noise.flip_rate > 0.0 || noise.missing_rate > 0.0 {
        let mut rng = rng_for(seed, 2);
        for i in 0..spec.n_residents {
            for d in 0..spec.days {
                for q in 0..SLOTS_PER_DAY {
                    let r: f64 = rng.gen();
                    if injected[i][d][q] {
                        continue;
                    }
                    if r < noise.missing_rate {
                        grid[i][d][q] = EncodedLocation::Missing;
                    } else if r < noise.missing_rate + noise.flip_rate {
                        let cur = grid[i][d][q];
                        let others: Vec<EncodedLocation> = EncodedLocation::OBSERVABLE
                            .iter()
                            .copied()
                            .filter(|l| *l != cur)
                            .collect();
                        grid[i][d][q] = *others.choose(&mut rng).expect("seven others");
                    }
                }
            }
        }
    }

    let mut days = Vec::with_capacity(spec.n_residents * spec.days);
    let mut plan = Vec::new();
    for (i, rows) in grid.into_iter().enumerate() {
        let g = spec.group_of(i);
        plan.push(PlanRecord::Membership {
            resident: ids[i].clone(),
            group: g,
            origin_room: resident_room(i).0,
            origin: schedules[g].origin(),
        });
        for (d, slots) in rows.into_iter().enumerate() {
            days.push(DayTrajectory::new(ids[i].clone(), spec.date(d), slots)?);
        }
    }
    plan.extend(injections.into_iter().map(PlanRecord::Injection));
    Ok(Cohort {
        spec: spec.clone(),
        seed,
        days,
        plan,
        warnings,
    })
}

/// Sleeping room of resident `i`.
pub fn resident_room(i: usize) -> RoomId {
    RoomId(100 + i as u32)
}

const B1_ROOM: RoomId = RoomId(1);
const L2_ROOM: RoomId = RoomId(2);
const L3_ROOM: RoomId = RoomId(3);
const RESTRICTED_ROOM: RoomId = RoomId(4);
/// Unassigned bedrooms used for visits.
const SPARE_L2_ROOM: RoomId = RoomId(90);
const SPARE_L3_ROOM: RoomId = RoomId(91);

const TRUE_RSSI: i32 = -50;
const NEIGHBOR_RSSI: i32 = -62;
const FAR_RSSI: i32 = -80;

pub fn receiver_id(room: RoomId) -> String {
    format!("rx-{}", room.0)
}

pub fn tag_id(resident: &str) -> String {
    format!("tag-{resident}")
}

/// Raw-mode artifacts.
#[derive(Debug, Clone)]
pub struct RawLog {
    pub map: ReceiverMap,
    pub registry: Registry,
    pub scans: Vec<ScanRecord>,
}

fn building(cohort: &Cohort) -> Result<ReceiverMap> {
    use EncodedLocation::*;
    let schedules = cohort.spec.schedules();
    let mut map = ReceiverMap::new();
    let mut add = |room: RoomId, category, level| {
        map.insert(
            receiver_id(room),
            Room {
                room_id: room,
                category,
                level,
            },
        )
    };
    add(B1_ROOM, PublicB1, -1)?;
    add(L2_ROOM, PublicL2, 2)?;
    add(L3_ROOM, PublicL3, 3)?;
    add(RESTRICTED_ROOM, Restricted, 2)?;
    add(SPARE_L2_ROOM, PrivateL2, 2)?;
    add(SPARE_L3_ROOM, PrivateL3, 3)?;
    for i in 0..cohort.spec.n_residents {
        let level = schedules[cohort.spec.group_of(i)].level;
        add(
            resident_room(i),
            EncodedLocation::private_on_level(level).expect("validated level"),
            level as i8,
        )?;
    }
    Ok(map)
}

fn room_for(loc: EncodedLocation, own: RoomId) -> Option<RoomId> {
    use EncodedLocation::*;
    match loc {
        OriginL2 | OriginL3 => Some(own),
        PrivateL2 => Some(SPARE_L2_ROOM),
        PrivateL3 => Some(SPARE_L3_ROOM),
        PublicB1 => Some(B1_ROOM),
        PublicL2 => Some(L2_ROOM),
        PublicL3 => Some(L3_ROOM),
        Restricted => Some(RESTRICTED_ROOM),
        Missing => None,
    }
}

/// Scan logs for the first `raw_days` days, in timestamp order. Each cycle
/// hears the true room in every sub-window, a neighbouring room more weakly
/// in two of them and a far receiver below the RSSI cut-off.
pub fn raw_scans(cohort: &Cohort) -> Result<RawLog> {
    let map = building(cohort)?;
    let mut registry = Registry::new();
    let ids = cohort.spec.resident_ids();
    for id in &ids {
        registry.insert(tag_id(id), id.clone())?;
    }
    let jitter = cohort.spec.noise.rssi_jitter_db as i32;
    let mut rng = rng_for(cohort.seed, 3);
    let cycles_per_slot = SLOT_SECONDS as i64 / CYCLE_SECONDS;
    let mut scans = Vec::new();
    for day in cohort.days.iter().filter(|d| {
        cohort
            .spec
            .day_index(d.date())
            .is_some_and(|i| i < cohort.spec.raw_days)
    }) {
        let i = resident_index(&cohort.spec, day.resident_id())?;
        let own = resident_room(i);
        let tag = tag_id(day.resident_id());
        let midnight = Utc.from_utc_datetime(&day.date().and_hms_opt(0, 0, 0).expect("midnight"));
        for (q, loc) in day.slots().iter().enumerate() {
            let Some(room) = room_for(*loc, own) else { continue };
            let neighbor = if room == B1_ROOM { L2_ROOM } else { B1_ROOM };
            let far = if room == RESTRICTED_ROOM {
                L3_ROOM
            } else {
                RESTRICTED_ROOM
            };
            for k in 0..cycles_per_slot {
                let cycle0 = midnight + Duration::seconds(q as i64 * SLOT_SECONDS as i64 + k * CYCLE_SECONDS);
                for w in 0..SUB_WINDOWS as i64 {
                    let ts = cycle0 + Duration::seconds(w * SUB_WINDOW_SECONDS + 1);
                    let rssi = TRUE_RSSI + if jitter > 0 { rng.gen_range(-jitter..=jitter) } else { 0 };
                    scans.push(ScanRecord::new(ts, receiver_id(room), tag.clone(), rssi)?);
                    if w == 2 || w == 4 {
                        scans.push(ScanRecord::new(ts, receiver_id(neighbor), tag.clone(), NEIGHBOR_RSSI)?);
                    }
                }
                scans.push(ScanRecord::new(
                    cycle0 + Duration::seconds(7),
                    receiver_id(far),
                    tag.clone(),
                    FAR_RSSI,
                )?);
            }
        }
    }
    scans.sort_by(|a, b| (a.ts, &a.tag_id, &a.receiver_id).cmp(&(b.ts, &b.tag_id, &b.receiver_id)));
    Ok(RawLog { map, registry, scans })
}
