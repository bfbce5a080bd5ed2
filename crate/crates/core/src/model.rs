//! Shared trajectory data model.
//!
//! A resident-day is a vector of 288 five-minute slots, each holding one of
//! eight room categories or an explicit `Missing` marker. Everything
//! downstream (clustering, norms, deviations) works on this alphabet.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slots per local day.
pub const SLOTS_PER_DAY: usize = 288;
/// Width of one slot in minutes.
pub const SLOT_MINUTES: u32 = 5;
/// Width of one slot in seconds.
pub const SLOT_SECONDS: u32 = SLOT_MINUTES * 60;

/// Room category of a slot.
///
/// The integer codes are stable and persisted in every file format:
/// `OriginL2 = 0 ... Restricted = 7, Missing = 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum EncodedLocation {
    OriginL2 = 0,
    OriginL3 = 1,
    PrivateL2 = 2,
    PrivateL3 = 3,
    PublicB1 = 4,
    PublicL2 = 5,
    PublicL3 = 6,
    Restricted = 7,
    Missing = 8,
}

impl EncodedLocation {
    /// All nine values in code order.
    pub const ALL: [EncodedLocation; 9] = [
        EncodedLocation::OriginL2,
        EncodedLocation::OriginL3,
        EncodedLocation::PrivateL2,
        EncodedLocation::PrivateL3,
        EncodedLocation::PublicB1,
        EncodedLocation::PublicL2,
        EncodedLocation::PublicL3,
        EncodedLocation::Restricted,
        EncodedLocation::Missing,
    ];

    /// The eight observable categories (everything except `Missing`).
    pub const OBSERVABLE: [EncodedLocation; 8] = [
        EncodedLocation::OriginL2,
        EncodedLocation::OriginL3,
        EncodedLocation::PrivateL2,
        EncodedLocation::PrivateL3,
        EncodedLocation::PublicB1,
        EncodedLocation::PublicL2,
        EncodedLocation::PublicL3,
        EncodedLocation::Restricted,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|c| Self::ALL.get(c).copied())
            .ok_or(Error::InvalidLocationCode(code))
    }

    pub fn is_missing(self) -> bool {
        self == EncodedLocation::Missing
    }

    pub fn is_origin(self) -> bool {
        matches!(self, EncodedLocation::OriginL2 | EncodedLocation::OriginL3)
    }

    /// Origin or private: a room someone lives in.
    pub fn is_residential(self) -> bool {
        matches!(
            self,
            EncodedLocation::OriginL2
                | EncodedLocation::OriginL3
                | EncodedLocation::PrivateL2
                | EncodedLocation::PrivateL3
        )
    }

    /// Building level of residential categories (2 or 3).
    pub fn residential_level(self) -> Option<u8> {
        match self {
            EncodedLocation::OriginL2 | EncodedLocation::PrivateL2 => Some(2),
            EncodedLocation::OriginL3 | EncodedLocation::PrivateL3 => Some(3),
            _ => None,
        }
    }

    pub fn origin_on_level(level: u8) -> Option<Self> {
        match level {
            2 => Some(EncodedLocation::OriginL2),
            3 => Some(EncodedLocation::OriginL3),
            _ => None,
        }
    }

    pub fn private_on_level(level: u8) -> Option<Self> {
        match level {
            2 => Some(EncodedLocation::PrivateL2),
            3 => Some(EncodedLocation::PrivateL3),
            _ => None,
        }
    }

    /// Public area of a level (`-1` is the basement).
    pub fn public_on_level(level: i8) -> Option<Self> {
        match level {
            -1 => Some(EncodedLocation::PublicB1),
            2 => Some(EncodedLocation::PublicL2),
            3 => Some(EncodedLocation::PublicL3),
            _ => None,
        }
    }
}

impl fmt::Display for EncodedLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Index of a five-minute slot in the local day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeSlot(u16);

impl TimeSlot {
    pub fn new(index: usize) -> Result<Self> {
        if index < SLOTS_PER_DAY {
            Ok(TimeSlot(index as u16))
        } else {
            Err(Error::InvalidParameter(format!(
                "slot index {index} outside [0, {SLOTS_PER_DAY})"
            )))
        }
    }

    /// Slot containing the given local wall-clock time.
    pub fn from_hm(hour: u32, minute: u32) -> Result<Self> {
        Self::new(((hour * 60 + minute) / SLOT_MINUTES) as usize)
    }

    /// Slot containing `seconds` since local midnight.
    pub fn from_seconds_of_day(seconds: u32) -> Result<Self> {
        Self::new((seconds / SLOT_SECONDS) as usize)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Start of the slot in minutes since local midnight.
    pub fn start_minute(self) -> u32 {
        self.0 as u32 * SLOT_MINUTES
    }
}

/// One resident-day: exactly 288 slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayTrajectory {
    resident_id: String,
    date: NaiveDate,
    slots: Vec<EncodedLocation>,
}

impl DayTrajectory {
    pub fn new(resident_id: impl Into<String>, date: NaiveDate, slots: Vec<EncodedLocation>) -> Result<Self> {
        if slots.len() != SLOTS_PER_DAY {
            return Err(Error::SlotCount {
                expected: SLOTS_PER_DAY,
                actual: slots.len(),
            });
        }
        Ok(DayTrajectory {
            resident_id: resident_id.into(),
            date,
            slots,
        })
    }

    /// A day with every slot set to `location`.
    pub fn filled(resident_id: impl Into<String>, date: NaiveDate, location: EncodedLocation) -> Self {
        DayTrajectory {
            resident_id: resident_id.into(),
            date,
            slots: vec![location; SLOTS_PER_DAY],
        }
    }

    pub fn resident_id(&self) -> &str {
        &self.resident_id
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn slots(&self) -> &[EncodedLocation] {
        &self.slots
    }

    /// Copy of this day with different slot contents.
    pub fn with_slots(&self, slots: Vec<EncodedLocation>) -> Result<Self> {
        DayTrajectory::new(self.resident_id.clone(), self.date, slots)
    }

    pub fn missing_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_missing()).count()
    }

    /// Share of observed (non-`Missing`) slots, in `[0, 1]`.
    pub fn valid_fraction(&self) -> f64 {
        (SLOTS_PER_DAY - self.missing_count()) as f64 / SLOTS_PER_DAY as f64
    }
}

/// True iff the day's observed share reaches `min_valid_fraction`.
pub fn valid_day(traj: &DayTrajectory, min_valid_fraction: f64) -> bool {
    debug_assert!((0.0..=1.0).contains(&min_valid_fraction));
    traj.valid_fraction() >= min_valid_fraction
}

/// All recorded days of one resident, in strictly increasing date order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatioTemporalMatrix {
    resident_id: String,
    days: Vec<DayTrajectory>,
}

impl SpatioTemporalMatrix {
    pub fn new(resident_id: impl Into<String>, days: Vec<DayTrajectory>) -> Result<Self> {
        let resident_id = resident_id.into();
        let mut prev: Option<NaiveDate> = None;
        for day in &days {
            if day.resident_id() != resident_id {
                return Err(Error::MixedResident {
                    resident: resident_id,
                    found: day.resident_id().to_string(),
                });
            }
            if prev.is_some_and(|p| day.date() <= p) {
                return Err(Error::DateOrder {
                    resident: resident_id,
                    date: day.date(),
                });
            }
            prev = Some(day.date());
        }
        Ok(SpatioTemporalMatrix { resident_id, days })
    }

    pub fn resident_id(&self) -> &str {
        &self.resident_id
    }

    pub fn days(&self) -> &[DayTrajectory] {
        &self.days
    }

    pub fn day(&self, date: NaiveDate) -> Option<&DayTrajectory> {
        self.days
            .binary_search_by_key(&date, |d| d.date())
            .ok()
            .map(|i| &self.days[i])
    }

    pub fn valid_days(&self, min_valid_fraction: f64) -> impl Iterator<Item = &DayTrajectory> {
        self.days.iter().filter(move |d| valid_day(d, min_valid_fraction))
    }
}

/// Per-resident metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidentProfile {
    resident_id: String,
    origin: EncodedLocation,
    cluster_label: Option<usize>,
}

impl ResidentProfile {
    pub fn new(resident_id: impl Into<String>, origin: EncodedLocation, cluster_label: Option<usize>) -> Result<Self> {
        if !origin.is_origin() {
            return Err(Error::InvalidParameter(format!(
                "resident origin must be OriginL2 or OriginL3, got {origin}"
            )));
        }
        Ok(ResidentProfile {
            resident_id: resident_id.into(),
            origin,
            cluster_label,
        })
    }

    pub fn resident_id(&self) -> &str {
        &self.resident_id
    }

    pub fn origin(&self) -> EncodedLocation {
        self.origin
    }

    pub fn cluster_label(&self) -> Option<usize> {
        self.cluster_label
    }
}

/// Groups loose day rows into per-resident matrices (sorted by resident id,
/// days sorted by date). Duplicate resident-days are rejected.
pub fn group_by_resident(days: Vec<DayTrajectory>) -> Result<Vec<SpatioTemporalMatrix>> {
    let mut by_resident: BTreeMap<String, Vec<DayTrajectory>> = BTreeMap::new();
    for day in days {
        by_resident.entry(day.resident_id().to_string()).or_default().push(day);
    }
    by_resident
        .into_iter()
        .map(|(rid, mut rows)| {
            rows.sort_by_key(|d| d.date());
            SpatioTemporalMatrix::new(rid, rows)
        })
        .collect()
}

pub(crate) fn slot_header(prefix: &str) -> impl Iterator<Item = String> + '_ {
    (0..SLOTS_PER_DAY).map(move |i| format!("{prefix}_{i}"))
}

/// Writes the trajectory CSV (`resident_id,date,slot_0,...,slot_287`).
pub fn write_trajectories<W: Write>(writer: W, days: &[DayTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["resident_id".to_string(), "date".to_string()];
    header.extend(slot_header("slot"));
    w.write_record(&header)?;
    for day in days {
        let mut row = Vec::with_capacity(SLOTS_PER_DAY + 2);
        row.push(day.resident_id().to_string());
        row.push(day.date().format("%Y-%m-%d").to_string());
        row.extend(day.slots().iter().map(|s| s.code().to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn parse_date(field: &str, path: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        path: path.to_string(),
        line,
        message: format!("bad date {field:?}: {e}"),
    })
}

pub(crate) fn parse_code(field: &str, path: &str, line: usize) -> Result<EncodedLocation> {
    let code: i64 = field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        message: format!("bad location code {field:?}"),
    })?;
    EncodedLocation::from_code(code).map_err(|e| Error::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    })
}

/// Reads the trajectory CSV. `path` is only used in error messages.
pub fn read_trajectories<R: Read>(reader: R, path: &str) -> Result<Vec<DayTrajectory>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() != SLOTS_PER_DAY + 2 || header.get(0) != Some("resident_id") || header.get(1) != Some("date") {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            message: "expected header resident_id,date,slot_0..slot_287".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != SLOTS_PER_DAY + 2 {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: format!("expected {} fields, got {}", SLOTS_PER_DAY + 2, rec.len()),
            });
        }
        let date = parse_date(&rec[1], path, line)?;
        let slots = (2..rec.len())
            .map(|j| parse_code(&rec[j], path, line))
            .collect::<Result<Vec<_>>>()?;
        out.push(DayTrajectory::new(rec[0].to_string(), date, slots)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 10, d).unwrap()
    }

    #[test]
    fn codes_round_trip() {
        for (i, loc) in EncodedLocation::ALL.iter().enumerate() {
            assert_eq!(loc.code() as usize, i);
            assert_eq!(EncodedLocation::from_code(i as i64).unwrap(), *loc);
        }
        assert!(EncodedLocation::from_code(9).is_err());
        assert!(EncodedLocation::from_code(-1).is_err());
    }

    #[test]
    fn day_length_is_enforced() {
        assert!(DayTrajectory::new("r", date(1), vec![EncodedLocation::Missing; 287]).is_err());
        assert!(DayTrajectory::new("r", date(1), vec![EncodedLocation::Missing; 289]).is_err());
        assert!(DayTrajectory::new("r", date(1), vec![EncodedLocation::Missing; 288]).is_ok());
    }

    #[test]
    fn valid_day_thresholds() {
        let all_missing = DayTrajectory::filled("r", date(1), EncodedLocation::Missing);
        assert!(!valid_day(&all_missing, 0.5));
        let full = DayTrajectory::filled("r", date(1), EncodedLocation::PublicL2);
        assert!(valid_day(&full, 1.0));

        let mut slots = vec![EncodedLocation::OriginL3; SLOTS_PER_DAY];
        for s in slots.iter_mut().step_by(2) {
            *s = EncodedLocation::Missing;
        }
        let half = DayTrajectory::new("r", date(1), slots).unwrap();
        // direct count of the missing slots
        let missing = half.slots().iter().filter(|s| **s == EncodedLocation::Missing).count();
        assert_eq!(missing, 144);
        assert!(valid_day(&half, 0.5));
        assert!(!valid_day(&half, 0.51));
    }

    #[test]
    fn matrix_rejects_bad_order() {
        let a = DayTrajectory::filled("r", date(2), EncodedLocation::OriginL2);
        let b = DayTrajectory::filled("r", date(1), EncodedLocation::OriginL2);
        assert!(SpatioTemporalMatrix::new("r", vec![a.clone(), b.clone()]).is_err());
        assert!(SpatioTemporalMatrix::new("r", vec![a.clone(), a.clone()]).is_err());
        let other = DayTrajectory::filled("s", date(3), EncodedLocation::OriginL2);
        assert!(SpatioTemporalMatrix::new("r", vec![b.clone(), other]).is_err());
        let m = SpatioTemporalMatrix::new("r", vec![b, a]).unwrap();
        assert!(m.day(date(2)).is_some());
        assert!(m.day(date(3)).is_none());
    }

    #[test]
    fn profile_origin_must_be_origin() {
        assert!(ResidentProfile::new("r", EncodedLocation::PublicB1, None).is_err());
        assert!(ResidentProfile::new("r", EncodedLocation::OriginL3, Some(1)).is_ok());
    }

    #[test]
    fn time_slots() {
        assert_eq!(TimeSlot::from_hm(23, 0).unwrap().index(), 276);
        assert_eq!(TimeSlot::from_hm(6, 0).unwrap().index(), 72);
        assert_eq!(TimeSlot::from_hm(23, 59).unwrap().index(), 287);
        assert!(TimeSlot::new(288).is_err());
        assert_eq!(TimeSlot::new(3).unwrap().start_minute(), 15);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let mut slots = vec![EncodedLocation::OriginL2; SLOTS_PER_DAY];
        for (i, s) in slots.iter_mut().enumerate() {
            *s = EncodedLocation::ALL[i % 9];
        }
        let days = vec![
            DayTrajectory::new("R01", date(1), slots).unwrap(),
            DayTrajectory::filled("R02", date(2), EncodedLocation::Missing),
        ];
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &days).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("resident_id,date,slot_0,slot_1,"));
        assert!(text.lines().nth(1).unwrap().starts_with("R01,2019-10-01,0,1,2"));
        let back = read_trajectories(&buf[..], "mem").unwrap();
        assert_eq!(back, days);
    }

    #[test]
    fn trajectory_csv_rejects_bad_code() {
        let mut buf = Vec::new();
        write_trajectories(
            &mut buf,
            &[DayTrajectory::filled("R", date(1), EncodedLocation::OriginL2)],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",0,", ",9,", 1);
        let err = read_trajectories(text.as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
