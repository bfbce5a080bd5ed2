//! BLE scan ingestion and strongest-RSSI room voting.
//!
//! Scans are bucketed into epoch-aligned 15 second detection cycles, each
//! split into five 3 second sub-windows. Inside a sub-window a tag's
//! candidate room is the room of its strongest record; the cycle location is
//! the modal candidate. Residents with no vote in a cycle keep their last
//! known location.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncodedLocation;

pub const CYCLE_SECONDS: i64 = 15;
pub const SUB_WINDOWS: usize = 5;
pub const SUB_WINDOW_SECONDS: i64 = 3;
/// Weak-signal cut-off; records below it are dropped before voting.
pub const DEFAULT_RSSI_THRESHOLD_DBM: i32 = -70;

const CYCLE_MS: i64 = CYCLE_SECONDS * 1000;
const SUB_WINDOW_MS: i64 = SUB_WINDOW_SECONDS * 1000;

/// One received advertisement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub ts: DateTime<Utc>,
    #[serde(rename = "rx")]
    pub receiver_id: String,
    #[serde(rename = "tag")]
    pub tag_id: String,
    pub rssi: i32,
}

impl ScanRecord {
    pub fn new(
        ts: DateTime<Utc>,
        receiver_id: impl Into<String>,
        tag_id: impl Into<String>,
        rssi: i32,
    ) -> Result<Self> {
        check_rssi(rssi)?;
        Ok(ScanRecord {
            ts,
            receiver_id: receiver_id.into(),
            tag_id: tag_id.into(),
            rssi,
        })
    }

    /// Epoch-aligned detection cycle this record falls into.
    pub fn cycle(&self) -> i64 {
        cycle_of(self.ts)
    }

    /// Sub-window (0..5) inside the cycle. A record exactly on a boundary
    /// belongs to the later sub-window.
    pub fn sub_window(&self) -> usize {
        (self.ts.timestamp_millis().rem_euclid(CYCLE_MS) / SUB_WINDOW_MS) as usize
    }
}

fn check_rssi(rssi: i32) -> Result<()> {
    if (-120..=0).contains(&rssi) {
        Ok(())
    } else {
        Err(Error::RssiOutOfRange(rssi))
    }
}

pub fn cycle_of(ts: DateTime<Utc>) -> i64 {
    ts.timestamp_millis().div_euclid(CYCLE_MS)
}

pub fn cycle_start(cycle: i64) -> DateTime<Utc> {
    Utc.timestamp_millis_opt(cycle * CYCLE_MS)
        .single()
        .expect("cycle index within chrono range")
}

pub fn cycle_end(cycle: i64) -> DateTime<Utc> {
    cycle_start(cycle + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoomId(pub u32);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A room as described by the receiver map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub room_id: RoomId,
    pub category: EncodedLocation,
    pub level: i8,
}

/// Receiver id to room. Authoritative: scans from unmapped receivers are errors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReceiverMap {
    receivers: BTreeMap<String, Room>,
    rooms: BTreeMap<RoomId, Room>,
}

impl ReceiverMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, receiver_id: impl Into<String>, room: Room) -> Result<()> {
        let receiver_id = receiver_id.into();
        if room.category.is_missing() {
            return Err(Error::ReceiverMap(format!(
                "receiver {receiver_id}: category Missing is not a room"
            )));
        }
        if let Some(existing) = self.rooms.get(&room.room_id) {
            let same_kind = existing.level == room.level
                && (existing.category == room.category
                    || existing.category.residential_level() == room.category.residential_level()
                        && existing.category.is_residential()
                        && room.category.is_residential());
            if !same_kind {
                return Err(Error::ReceiverMap(format!(
                    "room {} described inconsistently by receiver {receiver_id}",
                    room.room_id
                )));
            }
        }
        if self.receivers.contains_key(&receiver_id) {
            return Err(Error::ReceiverMap(format!("receiver {receiver_id} mapped twice")));
        }
        self.rooms.entry(room.room_id).or_insert(room);
        self.receivers.insert(receiver_id, room);
        Ok(())
    }

    pub fn room_of(&self, receiver_id: &str) -> Option<&Room> {
        self.receivers.get(receiver_id)
    }

    pub fn room(&self, room_id: RoomId) -> Option<&Room> {
        self.rooms.get(&room_id)
    }

    pub fn rooms(&self) -> impl Iterator<Item = &Room> {
        self.rooms.values()
    }

    pub fn receivers(&self) -> impl Iterator<Item = (&str, &Room)> {
        self.receivers.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.receivers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receivers.is_empty()
    }

    /// Reads `receiver_id,room_id,category_code,level`.
    pub fn read_csv<R: std::io::Read>(reader: R, path: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            receiver_id: String,
            room_id: u32,
            category_code: i64,
            level: i8,
        }
        let mut map = ReceiverMap::new();
        let mut r = csv::Reader::from_reader(reader);
        for (i, row) in r.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse {
                path: path.into(),
                line,
                message: e.to_string(),
            })?;
            let category = EncodedLocation::from_code(row.category_code).map_err(|e| Error::Parse {
                path: path.into(),
                line,
                message: e.to_string(),
            })?;
            map.insert(
                row.receiver_id,
                Room {
                    room_id: RoomId(row.room_id),
                    category,
                    level: row.level,
                },
            )?;
        }
        Ok(map)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["receiver_id", "room_id", "category_code", "level"])?;
        for (rx, room) in &self.receivers {
            w.write_record([
                rx.clone(),
                room.room_id.0.to_string(),
                room.category.code().to_string(),
                room.level.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Tag id to resident pseudonym. One tag per resident.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    tags: BTreeMap<String, String>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tag_id: impl Into<String>, resident_id: impl Into<String>) -> Result<()> {
        let tag_id = tag_id.into();
        let resident_id = resident_id.into();
        if self.tags.contains_key(&tag_id) {
            return Err(Error::Registry(format!("tag {tag_id} registered twice")));
        }
        if self.tags.values().any(|r| *r == resident_id) {
            return Err(Error::Registry(format!("resident {resident_id} already has a tag")));
        }
        self.tags.insert(tag_id, resident_id);
        Ok(())
    }

    pub fn resident_of(&self, tag_id: &str) -> Option<&str> {
        self.tags.get(tag_id).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.tags.iter().map(|(t, r)| (t.as_str(), r.as_str()))
    }

    /// Reads `tag_id,resident_id`.
    pub fn read_csv<R: std::io::Read>(reader: R, path: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            tag_id: String,
            resident_id: String,
        }
        let mut reg = Registry::new();
        let mut r = csv::Reader::from_reader(reader);
        for (i, row) in r.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: path.into(),
                line: i + 2,
                message: e.to_string(),
            })?;
            reg.insert(row.tag_id, row.resident_id)?;
        }
        Ok(reg)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tag_id", "resident_id"])?;
        for (t, r) in &self.tags {
            w.write_record([t, r])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixSource {
    Voted,
    Fallback,
}

/// Resolved location of one resident for one detection cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationFix {
    pub resident_id: String,
    pub cycle_end: DateTime<Utc>,
    pub room_id: RoomId,
    pub location: EncodedLocation,
    pub source: FixSource,
}

impl LocationFix {
    pub fn cycle_start(&self) -> DateTime<Utc> {
        self.cycle_end - chrono::Duration::seconds(CYCLE_SECONDS)
    }
}

/// Keeps records with `rssi >= threshold_dbm`, in input order.
pub fn filter_scans(scans: &[ScanRecord], threshold_dbm: i32) -> Vec<ScanRecord> {
    scans.iter().filter(|s| s.rssi >= threshold_dbm).cloned().collect()
}

/// Outcome of one tag's vote in one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleVote {
    pub room: Room,
    /// Sub-windows that elected this room.
    pub votes: usize,
    /// Strongest record among the sub-window winners for this room.
    pub peak_rssi: i32,
}

/// Votes every tag's room for one detection cycle.
///
/// Per sub-window the candidate is the room of the strongest record (equal
/// RSSI: lowest room id). The winner is the room with the most sub-window
/// wins; ties go to the higher peak RSSI, then the lowest room id. The
/// result does not depend on record order.
pub fn vote_cycle(scans: &[ScanRecord], map: &ReceiverMap) -> Result<BTreeMap<String, CycleVote>> {
    // (tag, sub-window) -> strongest (rssi, room)
    let mut best: BTreeMap<(&str, usize), (i32, Room)> = BTreeMap::new();
    for s in scans {
        let room = *map
            .room_of(&s.receiver_id)
            .ok_or_else(|| Error::UnknownReceiver(s.receiver_id.clone()))?;
        let key = (s.tag_id.as_str(), s.sub_window());
        match best.get_mut(&key) {
            Some(cur) => {
                if s.rssi > cur.0 || (s.rssi == cur.0 && room.room_id < cur.1.room_id) {
                    *cur = (s.rssi, room);
                }
            }
            None => {
                best.insert(key, (s.rssi, room));
            }
        }
    }

    let mut tallies: BTreeMap<&str, BTreeMap<RoomId, CycleVote>> = BTreeMap::new();
    for ((tag, _), (rssi, room)) in best {
        tallies
            .entry(tag)
            .or_default()
            .entry(room.room_id)
            .and_modify(|v| {
                v.votes += 1;
                v.peak_rssi = v.peak_rssi.max(rssi);
            })
            .or_insert(CycleVote {
                room,
                votes: 1,
                peak_rssi: rssi,
            });
    }

    Ok(tallies
        .into_iter()
        .filter_map(|(tag, rooms)| {
            // reversed id: the lowest id compares greatest
            rooms
                .into_values()
                .max_by(|a, b| {
                    (a.votes, a.peak_rssi, std::cmp::Reverse(a.room.room_id)).cmp(&(
                        b.votes,
                        b.peak_rssi,
                        std::cmp::Reverse(b.room.room_id),
                    ))
                })
                .map(|v| (tag.to_string(), v))
        })
        .collect())
}

/// Counters from one `localize_stream` run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: usize,
    pub unknown_tag_records: usize,
    pub unknown_tags: BTreeSet<String>,
    pub weak_records: usize,
    pub cycles: usize,
    pub voted_fixes: usize,
    pub fallback_fixes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Localization {
    pub fixes: Vec<LocationFix>,
    pub report: IngestReport,
}

/// Resolves a whole scan log into per-cycle fixes.
///
/// Every cycle between the first and last record of the log produces one fix
/// per resident seen at least once so far: the vote when there is one, the
/// last known room otherwise. Fixes are ordered by cycle, then resident id.
pub fn localize_stream(
    mut scans: Vec<ScanRecord>,
    map: &ReceiverMap,
    registry: &Registry,
    threshold_dbm: i32,
) -> Result<Localization> {
    let mut report = IngestReport {
        records: scans.len(),
        ..Default::default()
    };
    for s in &scans {
        check_rssi(s.rssi)?;
        if map.room_of(&s.receiver_id).is_none() {
            return Err(Error::UnknownReceiver(s.receiver_id.clone()));
        }
    }
    scans.retain(|s| {
        if registry.resident_of(&s.tag_id).is_some() {
            true
        } else {
            report.unknown_tag_records += 1;
            report.unknown_tags.insert(s.tag_id.clone());
            false
        }
    });
    let span = scans
        .iter()
        .map(ScanRecord::cycle)
        .fold(None, |acc: Option<(i64, i64)>, c| match acc {
            None => Some((c, c)),
            Some((lo, hi)) => Some((lo.min(c), hi.max(c))),
        });
    let before = scans.len();
    scans.retain(|s| s.rssi >= threshold_dbm);
    report.weak_records = before - scans.len();
    scans.sort_by(|a, b| (a.ts, &a.receiver_id, &a.tag_id, a.rssi).cmp(&(b.ts, &b.receiver_id, &b.tag_id, b.rssi)));

    let mut fixes = Vec::new();
    let Some((first, last)) = span else {
        return Ok(Localization { fixes, report });
    };

    let mut last_known: BTreeMap<String, Room> = BTreeMap::new();
    let mut cursor = 0;
    for cycle in first..=last {
        let start = cursor;
        while cursor < scans.len() && scans[cursor].cycle() == cycle {
            cursor += 1;
        }
        let votes = vote_cycle(&scans[start..cursor], map)?;
        let end = cycle_end(cycle);
        let mut voted: BTreeMap<&str, Room> = BTreeMap::new();
        for (tag, vote) in &votes {
            let resident = registry.resident_of(tag).expect("unknown tags removed");
            voted.insert(resident, vote.room);
        }
        for (resident, room) in &voted {
            last_known.insert(resident.to_string(), *room);
        }
        for (resident, room) in &last_known {
            let source = if voted.contains_key(resident.as_str()) {
                report.voted_fixes += 1;
                FixSource::Voted
            } else {
                report.fallback_fixes += 1;
                FixSource::Fallback
            };
            fixes.push(LocationFix {
                resident_id: resident.clone(),
                cycle_end: end,
                room_id: room.room_id,
                location: room.category,
                source,
            });
        }
        report.cycles += 1;
    }
    Ok(Localization { fixes, report })
}

/// Reads a JSON-lines scan log. Blank lines are ignored.
pub fn read_scan_log<R: BufRead>(reader: R, path: &str) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScanRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        check_rssi(rec.rssi).map_err(|e| Error::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn format_ts(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn write_scan_record<W: Write>(mut writer: W, rec: &ScanRecord) -> Result<()> {
    writeln!(
        writer,
        "{{\"ts\":\"{}\",\"rx\":{},\"tag\":{},\"rssi\":{}}}",
        format_ts(rec.ts),
        serde_json::to_string(&rec.receiver_id)?,
        serde_json::to_string(&rec.tag_id)?,
        rec.rssi
    )?;
    Ok(())
}

/// Writes `resident_id,cycle_end,room_id,location_code,source`.
pub fn write_fixes<W: Write>(writer: W, fixes: &[LocationFix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["resident_id", "cycle_end", "room_id", "location_code", "source"])?;
    for f in fixes {
        w.write_record([
            f.resident_id.clone(),
            format_ts(f.cycle_end),
            f.room_id.0.to_string(),
            f.location.code().to_string(),
            match f.source {
                FixSource::Voted => "Voted".to_string(),
                FixSource::Fallback => "Fallback".to_string(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fixes<R: std::io::Read>(reader: R, path: &str) -> Result<Vec<LocationFix>> {
    #[derive(Deserialize)]
    struct Row {
        resident_id: String,
        cycle_end: DateTime<Utc>,
        room_id: u32,
        location_code: i64,
        source: FixSource,
    }
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line: i + 2,
            message,
        };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let location = EncodedLocation::from_code(row.location_code).map_err(|e| parse_err(e.to_string()))?;
        out.push(LocationFix {
            resident_id: row.resident_id,
            cycle_end: row.cycle_end,
            room_id: RoomId(row.room_id),
            location,
            source: row.source,
        });
    }
    Ok(out)
}
