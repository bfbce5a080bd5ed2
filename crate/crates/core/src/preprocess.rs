//! Fixes to day trajectories: local-day bucketing, five-minute window
//! fitting, origin relabelling and short-stay smoothing.

use std::collections::BTreeMap;

use chrono::{DateTime, FixedOffset, NaiveDate, Timelike, Utc};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::localize::{LocationFix, ReceiverMap, RoomId, CYCLE_SECONDS};
use crate::model::{DayTrajectory, EncodedLocation, SpatioTemporalMatrix, SLOTS_PER_DAY, SLOT_SECONDS};

/// Smallest run kept by [`smooth`] (10 minutes).
pub const DEFAULT_MIN_STAY_SLOTS: usize = 2;

/// 23:00 local.
pub const NIGHT_START_SLOT: usize = 276;
/// 06:00 local (exclusive).
pub const NIGHT_END_SLOT: usize = 72;

pub fn in_night_window(slot: usize) -> bool {
    !(NIGHT_END_SLOT..NIGHT_START_SLOT).contains(&slot)
}

/// Local calendar day and slot of a UTC instant.
pub fn local_slot(ts: DateTime<Utc>, offset: FixedOffset) -> (NaiveDate, usize) {
    let local = ts.with_timezone(&offset);
    let secs = local.num_seconds_from_midnight();
    (local.date_naive(), (secs / SLOT_SECONDS) as usize)
}

/// Local day and slot a fix's cycle belongs to (by cycle start).
pub fn fix_slot(fix: &LocationFix, offset: FixedOffset) -> (NaiveDate, usize) {
    local_slot(fix.cycle_start(), offset)
}

/// Fits one resident-day of fixes into 288 slots. Each slot takes the
/// category with the longest total dwell (15 s per fix); equal dwell goes to
/// the lower code. Slots without fixes are `Missing`.
pub fn build_day(
    resident_id: &str,
    date: NaiveDate,
    fixes: &[LocationFix],
    offset: FixedOffset,
) -> Result<DayTrajectory> {
    let mut dwell = vec![[0u64; 8]; SLOTS_PER_DAY];
    for fix in fixes {
        let (d, slot) = fix_slot(fix, offset);
        if d != date {
            return Err(Error::InvalidParameter(format!(
                "fix at {} is outside local day {date}",
                fix.cycle_end
            )));
        }
        if fix.location.is_missing() {
            continue;
        }
        dwell[slot][fix.location.code() as usize] += CYCLE_SECONDS as u64;
    }
    let slots = dwell
        .iter()
        .map(|per_cat| {
            let mut best: Option<(u64, usize)> = None;
            for (code, &secs) in per_cat.iter().enumerate() {
                if secs > 0 && best.is_none_or(|(b, _)| secs > b) {
                    best = Some((secs, code));
                }
            }
            best.map_or(EncodedLocation::Missing, |(_, code)| EncodedLocation::OBSERVABLE[code])
        })
        .collect();
    DayTrajectory::new(resident_id, date, slots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    start: usize,
    len: usize,
    loc: EncodedLocation,
}

fn runs(slots: &[EncodedLocation]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &loc) in slots.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.loc == loc => r.len += 1,
            _ => out.push(Run { start: i, len: 1, loc }),
        }
    }
    out
}

/// Removes short stays from a slot vector.
///
/// A maximal run of one non-`Missing` location shorter than `min_stay_slots`
/// takes the location of its longer non-`Missing` neighbour run (equal
/// length: the preceding one). Runs at the ends of the vector have only one
/// neighbour. Runs bordered only by `Missing` are left alone. Merges are
/// applied shortest-first until none apply, so the result is a fixed point.
pub fn smooth_slots(slots: &[EncodedLocation], min_stay_slots: usize) -> Vec<EncodedLocation> {
    let mut out = slots.to_vec();
    loop {
        let rs = runs(&out);
        let mut pick: Option<(usize, EncodedLocation)> = None;
        let mut pick_len = usize::MAX;
        for (i, r) in rs.iter().enumerate() {
            if r.loc.is_missing() || r.len >= min_stay_slots || r.len >= pick_len {
                continue;
            }
            let prev = i.checked_sub(1).map(|j| rs[j]).filter(|n| !n.loc.is_missing());
            let next = rs.get(i + 1).copied().filter(|n| !n.loc.is_missing());
            let target = match (prev, next) {
                (Some(p), Some(n)) => Some(if n.len > p.len { n.loc } else { p.loc }),
                (Some(p), None) => Some(p.loc),
                (None, Some(n)) => Some(n.loc),
                (None, None) => None,
            };
            if let Some(t) = target {
                pick = Some((i, t));
                pick_len = r.len;
            }
        }
        let Some((i, target)) = pick else { break };
        let r = rs[i];
        out[r.start..r.start + r.len].fill(target);
    }
    out
}

/// Short-stay smoothing of a whole day.
pub fn smooth(traj: &DayTrajectory, min_stay_slots: usize) -> DayTrajectory {
    traj.with_slots(smooth_slots(traj.slots(), min_stay_slots.max(1)))
        .expect("smoothing preserves length")
}

/// Origin category from an encoded matrix: the residential category with the
/// most night-window slots (23:00-06:00) across all days, mapped to the
/// origin code of its level. Equal counts go to the lower code.
pub fn detect_origin(matrix: &SpatioTemporalMatrix) -> Result<EncodedLocation> {
    let mut counts = [0usize; 4];
    for day in matrix.days() {
        for (slot, loc) in day.slots().iter().enumerate() {
            if in_night_window(slot) && loc.is_residential() {
                counts[loc.code() as usize] += 1;
            }
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for (code, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(b, _)| c > b) {
            best = Some((c, code));
        }
    }
    let (_, code) = best.ok_or_else(|| Error::NoOriginDetectable(matrix.resident_id().to_string()))?;
    let level = EncodedLocation::OBSERVABLE[code]
        .residential_level()
        .expect("residential code");
    Ok(EncodedLocation::origin_on_level(level).expect("levels 2 and 3"))
}

/// A resident's sleeping room.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OriginRoom {
    pub room_id: RoomId,
    pub location: EncodedLocation,
}

/// Origin room from raw fixes: the residential room with the longest
/// night-window dwell; equal dwell goes to the lower room id.
pub fn detect_origin_room(
    resident_id: &str,
    fixes: &[LocationFix],
    map: &ReceiverMap,
    offset: FixedOffset,
) -> Result<OriginRoom> {
    let mut dwell: BTreeMap<RoomId, u64> = BTreeMap::new();
    for fix in fixes {
        let (_, slot) = fix_slot(fix, offset);
        if in_night_window(slot) && fix.location.is_residential() {
            *dwell.entry(fix.room_id).or_default() += CYCLE_SECONDS as u64;
        }
    }
    let mut best: Option<(u64, RoomId)> = None;
    for (&room, &secs) in &dwell {
        if best.is_none_or(|(b, _)| secs > b) {
            best = Some((secs, room));
        }
    }
    let (_, room_id) = best.ok_or_else(|| Error::NoOriginDetectable(resident_id.to_string()))?;
    let level = map
        .room(room_id)
        .and_then(|r| r.category.residential_level())
        .or_else(|| {
            fixes
                .iter()
                .find(|f| f.room_id == room_id)
                .and_then(|f| f.location.residential_level())
        })
        .expect("origin room is residential");
    Ok(OriginRoom {
        room_id,
        location: EncodedLocation::origin_on_level(level).expect("levels 2 and 3"),
    })
}

/// Rewrites residential fixes relative to the resident: the origin room
/// becomes `Origin*`, every other residential room `Private*`.
pub fn encode_relative_to_origin(fixes: &[LocationFix], origin: OriginRoom) -> Vec<LocationFix> {
    fixes
        .iter()
        .map(|f| {
            let mut f = f.clone();
            if let Some(level) = f.location.residential_level() {
                f.location = if f.room_id == origin.room_id {
                    EncodedLocation::origin_on_level(level)
                } else {
                    EncodedLocation::private_on_level(level)
                }
                .expect("levels 2 and 3");
            }
            f
        })
        .collect()
}

/// Cleaned trajectories of one resident.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidentTrajectories {
    pub origin: OriginRoom,
    pub matrix: SpatioTemporalMatrix,
}

/// Runs the full fix-to-trajectory chain for one resident.
pub fn preprocess_resident(
    resident_id: &str,
    fixes: &[LocationFix],
    map: &ReceiverMap,
    offset: FixedOffset,
    min_stay_slots: usize,
) -> Result<ResidentTrajectories> {
    let origin = detect_origin_room(resident_id, fixes, map, offset)?;
    let encoded = encode_relative_to_origin(fixes, origin);
    let mut by_day: BTreeMap<NaiveDate, Vec<LocationFix>> = BTreeMap::new();
    for f in encoded {
        by_day.entry(fix_slot(&f, offset).0).or_default().push(f);
    }
    let days = by_day
        .iter()
        .map(|(date, day_fixes)| build_day(resident_id, *date, day_fixes, offset).map(|d| smooth(&d, min_stay_slots)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidentTrajectories {
        origin,
        matrix: SpatioTemporalMatrix::new(resident_id, days)?,
    })
}

/// Preprocesses every resident in a fix stream, ordered by resident id.
/// Residents without a detectable origin are returned as errors alongside.
pub fn preprocess_fixes(
    fixes: &[LocationFix],
    map: &ReceiverMap,
    offset: FixedOffset,
    min_stay_slots: usize,
) -> Vec<(String, Result<ResidentTrajectories>)> {
    let mut by_resident: BTreeMap<&str, Vec<LocationFix>> = BTreeMap::new();
    for f in fixes {
        by_resident.entry(f.resident_id.as_str()).or_default().push(f.clone());
    }
    by_resident
        .into_par_iter()
        .map(|(rid, rf)| {
            (
                rid.to_string(),
                preprocess_resident(rid, &rf, map, offset, min_stay_slots),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localize::{FixSource, Room};
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;
    use EncodedLocation::*;

    fn utc() -> FixedOffset {
        FixedOffset::east_opt(0).unwrap()
    }

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 10, 10).unwrap()
    }

    fn fix(slot: usize, k: i64, room: u32, loc: EncodedLocation) -> LocationFix {
        let start = Utc.from_utc_datetime(&date().and_hms_opt(0, 0, 0).unwrap())
            + Duration::seconds(slot as i64 * 300 + k * 15);
        LocationFix {
            resident_id: "R".into(),
            cycle_end: start + Duration::seconds(15),
            room_id: RoomId(room),
            location: loc,
            source: FixSource::Voted,
        }
    }

    #[test]
    fn unanimous_and_longest_dwell() {
        let mut fixes: Vec<_> = (0..12).map(|k| fix(10, k, 5, PublicL2)).collect();
        fixes.extend((0..8).map(|k| fix(11, k, 1, OriginL3)));
        fixes.extend((8..12).map(|k| fix(11, k, 6, PublicL3)));
        let day = build_day("R", date(), &fixes, utc()).unwrap();
        assert_eq!(day.slots()[10], PublicL2);
        assert_eq!(day.slots()[11], OriginL3);
        assert_eq!(day.slots()[12], Missing);
        assert_eq!(day.missing_count(), 286);
    }

    #[test]
    fn last_cycle_of_slot_stays_in_slot() {
        let day = build_day("R", date(), &[fix(287, 19, 5, PublicL2)], utc()).unwrap();
        assert_eq!(day.slots()[287], PublicL2);
    }

    #[test]
    fn build_day_respects_offset() {
        let sgt = FixedOffset::east_opt(8 * 3600).unwrap();
        // 00:00 UTC is 08:00 local
        let f = fix(0, 0, 5, PublicL2);
        let (d, slot) = fix_slot(&f, sgt);
        assert_eq!((d, slot), (date(), 96));
        assert!(build_day("R", date().succ_opt().unwrap(), &[f], sgt).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let v = [OriginL2, OriginL2, OriginL2, PublicB1, OriginL2, OriginL2, OriginL2];
        assert_eq!(smooth_slots(&v, 2), vec![OriginL2; 7]);

        // edge singletons merge inward
        let v = [OriginL2, PublicB1, PublicB1, PublicB1, OriginL2];
        assert_eq!(smooth_slots(&v, 2), vec![PublicB1; 5]);
        assert_eq!(smooth_slots(&v, 1), v.to_vec());

        // longer neighbour wins, tie goes left
        let v = [PublicL2, PublicL2, Restricted, PublicL3, PublicL3, PublicL3];
        assert_eq!(
            smooth_slots(&v, 2),
            vec![PublicL2, PublicL2, PublicL3, PublicL3, PublicL3, PublicL3]
        );
        let v = [PublicL2, PublicL2, Restricted, PublicL3, PublicL3];
        assert_eq!(
            smooth_slots(&v, 2),
            vec![PublicL2, PublicL2, PublicL2, PublicL3, PublicL3]
        );

        // missing is neither merged nor a merge target
        let v = [Missing, PublicB1, Missing, Missing];
        assert_eq!(smooth_slots(&v, 2), v.to_vec());
        let v = [Missing, PublicB1, PublicL2, PublicL2];
        assert_eq!(smooth_slots(&v, 2), vec![Missing, PublicL2, PublicL2, PublicL2]);
    }

    #[test]
    fn smooth_fixed_point_on_clean_day() {
        let day = DayTrajectory::filled("R", date(), OriginL3);
        assert_eq!(smooth(&day, 2), day);
    }

    fn room_map() -> ReceiverMap {
        let mut m = ReceiverMap::new();
        for (rx, id, cat, lvl) in [
            ("r1", 1, PrivateL2, 2),
            ("r2", 2, PrivateL2, 2),
            ("r3", 3, PrivateL3, 3),
            ("r9", 9, PublicL2, 2),
        ] {
            m.insert(
                rx,
                Room {
                    room_id: RoomId(id),
                    category: cat,
                    level: lvl,
                },
            )
            .unwrap();
        }
        m
    }

    #[test]
    fn origin_room_detection() {
        // unanimous L3 room at night
        let fixes: Vec<_> = (0..20).map(|k| fix(280, k % 20, 3, PrivateL3)).collect();
        let o = detect_origin_room("R", &fixes, &room_map(), utc()).unwrap();
        assert_eq!(
            o,
            OriginRoom {
                room_id: RoomId(3),
                location: OriginL3
            }
        );

        // 50/50 split: lower room id wins
        let mut fixes: Vec<_> = (0..10).map(|k| fix(10, k, 2, PrivateL2)).collect();
        fixes.extend((0..10).map(|k| fix(11, k, 1, PrivateL2)));
        let o = detect_origin_room("R", &fixes, &room_map(), utc()).unwrap();
        assert_eq!(o.room_id, RoomId(1));

        // daytime residential dwell does not count
        let fixes: Vec<_> = (0..10).map(|k| fix(120, k, 1, PrivateL2)).collect();
        assert!(matches!(
            detect_origin_room("R", &fixes, &room_map(), utc()),
            Err(Error::NoOriginDetectable(_))
        ));
    }

    #[test]
    fn relative_encoding() {
        let fixes = vec![fix(0, 0, 1, PrivateL2), fix(0, 1, 2, OriginL2), fix(0, 2, 9, PublicL2)];
        let enc = encode_relative_to_origin(
            &fixes,
            OriginRoom {
                room_id: RoomId(1),
                location: OriginL2,
            },
        );
        let locs: Vec<_> = enc.iter().map(|f| f.location).collect();
        assert_eq!(locs, vec![OriginL2, PrivateL2, PublicL2]);
    }

    #[test]
    fn matrix_origin_detection() {
        let d = |day: u32, loc| DayTrajectory::filled("R", NaiveDate::from_ymd_opt(2019, 10, day).unwrap(), loc);
        // 20 nights in an L2 room, 3 missing nights
        let mut days: Vec<_> = (1..=20).map(|i| d(i, OriginL2)).collect();
        days.extend((21..=23).map(|i| d(i, Missing)));
        let m = SpatioTemporalMatrix::new("R", days).unwrap();
        // oracle: count night-window residential slots per level
        let night = (0..SLOTS_PER_DAY).filter(|s| in_night_window(*s)).count();
        assert_eq!(night, 12 + 72);
        assert_eq!(detect_origin(&m).unwrap(), OriginL2);

        let m = SpatioTemporalMatrix::new("R", vec![d(1, OriginL3), d(2, OriginL3)]).unwrap();
        assert_eq!(detect_origin(&m).unwrap(), OriginL3);

        // equal L2/L3 night dwell: lower code
        let m = SpatioTemporalMatrix::new("R", vec![d(1, OriginL3), d(2, OriginL2)]).unwrap();
        assert_eq!(detect_origin(&m).unwrap(), OriginL2);

        let m = SpatioTemporalMatrix::new("R", vec![d(1, PublicB1)]).unwrap();
        assert!(detect_origin(&m).is_err());
    }

    #[test]
    fn origin_detection_ignores_day_order() {
        let mk = |day: u32, loc| DayTrajectory::filled("R", NaiveDate::from_ymd_opt(2019, 10, day).unwrap(), loc);
        let a = SpatioTemporalMatrix::new("R", vec![mk(1, PrivateL3), mk(2, OriginL2), mk(3, OriginL2)]).unwrap();
        let b = SpatioTemporalMatrix::new("R", vec![mk(1, OriginL2), mk(2, OriginL2), mk(3, PrivateL3)]).unwrap();
        assert_eq!(detect_origin(&a).unwrap(), detect_origin(&b).unwrap());
    }

    #[test]
    fn preprocess_end_to_end() {
        let mut fixes = Vec::new();
        for slot in 0..SLOTS_PER_DAY {
            let (room, loc) = if (100..140).contains(&slot) {
                (9, PublicL2)
            } else {
                (2, PrivateL2)
            };
            for k in 0..20 {
                fixes.push(fix(slot, k, room, loc));
            }
        }
        // a one-slot blip in another resident's room
        for k in 0..20 {
            fixes[120 * 20 + k as usize] = fix(120, k, 1, PrivateL2);
        }
        let out = preprocess_resident("R", &fixes, &room_map(), utc(), 2).unwrap();
        assert_eq!(out.origin.room_id, RoomId(2));
        let day = &out.matrix.days()[0];
        assert_eq!(day.slots()[0], OriginL2);
        assert_eq!(day.slots()[120], PublicL2);
        assert!(day.slots()[100..140].iter().all(|s| *s == PublicL2));
    }

    fn loc_strategy() -> impl Strategy<Value = EncodedLocation> {
        prop::sample::select(EncodedLocation::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn smooth_is_idempotent(v in prop::collection::vec(loc_strategy(), 1..60), min in 1usize..5) {
            let once = smooth_slots(&v, min);
            prop_assert_eq!(smooth_slots(&once, min), once.clone());
            // missing positions are untouched
            for (a, b) in v.iter().zip(&once) {
                prop_assert_eq!(a.is_missing(), b.is_missing());
            }
        }

        #[test]
        fn smoothing_never_invents_locations(v in prop::collection::vec(loc_strategy(), 1..60), min in 1usize..5) {
            let out = smooth_slots(&v, min);
            for loc in &out {
                prop_assert!(v.contains(loc));
            }
        }

        #[test]
        fn restricted_only_from_restricted_fixes(codes in prop::collection::vec((0usize..SLOTS_PER_DAY, 0usize..7), 0..200)) {
            let fixes: Vec<_> = codes.iter().enumerate()
                .map(|(i, (slot, c))| fix(*slot, (i % 20) as i64, 1, EncodedLocation::OBSERVABLE[*c]))
                .collect();
            let day = build_day("R", date(), &fixes, utc()).unwrap();
            prop_assert!(!day.slots().contains(&Restricted));
        }
    }
}
