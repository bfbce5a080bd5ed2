//! Individual, group and hybrid norms.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{mode_slots, ClusterAssignment};
use crate::error::{Error, Result};
use crate::model::{
    parse_code, parse_date, slot_header, DayTrajectory, EncodedLocation, SpatioTemporalMatrix, SLOTS_PER_DAY,
};

/// Minimum excursion length for day start/end detection (30 minutes).
pub const DEFAULT_H_GAP: usize = 6;
/// Day start/end placeholder when no excursion is found.
pub const NOON_SLOT: usize = 144;
/// Members a group needs on a date before a group norm exists.
pub const MIN_GROUP_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Individual,
    Group,
}

impl Provenance {
    fn symbol(self) -> char {
        match self {
            Provenance::Individual => 'I',
            Provenance::Group => 'G',
        }
    }
}

/// How the fused group window is chosen from the day starts and ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TransitionMode {
    /// Keep the individual point when within `h_gap` of the group point or
    /// when the sign test holds; otherwise take the group point.
    #[default]
    Literal,
    /// Keep the individual point when within `h_gap`, otherwise take the
    /// earlier of the two.
    Earliest,
}

impl std::str::FromStr for TransitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Literal" | "literal" => Ok(TransitionMode::Literal),
            "Earliest" | "earliest" => Ok(TransitionMode::Earliest),
            _ => Err(Error::InvalidParameter(format!("unknown transition mode {s:?}"))),
        }
    }
}

/// Cluster norm for one date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupNorm {
    pub label: usize,
    pub date: NaiveDate,
    pub slots: Vec<EncodedLocation>,
}

/// Group norm of `label` on the date shared by `days`. Only valid rows of
/// residents carrying the label count; fewer than three gives `None`.
pub fn group_norm(
    label: usize,
    days: &[&DayTrajectory],
    assignment: &ClusterAssignment,
    min_valid_fraction: f64,
) -> Result<Option<GroupNorm>> {
    let Some(date) = days.first().map(|d| d.date()) else {
        return Ok(None);
    };
    if let Some(d) = days.iter().find(|d| d.date() != date) {
        return Err(Error::InvalidParameter(format!(
            "group norm rows must share one date ({date} vs {})",
            d.date()
        )));
    }
    let rows: Vec<&DayTrajectory> = days
        .iter()
        .copied()
        .filter(|d| assignment.labels.get(d.resident_id()) == Some(&label))
        .filter(|d| crate::model::valid_day(d, min_valid_fraction))
        .collect();
    if rows.len() < MIN_GROUP_ROWS {
        return Ok(None);
    }
    Ok(Some(GroupNorm {
        label,
        date,
        slots: mode_slots(&rows, None),
    }))
}

/// First slot before noon opening a run of `h_gap` observed non-origin
/// slots, and the last end (exclusive) after noon closing one. Both default
/// to noon.
pub fn day_start_end(slots: &[EncodedLocation], origin: EncodedLocation, h_gap: usize) -> (usize, usize) {
    let h = h_gap.max(1);
    let away = |t: usize| slots[t] != origin && !slots[t].is_missing();
    let n = slots.len();
    let start = (0..NOON_SLOT)
        .find(|&t| t + h <= n && (t..t + h).all(away))
        .unwrap_or(NOON_SLOT);
    let end = (NOON_SLOT + 1..=n)
        .rev()
        .find(|&e| e >= h && (e - h..e).all(away))
        .unwrap_or(NOON_SLOT);
    (start, end)
}

/// Day starts/ends of both norms and the fused window `[p5, p6)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionPoints {
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
    pub p4: usize,
    pub p5: usize,
    pub p6: usize,
}

pub fn transition_points(
    p1: usize,
    p2: usize,
    p3: usize,
    p4: usize,
    h_gap: usize,
    mode: TransitionMode,
) -> (usize, usize) {
    let near = |a: usize, b: usize| a.abs_diff(b) <= h_gap;
    match mode {
        TransitionMode::Literal => {
            let p5 = if near(p1, p2) || p1 >= p2 { p1 } else { p2 };
            let p6 = if near(p3, p4) || p3 < p4 { p4 } else { p3 };
            (p5, p6)
        }
        TransitionMode::Earliest => {
            let p5 = if near(p1, p2) { p1 } else { p1.min(p2) };
            let p6 = if near(p3, p4) { p4 } else { p3.min(p4) };
            (p5, p6)
        }
    }
}

/// Per-day norm of one resident.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridNorm {
    pub resident_id: String,
    pub date: NaiveDate,
    pub slots: Vec<EncodedLocation>,
    pub provenance: Vec<Provenance>,
    pub p5: usize,
    pub p6: usize,
    /// Present when a group norm took part.
    pub transitions: Option<TransitionPoints>,
}

impl HybridNorm {
    /// No slot came from a group norm.
    pub fn is_degenerate(&self) -> bool {
        !self.provenance.contains(&Provenance::Group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    pub min_valid_fraction: f64,
    pub h_gap: usize,
    pub mode: TransitionMode,
    /// Build each day's individual norm without that day.
    pub leave_one_out: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            min_valid_fraction: 0.5,
            h_gap: DEFAULT_H_GAP,
            mode: TransitionMode::Literal,
            leave_one_out: false,
        }
    }
}

/// Splices the group norm into the individual norm on `[p5, p6)`. Without a
/// group norm, or when `p5 >= p6`, the individual norm is returned as is.
pub fn hybrid_norm(
    resident_id: &str,
    date: NaiveDate,
    individual: &[EncodedLocation],
    group: Option<&GroupNorm>,
    origin: EncodedLocation,
    h_gap: usize,
    mode: TransitionMode,
) -> HybridNorm {
    let (p1, p4) = day_start_end(individual, origin, h_gap);
    let mut norm = HybridNorm {
        resident_id: resident_id.to_string(),
        date,
        slots: individual.to_vec(),
        provenance: vec![Provenance::Individual; individual.len()],
        p5: p1,
        p6: p4,
        transitions: None,
    };
    let Some(group) = group else { return norm };
    let (p2, p3) = day_start_end(&group.slots, origin, h_gap);
    let (p5, p6) = transition_points(p1, p2, p3, p4, h_gap, mode);
    norm.p5 = p5;
    norm.p6 = p6;
    norm.transitions = Some(TransitionPoints { p1, p2, p3, p4, p5, p6 });
    if p5 >= p6 {
        warn!("{resident_id} {date}: empty group window [{p5}, {p6}), using the individual norm");
        return norm;
    }
    norm.slots[p5..p6].copy_from_slice(&group.slots[p5..p6]);
    norm.provenance[p5..p6].fill(Provenance::Group);
    norm
}

/// Hybrid norms for every valid day of every resident, ordered by resident
/// then date. `origins` must cover every matrix.
pub fn build_norms(
    matrices: &[SpatioTemporalMatrix],
    origins: &BTreeMap<String, EncodedLocation>,
    assignment: &ClusterAssignment,
    opts: &NormOptions,
) -> Result<Vec<HybridNorm>> {
    let mut by_date: BTreeMap<NaiveDate, Vec<&DayTrajectory>> = BTreeMap::new();
    for m in matrices {
        for d in m.days() {
            by_date.entry(d.date()).or_default().push(d);
        }
    }
    let mut groups: BTreeMap<(usize, NaiveDate), GroupNorm> = BTreeMap::new();
    for label in 0..assignment.k {
        for (date, days) in &by_date {
            if let Some(g) = group_norm(label, days, assignment, opts.min_valid_fraction)? {
                groups.insert((label, *date), g);
            }
        }
    }

    let per_resident: Vec<Result<Vec<HybridNorm>>> = matrices
        .par_iter()
        .map(|m| {
            let rid = m.resident_id();
            let origin = *origins
                .get(rid)
                .ok_or_else(|| Error::NoOriginDetectable(rid.to_string()))?;
            let valid: Vec<&DayTrajectory> = m.valid_days(opts.min_valid_fraction).collect();
            if valid.is_empty() {
                return Ok(Vec::new());
            }
            let full = mode_slots(&valid, Some(origin));
            let label = assignment.labels.get(rid).copied();
            Ok(valid
                .iter()
                .map(|day| {
                    let individual = if opts.leave_one_out && valid.len() > 1 {
                        let rest: Vec<&DayTrajectory> =
                            valid.iter().copied().filter(|d| d.date() != day.date()).collect();
                        mode_slots(&rest, Some(origin))
                    } else {
                        full.clone()
                    };
                    let group = label.and_then(|l| groups.get(&(l, day.date())));
                    hybrid_norm(rid, day.date(), &individual, group, origin, opts.h_gap, opts.mode)
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per_resident {
        out.extend(r?);
    }
    out.sort_by(|a, b| (&a.resident_id, a.date).cmp(&(&b.resident_id, b.date)));
    Ok(out)
}

/// Writes `resident_id,date,slot_*,provenance_*,p5,p6`.
pub fn write_norms<W: Write>(writer: W, norms: &[HybridNorm]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["resident_id".to_string(), "date".to_string()];
    header.extend(slot_header("slot"));
    header.extend(slot_header("provenance"));
    header.push("p5".into());
    header.push("p6".into());
    w.write_record(&header)?;
    for n in norms {
        let mut row = Vec::with_capacity(2 * SLOTS_PER_DAY + 4);
        row.push(n.resident_id.clone());
        row.push(n.date.format("%Y-%m-%d").to_string());
        row.extend(n.slots.iter().map(|s| s.code().to_string()));
        row.extend(n.provenance.iter().map(|p| p.symbol().to_string()));
        row.push(n.p5.to_string());
        row.push(n.p6.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_norms<R: Read>(reader: R, path: &str) -> Result<Vec<HybridNorm>> {
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let width = 2 * SLOTS_PER_DAY + 4;
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.len() != width {
        return Err(bad(1, format!("expected {width} columns")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != width {
            return Err(bad(line, format!("expected {width} fields, got {}", rec.len())));
        }
        let date = parse_date(&rec[1], path, line)?;
        let slots = (2..2 + SLOTS_PER_DAY)
            .map(|j| parse_code(&rec[j], path, line))
            .collect::<Result<Vec<_>>>()?;
        let provenance = (2 + SLOTS_PER_DAY..2 + 2 * SLOTS_PER_DAY)
            .map(|j| match rec[j].trim() {
                "I" => Ok(Provenance::Individual),
                "G" => Ok(Provenance::Group),
                other => Err(bad(line, format!("bad provenance {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let point = |j: usize| -> Result<usize> {
            rec[j]
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|p| *p <= SLOTS_PER_DAY)
                .ok_or_else(|| bad(line, format!("bad transition point {:?}", &rec[j])))
        };
        out.push(HybridNorm {
            resident_id: rec[0].to_string(),
            date,
            slots,
            provenance,
            p5: point(width - 2)?,
            p6: point(width - 1)?,
            transitions: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use EncodedLocation::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 10, 10).unwrap()
    }

    fn sched(id: &str, f: impl Fn(usize) -> EncodedLocation) -> DayTrajectory {
        DayTrajectory::new(id, date(), (0..SLOTS_PER_DAY).map(f).collect()).unwrap()
    }

    fn assign(pairs: &[(&str, usize)]) -> ClusterAssignment {
        ClusterAssignment {
            k: 2,
            labels: pairs.iter().map(|(r, l)| (r.to_string(), *l)).collect(),
            degenerate: false,
        }
    }

    #[test]
    fn group_gate_needs_three_rows() {
        let a = sched("a", |_| PublicL2);
        let b = sched("b", |_| PublicL2);
        let c = sched("c", |_| PublicL3);
        let asg = assign(&[("a", 0), ("b", 0), ("c", 1)]);
        assert_eq!(group_norm(0, &[&a, &b, &c], &asg, 0.5).unwrap(), None);

        let rows: Vec<_> = (0..5)
            .map(|i| sched(&format!("m{i}"), |q| if q < 100 { OriginL2 } else { PublicB1 }))
            .collect();
        let refs: Vec<_> = rows.iter().collect();
        let asg = assign(&[("m0", 1), ("m1", 1), ("m2", 1), ("m3", 1), ("m4", 1)]);
        let g = group_norm(1, &refs, &asg, 0.5).unwrap().unwrap();
        assert_eq!(g.slots, rows[0].slots());

        let x = sched("x", |_| PublicL2);
        let y = sched("y", |_| PublicL2);
        let z = sched("z", |_| OriginL2);
        let asg = assign(&[("x", 0), ("y", 0), ("z", 0)]);
        assert!(group_norm(0, &[&x, &y, &z], &asg, 0.5)
            .unwrap()
            .unwrap()
            .slots
            .iter()
            .all(|s| *s == PublicL2));
    }

    #[test]
    fn day_start_end_examples() {
        let v: Vec<_> = (0..SLOTS_PER_DAY)
            .map(|q| if (90..144).contains(&q) { PublicL2 } else { OriginL2 })
            .collect();
        assert_eq!(day_start_end(&v, OriginL2, 3).0, 90);
        assert_eq!(day_start_end(&vec![OriginL2; SLOTS_PER_DAY], OriginL2, 3), (144, 144));
        let mut v = vec![OriginL2; SLOTS_PER_DAY];
        v[60..62].fill(PublicB1);
        v[100..200].fill(PublicB1);
        assert_eq!(day_start_end(&v, OriginL2, 3), (100, 200));
        // a run ending at midnight
        let v: Vec<_> = (0..SLOTS_PER_DAY)
            .map(|q| if q >= 200 { PublicB1 } else { OriginL2 })
            .collect();
        assert_eq!(day_start_end(&v, OriginL2, 6).1, 288);
        // missing breaks a run
        let mut v = vec![OriginL2; SLOTS_PER_DAY];
        v[80..90].fill(PublicL2);
        v[84] = Missing;
        assert_eq!(day_start_end(&v, OriginL2, 6).0, 144);
    }

    // brute truth table over both conditions
    #[test]
    fn transition_examples() {
        assert_eq!(transition_points(80, 84, 200, 200, 6, TransitionMode::Literal).0, 80);
        assert_eq!(transition_points(90, 80, 200, 200, 6, TransitionMode::Literal).0, 90);
        assert_eq!(transition_points(60, 80, 200, 200, 6, TransitionMode::Literal).0, 80);
        assert_eq!(transition_points(0, 0, 240, 260, 2, TransitionMode::Literal).1, 260);
        assert_eq!(transition_points(0, 0, 260, 240, 2, TransitionMode::Literal).1, 260);
        assert_eq!(transition_points(0, 0, 241, 240, 2, TransitionMode::Literal).1, 240);
        assert_eq!(
            transition_points(90, 80, 260, 240, 6, TransitionMode::Earliest),
            (80, 240)
        );
        assert_eq!(
            transition_points(84, 80, 244, 240, 6, TransitionMode::Earliest),
            (84, 240)
        );
    }

    #[test]
    fn splice_follows_computed_points() {
        let ind = vec![OriginL2; SLOTS_PER_DAY];
        let g = GroupNorm {
            label: 0,
            date: date(),
            slots: (0..SLOTS_PER_DAY)
                .map(|q| if (120..192).contains(&q) { PublicL2 } else { OriginL2 })
                .collect(),
        };
        let h = hybrid_norm("r", date(), &ind, Some(&g), OriginL2, 6, TransitionMode::Literal);
        let t = h.transitions.unwrap();
        assert_eq!((t.p1, t.p2, t.p3, t.p4), (144, 120, 192, 144));
        // individual start is kept by the sign test, group end is taken
        assert_eq!((h.p5, h.p6), (144, 192));
        for (q, (slot, prov)) in h.slots.iter().zip(&h.provenance).enumerate() {
            let from_group = (h.p5..h.p6).contains(&q);
            assert_eq!(*slot, if from_group { g.slots[q] } else { ind[q] });
            assert_eq!(*prov == Provenance::Group, from_group);
        }
        let e = hybrid_norm("r", date(), &ind, Some(&g), OriginL2, 6, TransitionMode::Earliest);
        assert_eq!((e.p5, e.p6), (120, 144));
    }

    fn g_morning_only() -> GroupNorm {
        GroupNorm {
            label: 0,
            date: date(),
            slots: vec![PublicB1; 100].into_iter().chain(vec![OriginL3; 188]).collect(),
        }
    }

    #[test]
    fn group_absent_and_degenerate() {
        let ind: Vec<_> = (0..SLOTS_PER_DAY)
            .map(|q| if (84..240).contains(&q) { PublicL3 } else { OriginL3 })
            .collect();
        let h = hybrid_norm("r", date(), &ind, None, OriginL3, 6, TransitionMode::Literal);
        assert_eq!(h.slots, ind);
        assert!(h.is_degenerate());
        assert_eq!((h.p5, h.p6), (84, 240));

        // group never leaves origin: p2 = p3 = 144, so p5 = p2 and p6 = p4
        let g = GroupNorm {
            label: 0,
            date: date(),
            slots: vec![OriginL3; SLOTS_PER_DAY],
        };
        let h = hybrid_norm("r", date(), &ind, Some(&g), OriginL3, 6, TransitionMode::Literal);
        assert_eq!((h.p5, h.p6), (144, 240));

        // short early and late excursions: p1 = 20, p4 = 260 against p2 = 100, p3 = 200
        let ind: Vec<_> = (0..SLOTS_PER_DAY)
            .map(|q| {
                if (20..40).contains(&q) || (250..260).contains(&q) {
                    PublicL3
                } else {
                    OriginL3
                }
            })
            .collect();
        let g = GroupNorm {
            label: 0,
            date: date(),
            slots: (0..SLOTS_PER_DAY)
                .map(|q| if (100..200).contains(&q) { PublicL3 } else { OriginL3 })
                .collect(),
        };
        let h = hybrid_norm("r", date(), &ind, Some(&g), OriginL3, 6, TransitionMode::Literal);
        assert_eq!((h.p5, h.p6), (100, 260));
        assert!(!h.is_degenerate());

        // neither norm leaves the origin: p5 = p6 = 144, individual kept
        let ind = vec![OriginL3; SLOTS_PER_DAY];
        let h = hybrid_norm(
            "r",
            date(),
            &ind,
            Some(&g_morning_only()),
            OriginL3,
            6,
            TransitionMode::Literal,
        );
        assert_eq!((h.p5, h.p6), (144, 144));
        assert!(h.is_degenerate());
        assert_eq!(h.slots, ind);
    }

    #[test]
    fn three_segments() {
        let ind: Vec<_> = (0..SLOTS_PER_DAY)
            .map(|q| if (80..230).contains(&q) { PublicL2 } else { OriginL2 })
            .collect();
        let g = GroupNorm {
            label: 0,
            date: date(),
            slots: (0..SLOTS_PER_DAY)
                .map(|q| if (82..232).contains(&q) { PublicB1 } else { OriginL2 })
                .collect(),
        };
        let h = hybrid_norm("r", date(), &ind, Some(&g), OriginL2, 6, TransitionMode::Literal);
        let mut segs: Vec<Provenance> = h.provenance.clone();
        segs.dedup();
        assert_eq!(
            segs,
            vec![Provenance::Individual, Provenance::Group, Provenance::Individual]
        );
        assert_eq!((h.p5, h.p6), (80, 230));
    }

    #[test]
    fn build_norms_per_valid_day() {
        let mk = |id: &str, day: u32, loc: EncodedLocation| {
            DayTrajectory::new(
                id,
                NaiveDate::from_ymd_opt(2019, 10, day).unwrap(),
                (0..SLOTS_PER_DAY)
                    .map(|q| if (90..200).contains(&q) { loc } else { OriginL2 })
                    .collect(),
            )
            .unwrap()
        };
        let matrices: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|id| {
                let mut days = vec![mk(id, 1, PublicL2), mk(id, 2, PublicL2)];
                days.push(DayTrajectory::filled(
                    *id,
                    NaiveDate::from_ymd_opt(2019, 10, 3).unwrap(),
                    Missing,
                ));
                SpatioTemporalMatrix::new(*id, days).unwrap()
            })
            .collect();
        let origins = ["a", "b", "c"].iter().map(|id| (id.to_string(), OriginL2)).collect();
        let asg = assign(&[("a", 0), ("b", 0), ("c", 0)]);
        let norms = build_norms(&matrices, &origins, &asg, &NormOptions::default()).unwrap();
        assert_eq!(norms.len(), 6);
        assert!(norms.iter().all(|n| (n.p5, n.p6) == (90, 200) && !n.is_degenerate()));

        let mut buf = Vec::new();
        write_norms(&mut buf, &norms).unwrap();
        let back = read_norms(&buf[..], "mem").unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back[0].slots, norms[0].slots);
        assert_eq!(back[0].provenance, norms[0].provenance);
        assert_eq!((back[0].p5, back[0].p6), (90, 200));
    }

    fn traj() -> impl Strategy<Value = Vec<EncodedLocation>> {
        prop::collection::vec(
            prop::sample::select(EncodedLocation::OBSERVABLE.to_vec()),
            SLOTS_PER_DAY,
        )
    }

    proptest! {
        #[test]
        fn provenance_is_three_segments(ind in traj(), grp in traj(), h in 1usize..12, earliest in any::<bool>()) {
            let mode = if earliest { TransitionMode::Earliest } else { TransitionMode::Literal };
            let g = GroupNorm { label: 0, date: date(), slots: grp.clone() };
            let n = hybrid_norm("r", date(), &ind, Some(&g), OriginL2, h, mode);
            for q in 0..SLOTS_PER_DAY {
                let inside = n.p5 < n.p6 && (n.p5..n.p6).contains(&q);
                prop_assert_eq!(n.provenance[q] == Provenance::Group, inside);
                prop_assert_eq!(n.slots[q], if inside { grp[q] } else { ind[q] });
            }
            prop_assert_eq!(n.is_degenerate(), n.p5 >= n.p6);
        }

        #[test]
        fn identical_norms_give_individual(ind in traj(), h in 1usize..12) {
            let g = GroupNorm { label: 0, date: date(), slots: ind.clone() };
            let n = hybrid_norm("r", date(), &ind, Some(&g), OriginL3, h, TransitionMode::Literal);
            prop_assert_eq!(n.slots, ind);
        }

        #[test]
        fn group_norm_ignores_member_order(rows in prop::collection::vec(traj(), 3..7), seed in any::<u64>()) {
            let days: Vec<_> = rows.iter().enumerate().map(|(i, s)| DayTrajectory::new(format!("m{i}"), date(), s.clone()).unwrap()).collect();
            let asg = ClusterAssignment { k: 1, labels: (0..rows.len()).map(|i| (format!("m{i}"), 0)).collect(), degenerate: false };
            let mut refs: Vec<_> = days.iter().collect();
            let a = group_norm(0, &refs, &asg, 0.5).unwrap();
            refs.rotate_left((seed % rows.len() as u64) as usize);
            refs.reverse();
            prop_assert_eq!(a, group_norm(0, &refs, &asg, 0.5).unwrap());
        }
    }
}
