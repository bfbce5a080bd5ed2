//! Per-day deviation from the hybrid norm.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{slot_header, DayTrajectory, EncodedLocation, SpatioTemporalMatrix, SLOTS_PER_DAY};
use crate::norm::HybridNorm;

/// Outcome of comparing one slot with the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    Matched,
    /// Input was `Missing`.
    Invalid,
    Deviated(EncodedLocation),
}

impl SlotOutcome {
    pub fn deviated(self) -> Option<EncodedLocation> {
        match self {
            SlotOutcome::Deviated(loc) => Some(loc),
            _ => None,
        }
    }

    pub fn is_valid(self) -> bool {
        self != SlotOutcome::Invalid
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviationDay {
    pub resident_id: String,
    pub date: NaiveDate,
    pub slots: Vec<SlotOutcome>,
    pub deviated_count: usize,
}

impl DeviationDay {
    /// Deviated location per slot, `None` for matched and invalid slots.
    pub fn located(&self) -> Vec<Option<EncodedLocation>> {
        self.slots.iter().map(|s| s.deviated()).collect()
    }

    pub fn invalid_count(&self) -> usize {
        self.slots.iter().filter(|s| !s.is_valid()).count()
    }

    /// Maximal runs of one deviated location.
    pub fn episodes(&self) -> Vec<Episode> {
        runs(&self.slots, |s| s.deviated())
            .into_iter()
            .map(|(start, end, loc)| Episode {
                start_slot: start,
                end_slot: end,
                location_code: loc.code(),
            })
            .collect()
    }

    fn invalid_runs(&self) -> Vec<SlotRun> {
        runs(&self.slots, |s| (!s.is_valid()).then_some(()))
            .into_iter()
            .map(|(start, end, ())| SlotRun {
                start_slot: start,
                end_slot: end,
            })
            .collect()
    }
}

// inclusive (start, end, value) runs of equal `Some` values
fn runs<T: PartialEq + Copy>(slots: &[SlotOutcome], f: impl Fn(SlotOutcome) -> Option<T>) -> Vec<(usize, usize, T)> {
    let mut out: Vec<(usize, usize, T)> = Vec::new();
    for (i, s) in slots.iter().enumerate() {
        let Some(v) = f(*s) else { continue };
        match out.last_mut() {
            Some(last) if last.1 + 1 == i && last.2 == v => last.1 = i,
            _ => out.push((i, i, v)),
        }
    }
    out
}

/// Compares a day with its norm slot by slot.
pub fn filter_day(input: &DayTrajectory, norm: &HybridNorm) -> Result<DeviationDay> {
    if input.resident_id() != norm.resident_id || input.date() != norm.date {
        return Err(Error::InvalidParameter(format!(
            "norm for {} {} applied to {} {}",
            norm.resident_id,
            norm.date,
            input.resident_id(),
            input.date()
        )));
    }
    let slots: Vec<SlotOutcome> = input
        .slots()
        .iter()
        .zip(&norm.slots)
        .map(|(x, n)| {
            if x.is_missing() {
                SlotOutcome::Invalid
            } else if x == n {
                SlotOutcome::Matched
            } else {
                SlotOutcome::Deviated(*x)
            }
        })
        .collect();
    let deviated_count = slots.iter().filter(|s| s.deviated().is_some()).count();
    Ok(DeviationDay {
        resident_id: input.resident_id().to_string(),
        date: input.date(),
        slots,
        deviated_count,
    })
}

/// Filters every valid day of a resident, in date order.
pub fn deviation_history(
    matrix: &SpatioTemporalMatrix,
    norms: &BTreeMap<NaiveDate, &HybridNorm>,
    min_valid_fraction: f64,
) -> Result<Vec<DeviationDay>> {
    matrix
        .valid_days(min_valid_fraction)
        .map(|day| {
            let norm = norms.get(&day.date()).ok_or_else(|| Error::NormGap {
                resident: matrix.resident_id().to_string(),
                date: day.date(),
            })?;
            filter_day(day, norm)
        })
        .collect()
}

/// Inclusive slot range of one deviated location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub start_slot: usize,
    pub end_slot: usize,
    pub location_code: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRun {
    pub start_slot: usize,
    pub end_slot: usize,
}

/// One line of the deviations file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub resident_id: String,
    pub date: NaiveDate,
    pub episodes: Vec<Episode>,
    pub deviated_count: usize,
    /// Slots where the input was `Missing`.
    #[serde(default)]
    pub invalid_slots: Vec<SlotRun>,
}

impl From<&DeviationDay> for DeviationRecord {
    fn from(d: &DeviationDay) -> Self {
        DeviationRecord {
            resident_id: d.resident_id.clone(),
            date: d.date,
            episodes: d.episodes(),
            deviated_count: d.deviated_count,
            invalid_slots: d.invalid_runs(),
        }
    }
}

impl DeviationRecord {
    pub fn to_day(&self) -> Result<DeviationDay> {
        let mut slots = vec![SlotOutcome::Matched; SLOTS_PER_DAY];
        let check = |s: usize, e: usize| {
            if s > e || e >= SLOTS_PER_DAY {
                Err(Error::InvalidParameter(format!("slot run {s}..={e} out of range")))
            } else {
                Ok(())
            }
        };
        for r in &self.invalid_slots {
            check(r.start_slot, r.end_slot)?;
            slots[r.start_slot..=r.end_slot].fill(SlotOutcome::Invalid);
        }
        for e in &self.episodes {
            check(e.start_slot, e.end_slot)?;
            let loc = EncodedLocation::from_code(e.location_code as i64)?;
            if loc.is_missing() {
                return Err(Error::InvalidLocationCode(e.location_code as i64));
            }
            slots[e.start_slot..=e.end_slot].fill(SlotOutcome::Deviated(loc));
        }
        let deviated_count = slots.iter().filter(|s| s.deviated().is_some()).count();
        if deviated_count != self.deviated_count {
            return Err(Error::InvalidParameter(format!(
                "{} {}: deviated_count {} disagrees with episodes ({deviated_count})",
                self.resident_id, self.date, self.deviated_count
            )));
        }
        Ok(DeviationDay {
            resident_id: self.resident_id.clone(),
            date: self.date,
            slots,
            deviated_count,
        })
    }
}

pub fn write_deviations_jsonl<W: Write>(mut writer: W, days: &[DeviationDay]) -> Result<()> {
    for d in days {
        serde_json::to_writer(&mut writer, &DeviationRecord::from(d))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_deviations_jsonl<R: BufRead>(reader: R, path: &str) -> Result<Vec<DeviationDay>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_string(),
            line: i + 1,
            message,
        };
        let rec: DeviationRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        out.push(rec.to_day().map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

/// Dense mirror: `resident_id,date,slot_0..slot_287`, each cell the deviated
/// location code or empty.
pub fn write_deviations_dense<W: Write>(writer: W, days: &[DeviationDay]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["resident_id".to_string(), "date".to_string()];
    header.extend(slot_header("slot"));
    w.write_record(&header)?;
    for d in days {
        let mut row = vec![d.resident_id.clone(), d.date.format("%Y-%m-%d").to_string()];
        row.extend(
            d.slots
                .iter()
                .map(|s| s.deviated().map(|l| l.code().to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
