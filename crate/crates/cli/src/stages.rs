//! One function per pipeline stage. Stages talk to each other only through
//! the files they write.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{FixedOffset, NaiveDate};
use hybridnorm::classify::{
    build_profile, cohort_report, label_cohort, CohortReport, DeviationProfile, Label, ThresholdTable,
};
use hybridnorm::cluster::{aggregate, select_k, ClusterAssignment, ClusterOptions, SpectralModel, WeightVector};
use hybridnorm::deviation::{
    deviation_history, read_deviations_jsonl, write_deviations_dense, write_deviations_jsonl, DeviationDay,
};
use hybridnorm::localize::{
    localize_stream, read_fixes, read_scan_log, write_fixes, write_scan_record, ReceiverMap, Registry,
};
use hybridnorm::model::{group_by_resident, read_trajectories, write_trajectories};
use hybridnorm::norm::{build_norms, read_norms, write_norms, HybridNorm, NormOptions};
use hybridnorm::preprocess::{detect_origin, preprocess_fixes, smooth};
use hybridnorm::synth::{generate, raw_scans, write_plan, CohortSpec};
use hybridnorm::{DayTrajectory, EncodedLocation, SpatioTemporalMatrix};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::{Config, Failure};

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const PLAN: &str = "plan.jsonl";
pub const SCANS: &str = "scans.jsonl";
pub const RECEIVERS: &str = "receivers.csv";
pub const REGISTRY: &str = "registry.csv";
pub const FIXES: &str = "fixes.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const PREPROCESS_REPORT: &str = "preprocess_report.json";
pub const CLUSTERS: &str = "clusters.json";
pub const SSD_CURVE: &str = "ssd_curve.csv";
pub const NORMS: &str = "norms.csv";
pub const DEVIATIONS: &str = "deviations.jsonl";
pub const DEVIATIONS_DENSE: &str = "deviations_dense.csv";
pub const CLASSIFICATION: &str = "classification.json";
pub const PERIOD_PROBABILITIES: &str = "period_probabilities.csv";
pub const REPORT: &str = "report.json";
pub const LABEL_DISTRIBUTION: &str = "label_distribution.csv";
pub const LABEL_COUNTS: &str = "label_counts.csv";

fn open(stage: &'static str, path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::validation(stage, format!("{}: {e}", path.display())))
}

fn create(stage: &'static str, dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::runtime(stage, format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(stage, format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(stage: &'static str, dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut w = create(stage, dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::runtime(stage, e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Failure::runtime(stage, e.to_string()))
}

fn read_json<T: for<'de> Deserialize<'de>>(stage: &'static str, path: &Path) -> Result<T, Failure> {
    serde_json::from_reader(open(stage, path)?)
        .map_err(|e| Failure::validation(stage, format!("{}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn offset(cfg: &Config) -> FixedOffset {
    FixedOffset::east_opt(cfg.utc_offset_minutes * 60).expect("validated offset")
}

fn load_matrices(stage: &'static str, path: &Path) -> Result<Vec<SpatioTemporalMatrix>, Failure> {
    let days = read_trajectories(open(stage, path)?, &path_str(path)).map_err(|e| Failure::core(stage, e))?;
    group_by_resident(days).map_err(|e| Failure::core(stage, e))
}

/// Origins of residents that have one; the rest are skipped with a warning.
fn origins(matrices: &[SpatioTemporalMatrix]) -> BTreeMap<String, EncodedLocation> {
    let mut out = BTreeMap::new();
    for m in matrices {
        match detect_origin(m) {
            Ok(o) => {
                out.insert(m.resident_id().to_string(), o);
            }
            Err(e) => warn!("skipping: {e}"),
        }
    }
    out
}

/// Generates a cohort from a spec file.
pub fn synth(spec_path: &Path, seed: u64, out: &Path) -> Result<(), Failure> {
    const S: &str = "synth";
    let spec: CohortSpec = read_json(S, spec_path)?;
    let cohort = generate(&spec, seed).map_err(|e| Failure::core(S, e))?;
    let core = |e| Failure::core(S, e);
    write_trajectories(create(S, out, TRAJECTORIES)?, &cohort.days).map_err(core)?;
    write_plan(create(S, out, PLAN)?, &cohort.plan).map_err(core)?;
    if spec.raw_days > 0 {
        let raw = raw_scans(&cohort).map_err(core)?;
        let mut w = create(S, out, SCANS)?;
        for r in &raw.scans {
            write_scan_record(&mut w, r).map_err(core)?;
        }
        w.flush().map_err(|e| Failure::runtime(S, e.to_string()))?;
        raw.map.write_csv(create(S, out, RECEIVERS)?).map_err(core)?;
        raw.registry.write_csv(create(S, out, REGISTRY)?).map_err(core)?;
    }
    Ok(())
}

/// Scan log to per-cycle fixes.
pub fn ingest(scans: &Path, receivers: &Path, registry: &Path, out: &Path, cfg: &Config) -> Result<(), Failure> {
    const S: &str = "ingest";
    let core = |e| Failure::core(S, e);
    let map = ReceiverMap::read_csv(open(S, receivers)?, &path_str(receivers)).map_err(core)?;
    let reg = Registry::read_csv(open(S, registry)?, &path_str(registry)).map_err(core)?;
    let records = read_scan_log(open(S, scans)?, &path_str(scans)).map_err(core)?;
    let loc = localize_stream(records, &map, &reg, cfg.rssi_threshold_dbm).map_err(core)?;
    write_fixes(create(S, out, FIXES)?, &loc.fixes).map_err(core)?;
    write_json(S, out, INGEST_REPORT, &loc.report)
}

/// Input of the preprocess stage.
#[derive(Debug, Clone)]
pub enum PreprocessInput {
    /// Fixes from `ingest` with the receiver map they were resolved against.
    Fixes { fixes: PathBuf, receivers: PathBuf },
    /// Already encoded trajectories; only smoothing is applied.
    Trajectories(PathBuf),
}

#[derive(Debug, Default, Serialize)]
struct PreprocessReport {
    residents: usize,
    days: usize,
    origins: BTreeMap<String, EncodedLocation>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    origin_rooms: BTreeMap<String, u32>,
    skipped: BTreeMap<String, String>,
}

pub fn preprocess(input: &PreprocessInput, out: &Path, cfg: &Config) -> Result<(), Failure> {
    const S: &str = "preprocess";
    let core = |e| Failure::core(S, e);
    let mut report = PreprocessReport::default();
    let mut days: Vec<DayTrajectory> = Vec::new();
    match input {
        PreprocessInput::Fixes { fixes, receivers } => {
            let map = ReceiverMap::read_csv(open(S, receivers)?, &path_str(receivers)).map_err(core)?;
            let fixes = read_fixes(open(S, fixes)?, &path_str(fixes)).map_err(core)?;
            for (rid, res) in preprocess_fixes(&fixes, &map, offset(cfg), cfg.min_stay_slots) {
                match res {
                    Ok(r) => {
                        report.origins.insert(rid.clone(), r.origin.location);
                        report.origin_rooms.insert(rid, r.origin.room_id.0);
                        days.extend(r.matrix.days().iter().cloned());
                    }
                    Err(e) if !e.is_validation() => {
                        warn!("skipping {rid}: {e}");
                        report.skipped.insert(rid, e.to_string());
                    }
                    Err(e) => return Err(core(e)),
                }
            }
        }
        PreprocessInput::Trajectories(path) => {
            let matrices = load_matrices(S, path)?;
            for m in &matrices {
                match detect_origin(m) {
                    Ok(o) => {
                        report.origins.insert(m.resident_id().to_string(), o);
                    }
                    Err(e) => {
                        report.skipped.insert(m.resident_id().to_string(), e.to_string());
                    }
                }
                days.extend(m.days().iter().map(|d| smooth(d, cfg.min_stay_slots)));
            }
        }
    }
    report.residents = report.origins.len() + report.skipped.len();
    report.days = days.len();
    write_trajectories(create(S, out, TRAJECTORIES)?, &days).map_err(core)?;
    write_json(S, out, PREPROCESS_REPORT, &report)
}

/// Contents of `clusters.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub k: usize,
    pub seed: u64,
    pub weight_kind: String,
    pub labels: BTreeMap<String, usize>,
    pub ssd_curve: Vec<(usize, f64)>,
    #[serde(default)]
    pub degenerate: bool,
}

impl ClusterFile {
    pub fn assignment(&self) -> ClusterAssignment {
        ClusterAssignment {
            k: self.k,
            labels: self.labels.clone(),
            degenerate: self.degenerate,
        }
    }
}

pub fn cluster(trajectories: &Path, out: &Path, cfg: &Config, seed: u64) -> Result<(), Failure> {
    const S: &str = "cluster";
    let core = |e| Failure::core(S, e);
    let matrices = load_matrices(S, trajectories)?;
    let origins = origins(&matrices);
    let mut aggregated = Vec::new();
    for m in &matrices {
        let Some(origin) = origins.get(m.resident_id()) else {
            continue;
        };
        match aggregate(m, cfg.min_valid_fraction, Some(*origin)) {
            Ok(a) => aggregated.push(a),
            Err(e) => warn!("skipping: {e}"),
        }
    }
    let opts = ClusterOptions {
        weights: WeightVector::of_kind(cfg.weight_kind, cfg.active_ratio).map_err(core)?,
        h_slots: cfg.h_slots,
        seed,
        restarts: cfg.restarts,
    };
    let model = SpectralModel::fit(&aggregated, &opts).map_err(core)?;
    let (lo, hi) = cfg.k_range;
    let mut assignments = Vec::new();
    for k in lo..=hi {
        assignments.push(model.cluster(k, &opts).map_err(core)?);
    }
    let curve: Vec<(usize, f64)> = assignments.iter().map(|a| (a.k, model.ssd(a))).collect();
    let chosen = match cfg.k {
        Some(k) => match assignments.iter().find(|a| a.k == k) {
            Some(a) => a.clone(),
            None => model.cluster(k, &opts).map_err(core)?,
        },
        None => {
            let k = select_k(&curve).expect("non-empty range");
            assignments.into_iter().find(|a| a.k == k).expect("k in sweep")
        }
    };
    let file = ClusterFile {
        k: chosen.k,
        seed,
        weight_kind: cfg.weight_kind.to_string(),
        labels: chosen.labels,
        ssd_curve: curve.clone(),
        degenerate: chosen.degenerate,
    };
    write_json(S, out, CLUSTERS, &file)?;
    let mut w = create(S, out, SSD_CURVE)?;
    let io = |e: std::io::Error| Failure::runtime(S, e.to_string());
    writeln!(w, "k,ssd").map_err(io)?;
    for (k, ssd) in &curve {
        writeln!(w, "{k},{ssd}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn norms(trajectories: &Path, clusters: &Path, out: &Path, cfg: &Config) -> Result<(), Failure> {
    const S: &str = "norms";
    let matrices = load_matrices(S, trajectories)?;
    let clusters: ClusterFile = read_json(S, clusters)?;
    let origins = origins(&matrices);
    let matrices: Vec<SpatioTemporalMatrix> = matrices
        .into_iter()
        .filter(|m| origins.contains_key(m.resident_id()))
        .collect();
    let opts = NormOptions {
        min_valid_fraction: cfg.min_valid_fraction,
        h_gap: cfg.h_gap,
        mode: cfg.transition_mode,
        leave_one_out: cfg.leave_one_out,
    };
    let norms = build_norms(&matrices, &origins, &clusters.assignment(), &opts).map_err(|e| Failure::core(S, e))?;
    write_norms(create(S, out, NORMS)?, &norms).map_err(|e| Failure::core(S, e))
}

fn load_norms(stage: &'static str, path: &Path) -> Result<Vec<HybridNorm>, Failure> {
    read_norms(open(stage, path)?, &path_str(path)).map_err(|e| Failure::core(stage, e))
}

pub fn detect(trajectories: &Path, norms: &Path, out: &Path, cfg: &Config) -> Result<(), Failure> {
    const S: &str = "detect";
    let core = |e| Failure::core(S, e);
    let matrices = load_matrices(S, trajectories)?;
    let norms = load_norms(S, norms)?;
    let mut by_resident: BTreeMap<&str, BTreeMap<NaiveDate, &HybridNorm>> = BTreeMap::new();
    for n in &norms {
        by_resident.entry(n.resident_id.as_str()).or_default().insert(n.date, n);
    }
    let mut days: Vec<DeviationDay> = Vec::new();
    for m in &matrices {
        let Some(norms) = by_resident.get(m.resident_id()) else {
            warn!("{}: no norms, skipped", m.resident_id());
            continue;
        };
        days.extend(deviation_history(m, norms, cfg.min_valid_fraction).map_err(core)?);
    }
    write_deviations_jsonl(create(S, out, DEVIATIONS)?, &days).map_err(core)?;
    write_deviations_dense(create(S, out, DEVIATIONS_DENSE)?, &days).map_err(core)
}

/// Contents of `classification.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub thresholds: ThresholdTable,
    pub profiles: Vec<DeviationProfile>,
}

pub fn classify(deviations: &Path, norms: &Path, out: &Path, cfg: &Config) -> Result<(), Failure> {
    const S: &str = "classify";
    let core = |e| Failure::core(S, e);
    let history = read_deviations_jsonl(open(S, deviations)?, &path_str(deviations)).map_err(core)?;
    let norms = load_norms(S, norms)?;
    let mut norms_by: BTreeMap<&str, Vec<&HybridNorm>> = BTreeMap::new();
    for n in &norms {
        norms_by.entry(n.resident_id.as_str()).or_default().push(n);
    }
    let mut history_by: BTreeMap<String, Vec<DeviationDay>> = BTreeMap::new();
    for d in history {
        history_by.entry(d.resident_id.clone()).or_default().push(d);
    }
    let mut profiles = Vec::new();
    for (rid, ns) in &norms_by {
        let h = history_by.remove(*rid).unwrap_or_default();
        profiles.push(build_profile(rid, &h, ns).map_err(core)?);
    }
    if let Some(rid) = history_by.keys().next() {
        return Err(Failure::validation(S, format!("deviations for {rid} have no norms")));
    }
    let thresholds = label_cohort(&mut profiles, cfg.thresholds, cfg.awake_rule).map_err(core)?;
    write_json(
        S,
        out,
        CLASSIFICATION,
        &Classification {
            thresholds,
            profiles: profiles.clone(),
        },
    )?;

    let mut w = create(S, out, PERIOD_PROBABILITIES)?;
    let io = |e: std::io::Error| Failure::runtime(S, e.to_string());
    writeln!(w, "resident_id,period,category,probability").map_err(io)?;
    for p in &profiles {
        for (period, cats) in &p.probabilities {
            for (cat, v) in cats {
                writeln!(w, "{},{},{},{v}", p.resident_id, period.name(), cat.name()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub thresholds: ThresholdTable,
    pub profiles: Vec<DeviationProfile>,
    pub cohort: CohortReport,
}

pub fn report(classification: &Path, out: &Path) -> Result<(), Failure> {
    const S: &str = "report";
    let c: Classification = read_json(S, classification)?;
    let cohort = cohort_report(c.profiles.iter().map(|p| &p.labels));
    let io = |e: std::io::Error| Failure::runtime(S, e.to_string());
    let mut w = create(S, out, LABEL_DISTRIBUTION)?;
    writeln!(w, "labels,fraction").map_err(io)?;
    for (name, v) in [("0", cohort.zero), ("1", cohort.one), ("2+", cohort.two_plus)] {
        writeln!(w, "{name},{v}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    let mut w = create(S, out, LABEL_COUNTS)?;
    writeln!(w, "label,residents,single_label_residents").map_err(io)?;
    for l in Label::ALL {
        writeln!(w, "{l:?},{},{}", cohort.per_label[&l], cohort.one_label[&l]).map_err(io)?;
    }
    w.flush().map_err(io)?;
    write_json(
        S,
        out,
        REPORT,
        &Report {
            thresholds: c.thresholds,
            profiles: c.profiles,
            cohort,
        },
    )
}

/// Stage directories used by `pipeline`, relative to its output root.
pub fn stage_dir(root: &Path, stage: &str) -> PathBuf {
    root.join(stage)
}

/// Every stage in order, each writing to `<out>/<stage>/`. With a raw-mode
/// spec, trajectories are rebuilt from the scan log and cover the raw days only.
pub fn pipeline(spec: &Path, seed: u64, out: &Path, cfg: &Config) -> Result<(), Failure> {
    let d = |s| stage_dir(out, s);
    synth(spec, seed, &d("synth"))?;
    let input = if d("synth").join(SCANS).exists() {
        ingest(
            &d("synth").join(SCANS),
            &d("synth").join(RECEIVERS),
            &d("synth").join(REGISTRY),
            &d("ingest"),
            cfg,
        )?;
        PreprocessInput::Fixes {
            fixes: d("ingest").join(FIXES),
            receivers: d("synth").join(RECEIVERS),
        }
    } else {
        PreprocessInput::Trajectories(d("synth").join(TRAJECTORIES))
    };
    preprocess(&input, &d("preprocess"), cfg)?;
    let traj = d("preprocess").join(TRAJECTORIES);
    cluster(&traj, &d("cluster"), cfg, seed)?;
    norms(&traj, &d("cluster").join(CLUSTERS), &d("norms"), cfg)?;
    detect(&traj, &d("norms").join(NORMS), &d("detect"), cfg)?;
    classify(
        &d("detect").join(DEVIATIONS),
        &d("norms").join(NORMS),
        &d("classify"),
        cfg,
    )?;
    report(&d("classify").join(CLASSIFICATION), &d("report"))
}
