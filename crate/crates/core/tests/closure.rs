use std::collections::{BTreeMap, BTreeSet};

use hybridnorm::cluster::{aggregate, spectral_cluster, ClusterOptions};
use hybridnorm::deviation::deviation_history;
use hybridnorm::model::group_by_resident;
use hybridnorm::norm::{build_norms, NormOptions};
use hybridnorm::preprocess::detect_origin;
use hybridnorm::synth::{generate, injected_slots, Behavior, CohortSpec, DeviationKind};

type SlotSet = BTreeSet<(String, chrono::NaiveDate, usize)>;

/// Deviated slots found by the pipeline and the injected slots of the plan.
fn deviated_set(spec: &CohortSpec, seed: u64) -> (SlotSet, SlotSet) {
    let cohort = generate(spec, seed).unwrap();
    let planted = injected_slots(&cohort.plan);
    let mats = group_by_resident(cohort.days).unwrap();
    let origins: BTreeMap<_, _> = mats
        .iter()
        .map(|m| (m.resident_id().to_string(), detect_origin(m).unwrap()))
        .collect();
    let aggs: Vec<_> = mats
        .iter()
        .map(|m| aggregate(m, 0.5, Some(origins[m.resident_id()])).unwrap())
        .collect();
    let assignment = spectral_cluster(&aggs, spec.n_groups, &ClusterOptions::default()).unwrap();
    let norms = build_norms(&mats, &origins, &assignment, &NormOptions::default()).unwrap();
    let mut found = BTreeSet::new();
    for m in &mats {
        let by_date = norms
            .iter()
            .filter(|n| n.resident_id == m.resident_id())
            .map(|n| (n.date, n))
            .collect();
        for day in deviation_history(m, &by_date, 0.5).unwrap() {
            for (q, loc) in day.located().iter().enumerate() {
                if loc.is_some() {
                    found.insert((day.resident_id.clone(), day.date, q));
                }
            }
        }
    }
    (found, planted)
}

#[test]
fn clean_cohort_has_no_deviations() {
    let (found, planted) = deviated_set(&CohortSpec::planted(15, 3, 12), 1);
    assert!(planted.is_empty());
    assert!(found.is_empty());
}

#[test]
fn deviations_equal_the_plan() {
    let mut spec = CohortSpec::planted(15, 3, 12);
    let kinds = [DeviationKind::Sleep, DeviationKind::Awake, DeviationKind::PrivateVisit];
    for (i, r) in ["R000", "R001", "R005", "R006", "R010", "R011"].iter().enumerate() {
        spec.behaviors.push(Behavior {
            resident: r.to_string(),
            kind: kinds[i % 3],
            frequency: 0.3,
        });
    }
    let (found, planted) = deviated_set(&spec, 2);
    assert!(!planted.is_empty());
    assert_eq!(found, planted);
}
