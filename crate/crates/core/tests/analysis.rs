use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;

use nonword_core::study::{analyze, filter_by_proficiency, group_reaction_times, read_trials};
use nonword_core::{Group, Proficiency, Response, TrialRecord};
use proptest::prelude::*;

fn fixture() -> Vec<TrialRecord> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/control_group.csv");
    read_trials(File::open(path).unwrap()).unwrap()
}

#[test]
fn control_group_reproduces_normalized_averages() {
    let analysis = analyze(&fixture()).unwrap();
    assert_eq!(analysis.l1_groups.len(), 1);
    let sv = &analysis.l1_groups[0];
    assert_eq!(sv.l1, "Swedish");
    let n = sv.normalized_combined.as_ref().unwrap();
    for (g, want) in Group::ALL.iter().zip([1.10, 0.94, 1.23, 0.72]) {
        assert!((n[g] - want).abs() <= 0.005, "{g}: {}", n[g]);
    }
    for r in &sv.raters {
        for g in Group::ALL {
            assert_eq!(r.accuracy[&g], Some(90.0), "{} {g}", r.rater_id);
        }
    }
}

#[test]
fn csv_tables_have_sections() {
    let mut out = Vec::new();
    analyze(&fixture()).unwrap().write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with("# ")).collect();
    assert_eq!(headers, ["# combined l1=Swedish", "# accuracy l1=Swedish", "# reaction_times l1=Swedish"]);
    assert!(text.contains("group,R1,R2,R3,nAvg\nDE,4.75,1.60,2.50,1.10\n"), "{text}");
    assert!(text.contains("\nnA,,"));
}

#[test]
fn json_shape_is_stable() {
    let v = serde_json::to_value(analyze(&fixture()).unwrap()).unwrap();
    assert_eq!(v["trial_count"], 240);
    let g = &v["l1_groups"][0];
    assert!(g["normalized_combined"]["SV"].as_f64().unwrap() > 1.2);
    assert_eq!(g["raters"][0]["accuracy"]["FI"], 90.0);
    assert!(g["normalized_columns"]["SC"].is_number());
}

#[test]
fn proficiency_filter_keeps_whole_raters() {
    let mut trials = fixture();
    for t in trials.iter_mut().filter(|t| t.rater_id == "R2") {
        t.proficiency = Proficiency::B;
    }
    let ia = filter_by_proficiency(&trials, &BTreeSet::from([Proficiency::I, Proficiency::A])).unwrap();
    let raters: BTreeSet<&str> = ia.iter().map(|t| t.rater_id.as_str()).collect();
    assert_eq!(raters, BTreeSet::from(["R1", "R3"]));
    let a = analyze(&trials).unwrap();
    assert!(a.l1_groups[0].normalized_columns_ia.is_some());
}

fn random_log() -> impl Strategy<Value = Vec<TrialRecord>> {
    let trial = (0usize..4, 0usize..4, any::<bool>(), 0.2f64..9.0);
    prop::collection::vec(prop::collection::vec(trial, 1..40), 1..6).prop_map(|raters| {
        let mut out = Vec::new();
        for (r, trials) in raters.into_iter().enumerate() {
            // every rater sees every group at least once
            let fixed = Group::ALL.iter().map(|&g| (g, Response::Reject, 1.0));
            let drawn =
                trials.into_iter().map(|(g, _, accept, rt)| (Group::ALL[g], if accept { Response::Accept } else { Response::Reject }, rt));
            for (i, (group, response, rt)) in fixed.chain(drawn).enumerate() {
                out.push(TrialRecord {
                    rater_id: format!("P{r}"),
                    l1: "German".into(),
                    proficiency: Proficiency::A,
                    word: format!("w{i}"),
                    group,
                    response,
                    rt_seconds: rt,
                });
            }
        }
        out
    })
}

proptest! {
    #[test]
    fn combined_means_match_hand_sums(log in random_log()) {
        let stats = group_reaction_times(&log);
        let mut sums: BTreeMap<(&str, Group), (f64, usize)> = BTreeMap::new();
        for t in &log {
            let e = sums.entry((t.rater_id.as_str(), t.group)).or_default();
            e.0 += t.rt_seconds;
            e.1 += 1;
        }
        for ((r, g), (s, n)) in sums {
            let c = stats.get(r, g).unwrap();
            prop_assert!((c.combined_mean - s / n as f64).abs() < 1e-9);
            prop_assert_eq!(c.rejects + c.accepts, n as u64);
        }
    }

    #[test]
    fn normalized_rows_average_to_one(log in random_log()) {
        let a = analyze(&log).unwrap();
        let n = a.l1_groups[0].normalized_combined.as_ref().unwrap();
        let mean = n.values().sum::<f64>() / n.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-9, "{mean}");
    }

    #[test]
    fn normalization_ignores_rater_speed(log in random_log(), factor in 0.1f64..10.0) {
        let slowed: Vec<TrialRecord> = log
            .iter()
            .map(|t| {
                let mut t = t.clone();
                if t.rater_id == "P0" {
                    t.rt_seconds *= factor;
                }
                t
            })
            .collect();
        let before = analyze(&log).unwrap().l1_groups[0].normalized_combined.clone().unwrap();
        let after = analyze(&slowed).unwrap().l1_groups[0].normalized_combined.clone().unwrap();
        for g in Group::ALL {
            prop_assert!((before[&g] - after[&g]).abs() < 1e-9);
        }
    }
}
