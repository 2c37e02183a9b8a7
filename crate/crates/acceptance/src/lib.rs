//! Reference data and brute-force oracles for the acceptance suite.
//!
//! Nothing here calls the code under test except to train models and
//! build inputs; every expected value is computed independently.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nonword_core::corpus::{load_lexicon, read_frequency_list};
use nonword_core::{
    Alphabet, Candidate, Group, Lexicon, PositionalNgramModel, Proficiency, Provenance, RankedList, Response, StudyList, TrialRecord,
    WordFrequencyTable,
};
use rand::Rng;

pub fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn swedish_table() -> WordFrequencyTable {
    read_frequency_list(BufReader::new(File::open(repo("data/wordfreq/sv.tsv")).unwrap()), &Alphabet::swedish()).unwrap()
}

pub fn train(lang: &str) -> PositionalNgramModel {
    let path = repo(&format!("data/wordfreq/{lang}.tsv"));
    let table = read_frequency_list(BufReader::new(File::open(path).unwrap()), &Alphabet::swedish()).unwrap();
    PositionalNgramModel::train(&table, 4).unwrap()
}

pub fn swedish_lexicon() -> Lexicon {
    let words = BufReader::new(File::open(repo("data/wordfreq/sv_lexicon.txt")).unwrap());
    let exclusions = BufReader::new(File::open(repo("data/sv_exclusions.txt")).unwrap());
    load_lexicon(words, exclusions).unwrap()
}

/// Lower-cased lines of a word file, read without the library.
pub fn raw_words(rel: &str) -> HashSet<String> {
    std::fs::read_to_string(repo(rel))
        .unwrap()
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Control-group reaction times per group: R1, R2, R3, and the reference nAvg.
pub const CONTROL_GROUP: [(Group, [f64; 3], f64); 4] = [
    (Group::De, [4.75, 1.60, 2.50], 1.10),
    (Group::En, [3.50, 1.60, 2.15], 0.94),
    (Group::Sv, [4.85, 1.80, 3.05], 1.23),
    (Group::Fi, [1.45, 1.30, 2.40], 0.72),
];

/// German participants: rater, proficiency, then x0, x1, xC for DE, EN, SV, FI.
/// A 0 in an x1 column means the rater never accepted an item of that group.
#[allow(clippy::approx_constant)]
pub const GERMAN_RATERS: [(&str, Proficiency, [f64; 12]); 8] = [
    ("R1", Proficiency::B, [2.14, 3.09, 2.40, 2.7, 3.3, 2.85, 2.58, 2.33, 2.45, 2.83, 3.14, 3.00]),
    ("R2", Proficiency::I, [2.57, 4.67, 3.20, 2.78, 7.00, 3.20, 3.18, 5.00, 3.45, 3.00, 3.35, 3.30]),
    ("R3", Proficiency::I, [2.29, 5.33, 2.75, 2.00, 0.0, 2.00, 4.69, 4.00, 4.45, 3.67, 2.00, 2.25]),
    ("R4", Proficiency::A, [4.35, 0.0, 4.35, 4.21, 0.0, 4.21, 4.95, 0.0, 4.95, 4.83, 2.64, 3.30]),
    ("R5", Proficiency::A, [7.31, 7.5, 7.35, 5.60, 0.0, 5.60, 5.60, 0.0, 5.60, 12.00, 3.26, 3.70]),
    ("R6", Proficiency::A, [2.47, 3.00, 2.50, 2.65, 0.0, 2.65, 3.53, 7.00, 3.70, 2.50, 1.65, 1.75]),
    ("R7", Proficiency::A, [1.83, 4.50, 2.10, 2.10, 0.0, 2.10, 4.12, 3.33, 4.00, 3.33, 1.82, 2.05]),
    ("R8", Proficiency::A, [10.20, 0.0, 10.20, 3.89, 7.00, 4.05, 8.00, 0.0, 8.00, 14.40, 5.33, 7.60]),
];

pub const GERMAN_NA: [f64; 12] = [0.82, 0.84, 0.87, 0.72, 0.42, 0.73, 1.01, 0.73, 1.00, 1.13, 0.63, 0.71];
pub const GERMAN_NA2: [f64; 12] = [0.92, 0.91, 0.98, 0.77, 0.37, 0.79, 1.14, 0.81, 1.14, 1.28, 0.64, 0.75];

/// Smallest reject/accept counts whose weighted mean rounds to `xc`.
/// `x1 == 0` means no acceptances at all.
pub fn cell_counts(x0: f64, x1: f64, xc: f64) -> (usize, usize) {
    if x1 == 0.0 {
        return (1, 0);
    }
    let mut best = (1, 1, f64::INFINITY);
    for n0 in 1..=40 {
        for n1 in 1..=40 {
            let mean = (n0 as f64 * x0 + n1 as f64 * x1) / (n0 + n1) as f64;
            let err = (mean - xc).abs();
            if err < best.2 - 1e-12 {
                best = (n0, n1, err);
            }
        }
    }
    (best.0, best.1)
}

/// `n` reaction times averaging exactly `mean`: pairs at mean ± 0.1, plus
/// one at the mean when `n` is odd.
pub fn spread(mean: f64, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n / 2).flat_map(|_| [mean - 0.1, mean + 0.1]).collect();
    if n % 2 == 1 {
        out.push(mean);
    }
    out
}

fn record(rater: &str, l1: &str, proficiency: Proficiency, word: String, group: Group, response: Response, rt: f64) -> TrialRecord {
    TrialRecord { rater_id: rater.into(), l1: l1.into(), proficiency, word, group, response, rt_seconds: rt }
}

/// Trial log whose per-rater cells have the German participants' x0 and x1.
pub fn german_log() -> Vec<TrialRecord> {
    let mut out = Vec::new();
    for (rater, prof, cells) in GERMAN_RATERS {
        for (g, group) in Group::ALL.into_iter().enumerate() {
            let [x0, x1, xc] = [cells[3 * g], cells[3 * g + 1], cells[3 * g + 2]];
            let (n0, n1) = cell_counts(x0, x1, xc);
            let answers =
                spread(x0, n0).into_iter().map(|t| (Response::Reject, t)).chain(spread(x1, n1).into_iter().map(|t| (Response::Accept, t)));
            for (i, (resp, rt)) in answers.enumerate() {
                out.push(record(rater, "German", prof, format!("{}w{i}", group.as_str().to_lowercase()), group, resp, rt));
            }
        }
    }
    out
}

/// Control-group log: 20 trials per cell at m ± 0.25, the first two wrong.
pub fn control_group_log() -> Vec<TrialRecord> {
    let mut out = Vec::new();
    for (r, rater) in ["R1", "R2", "R3"].into_iter().enumerate() {
        for (group, means, _) in CONTROL_GROUP {
            for i in 0..20 {
                let rt = means[r] + if i % 2 == 0 { -0.25 } else { 0.25 };
                let correct = if group == Group::Fi { Response::Accept } else { Response::Reject };
                let wrong = if correct == Response::Accept { Response::Reject } else { Response::Accept };
                let resp = if i < 2 { wrong } else { correct };
                out.push(record(rater, "Swedish", Proficiency::A, format!("{}w{i}", group.as_str().to_lowercase()), group, resp, rt));
            }
        }
    }
    out
}

/// Random log: 1 to 6 raters, 1 to 12 trials per cell, rt in [0.3, 15).
pub fn random_log<R: Rng>(rng: &mut R) -> Vec<TrialRecord> {
    let mut out = Vec::new();
    for r in 0..rng.gen_range(1..=6) {
        for group in Group::ALL {
            for i in 0..rng.gen_range(1..=12) {
                let resp = if rng.gen_bool(0.5) { Response::Accept } else { Response::Reject };
                out.push(record(&format!("R{r}"), "X", Proficiency::I, format!("w{i}"), group, resp, rng.gen_range(0.3..15.0)));
            }
        }
    }
    out
}

/// Plain per-rater combined means by group, straight from the log.
pub fn combined_means(log: &[TrialRecord]) -> BTreeMap<String, BTreeMap<Group, f64>> {
    let mut sums: BTreeMap<(String, Group), (f64, usize)> = BTreeMap::new();
    for t in log {
        let e = sums.entry((t.rater_id.clone(), t.group)).or_default();
        e.0 += t.rt_seconds;
        e.1 += 1;
    }
    let mut out: BTreeMap<String, BTreeMap<Group, f64>> = BTreeMap::new();
    for ((r, g), (s, n)) in sums {
        out.entry(r).or_default().insert(g, s / n as f64);
    }
    out
}

pub fn random_word<R: Rng>(rng: &mut R, chars: &[char], lengths: std::ops::RangeInclusive<usize>) -> String {
    let len = rng.gen_range(lengths);
    (0..len).map(|_| chars[rng.gen_range(0..chars.len())]).collect()
}

pub fn candidates(words: &[String]) -> Vec<Candidate> {
    words.iter().map(|w| Candidate::new(w.clone(), Provenance::Sampled)).collect()
}

/// A ranking of distinct words with strictly decreasing synthetic scores.
pub fn ranking(words: &[String], id: &str) -> RankedList {
    let mut seen = HashSet::new();
    let items = words
        .iter()
        .filter(|w| seen.insert(w.as_str()))
        .enumerate()
        .map(|(i, w)| {
            let mut c = Candidate::new(w.clone(), Provenance::Sampled);
            c.scores.insert(id.to_string(), -(i as f64));
            c
        })
        .collect();
    RankedList { model_id: id.to_string(), items }
}

/// Words that appear in the first `k` of both lists, by nested scan.
pub fn intersection_oracle(a: &[String], b: &[String], k: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for x in a.iter().take(k) {
        for y in b.iter().take(k) {
            if x == y {
                out.insert(x.clone());
            }
        }
    }
    out
}

/// Checks the g1, g2, g3 cycle at every index.
pub fn perception_cycle_holds(list: &StudyList) -> bool {
    list.items.len().is_multiple_of(3) && list.items.iter().enumerate().all(|(i, item)| item.group == ["g1", "g2", "g3"][i % 3])
}

/// Checks that consecutive runs of `tags.len()` items hold each tag once.
pub fn blocks_hold_one_per_source(list: &StudyList, tags: &[&str]) -> bool {
    let want: BTreeSet<&str> = tags.iter().copied().collect();
    list.items.len().is_multiple_of(tags.len())
        && list.items.chunks(tags.len()).all(|block| {
            let got: Vec<&str> = block.iter().map(|i| i.group.as_str()).collect();
            got.len() == want.len() && got.iter().copied().collect::<BTreeSet<_>>() == want
        })
}
