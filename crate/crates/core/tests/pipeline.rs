use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::BufReader;

use nonword_core::corpus::{load_lexicon, read_frequency_list};
use nonword_core::filter::{default_threshold, filter_lexicon, filter_low_probability, neighborhood_size};
use nonword_core::generator::{exhaustive, sample_batch_seeded};
use nonword_core::ranker::{rank, rank_top, rerank, select_disjoint_top, top_k_intersection};
use nonword_core::{
    Alphabet, BatchOptions, Candidate, Lexicon, PositionalNgramModel, Provenance, TransliterationTable, WordFrequencyTable,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> BufReader<File> {
    let path = format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"));
    BufReader::new(File::open(&path).unwrap_or_else(|e| panic!("{path}: {e}")))
}

fn swedish_table() -> WordFrequencyTable {
    read_frequency_list(data("wordfreq/sv.tsv"), &Alphabet::swedish()).unwrap()
}

fn swedish() -> PositionalNgramModel {
    PositionalNgramModel::train(&swedish_table(), 4).unwrap()
}

fn swedish_lexicon() -> Lexicon {
    load_lexicon(data("wordfreq/sv_lexicon.txt"), data("sv_exclusions.txt")).unwrap()
}

fn arabic() -> PositionalNgramModel {
    let translit = TransliterationTable::arabic_default();
    let raw = std::fs::read_to_string(format!("{}/../../data/wordfreq/ar.tsv", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let mut table = WordFrequencyTable::new(Alphabet::swedish());
    for line in raw.lines() {
        let (word, count) = line.split_once('\t').unwrap();
        table.add(&translit.transliterate(word).unwrap(), count.parse().unwrap());
    }
    PositionalNgramModel::train(&table, 4).unwrap()
}

fn random_word<R: Rng>(rng: &mut R, chars: &[char], lengths: std::ops::RangeInclusive<usize>) -> String {
    let len = rng.gen_range(lengths);
    (0..len).map(|_| chars[rng.gen_range(0..chars.len())]).collect()
}

fn candidates(words: &[String]) -> Vec<Candidate> {
    words.iter().map(|w| Candidate::new(w.clone(), Provenance::Sampled)).collect()
}

#[test]
fn lexicon_filter_is_a_set_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let chars = ['a', 'b', 'e', 'k', 's'];
    let lexicon_words: Vec<String> = (0..10_000).map(|_| random_word(&mut rng, &chars, 2..=6)).collect();
    let exclusions: Vec<String> = (0..300).map(|_| random_word(&mut rng, &chars, 2..=6)).collect();
    let input: Vec<String> = (0..10_000).map(|_| random_word(&mut rng, &chars, 2..=6)).collect();
    let lex = load_lexicon(lexicon_words.join("\n").as_bytes(), exclusions.join("\n").as_bytes()).unwrap();

    let mut f = filter_lexicon(candidates(&input), &lex);
    let got: Vec<String> = f.by_ref().map(|c| c.text).collect();
    let expected: Vec<String> = input.iter().filter(|w| !lexicon_words.contains(w) && !exclusions.contains(w)).cloned().collect();
    assert_eq!(got, expected);
    let r = f.report();
    assert!(r.is_balanced());
    assert_eq!(r.output_count as usize, expected.len());
}

#[test]
fn neighborhood_matches_hamming_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chars = ['a', 'e', 'k', 'l', 's', 'ä'];
    let words: Vec<String> = (0..2_000).map(|_| random_word(&mut rng, &chars, 3..=5)).collect();
    let lex = load_lexicon(words.join("\n").as_bytes(), "".as_bytes()).unwrap();
    let unique: BTreeSet<&String> = words.iter().collect();
    for _ in 0..300 {
        let probe = random_word(&mut rng, &chars, 3..=5);
        let brute = unique
            .iter()
            .filter(|w| w.chars().count() == probe.chars().count() && w.chars().zip(probe.chars()).filter(|(a, b)| a != b).count() == 1)
            .count();
        assert_eq!(neighborhood_size(&probe, &lex, &Alphabet::swedish()), brute, "{probe}");
    }
}

#[test]
fn junk_scores_below_frequent_words() {
    let table = swedish_table();
    let model = PositionalNgramModel::train(&table, 4).unwrap();
    let junk = model.score("xxxxx").unwrap();
    for (w, _) in table.most_frequent(100) {
        assert!(junk < model.score(w).unwrap(), "{w}");
    }
    assert_eq!(filter_low_probability(candidates(&["xxxxx".into()]), &model, 1e-4f64.ln()).count(), 0);
    // å is frequent on its own, so the run only falls below the threshold
    // derived from real five-letter words
    let t = default_threshold(&model, &swedish_lexicon(), 5).unwrap();
    assert!(model.score_per_char("äåååå").unwrap() < t);
    assert!(model.score_per_char("xxxxx").unwrap() < t);
}

#[test]
fn sampled_batch_contract() {
    let model = swedish();
    let lex = swedish_lexicon();
    let opts = BatchOptions { workers: 4, ..Default::default() };
    let batch = sample_batch_seeded(&model, 6, 10_000, 42, &opts).unwrap();
    assert_eq!(batch.len(), 10_000);
    let distinct: HashSet<&str> = batch.iter().map(|c| c.text.as_str()).collect();
    assert_eq!(distinct.len(), 10_000);
    for c in &batch {
        assert_eq!(c.len(), 6, "{}", c.text);
        assert!(c.text.chars().all(|ch| model.alphabet().contains(ch)), "{}", c.text);
    }
    let survivors: Vec<Candidate> = filter_lexicon(batch.clone(), &lex).collect();
    assert!(survivors.iter().all(|c| !lex.contains(&c.text)));
    assert!(survivors.len() < batch.len(), "a Swedish model should reproduce some real words");

    let again = sample_batch_seeded(&model, 6, 10_000, 42, &BatchOptions::default()).unwrap();
    assert_eq!(again, batch);
    let other = sample_batch_seeded(&model, 6, 100, 43, &opts).unwrap();
    assert_ne!(other[..], batch[..100]);
}

#[test]
fn exhaustive_ranking_keeps_heap_and_sort_in_agreement() {
    let model = swedish();
    let lex = swedish_lexicon();
    let stream = || filter_lexicon(exhaustive(model.alphabet(), 3).unwrap(), &lex);
    let full = rank(stream(), "sv", &model).unwrap();
    let top = rank_top(stream(), "sv", &model, 50).unwrap();
    assert_eq!(top.items[..], full.items[..50]);
}

#[test]
fn arabic_reranking_changes_the_head() {
    let sv = swedish();
    let ar = arabic();
    let lex = swedish_lexicon();
    let pool: Vec<Candidate> = filter_lexicon(sample_batch_seeded(&sv, 6, 2_000, 5, &BatchOptions::default()).unwrap(), &lex).collect();
    let by_sv = rank(pool, "sv", &sv).unwrap();
    let by_ar = rerank(&by_sv, "ar", &ar).unwrap();
    let head = |l: &nonword_core::RankedList| l.texts().take(20).map(str::to_string).collect::<Vec<_>>();
    assert_ne!(head(&by_sv), head(&by_ar));
    let a: BTreeSet<&str> = by_sv.texts().collect();
    let b: BTreeSet<&str> = by_ar.texts().collect();
    assert_eq!(a, b);
    assert!(by_ar.items.iter().all(|c| c.score("sv").is_some() && c.score("ar").is_some()));
}

fn list_strategy() -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    prop::collection::btree_set("[abc]{2,4}", 1..60).prop_flat_map(|set| {
        let v: Vec<String> = set.into_iter().collect();
        let w = v.clone();
        (Just(v), Just(w).prop_shuffle())
    })
}

/// A ranking in list order, without a model behind it.
fn ranking(words: &[String], id: &str) -> nonword_core::RankedList {
    nonword_core::RankedList {
        model_id: id.to_string(),
        items: words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut c = Candidate::new(w.clone(), Provenance::Sampled);
                c.scores.insert(id.to_string(), -(i as f64));
                c
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn intersection_matches_nested_scan((a, b) in list_strategy(), k_frac in 0.0f64..=1.0) {
        let k = ((a.len() as f64) * k_frac) as usize;
        let got = top_k_intersection(&ranking(&a, "x"), &ranking(&b, "y"), k).unwrap();
        let mut brute = BTreeSet::new();
        for x in &a[..k] {
            for y in &b[..k] {
                if x == y {
                    brute.insert(x.clone());
                }
            }
        }
        prop_assert_eq!(got, brute);
    }

    #[test]
    fn disjoint_selection_matches_reference(lists in prop::collection::vec(prop::collection::btree_set("[ab]{2,3}", 0..12), 1..4), k in 0usize..5) {
        let lists: Vec<Vec<String>> = lists.into_iter().map(|s| {
            let mut v: Vec<String> = s.into_iter().collect();
            let seed = v.len() as u64;
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            v
        }).collect();
        let rankings: Vec<_> = lists.iter().enumerate().map(|(i, l)| ranking(l, &format!("m{i}"))).collect();
        let mut used: Vec<String> = Vec::new();
        let mut expected: Option<Vec<Vec<String>>> = Some(Vec::new());
        for l in &lists {
            let picked: Vec<String> = l.iter().filter(|w| !used.contains(w)).take(k).cloned().collect();
            if picked.len() < k {
                expected = None;
                break;
            }
            used.extend(picked.iter().cloned());
            expected.as_mut().unwrap().push(picked);
        }
        match (select_disjoint_top(&rankings, k), expected) {
            (Ok(got), Some(want)) => {
                let got: Vec<Vec<String>> = got.iter().map(|r| r.texts().map(str::to_string).collect()).collect();
                prop_assert_eq!(got, want);
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got.map(|_| ()), want),
        }
    }
}
