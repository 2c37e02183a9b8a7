use std::collections::BTreeMap;

use nonword_core::lm::{pick_rank, FLOOR_LOG_PROB};
use nonword_core::{Alphabet, PositionalNgramModel, WordFrequencyTable, Zone};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Counts = BTreeMap<(String, String, char), u64>;

fn zone_name(i: usize, len: usize) -> &'static str {
    if i + 1 == len {
        "FINAL"
    } else if i <= 2 {
        "INITIAL"
    } else {
        "MEDIAL"
    }
}

/// Reference counter over plain strings.
fn oracle_counts(words: &[(String, u64)], order: usize) -> Counts {
    let mut out = Counts::new();
    for (w, n) in words {
        let chars: Vec<char> = w.chars().collect();
        for i in 0..chars.len() {
            let ctx: String = chars[i.saturating_sub(order - 1)..i].iter().collect();
            *out.entry((zone_name(i, chars.len()).to_string(), ctx, chars[i])).or_insert(0) += n;
        }
    }
    out
}

/// Reference scorer: longest context suffix in the zone that saw the char.
fn oracle_score(counts: &Counts, word: &str, order: usize) -> f64 {
    let chars: Vec<char> = word.chars().collect();
    let mut total = 0.0;
    for i in 0..chars.len() {
        let zone = zone_name(i, chars.len());
        let full = &chars[i.saturating_sub(order - 1)..i];
        let mut lp = FLOOR_LOG_PROB;
        for s in 0..=full.len() {
            let ctx: String = full[s..].iter().collect();
            let n = counts.get(&(zone.to_string(), ctx.clone(), chars[i])).copied().unwrap_or(0);
            if n > 0 {
                let denom: u64 = counts.iter().filter(|((z, c, _), _)| z == zone && *c == ctx).map(|(_, v)| v).sum();
                lp = (n as f64 / denom as f64).ln();
                break;
            }
        }
        total += lp;
    }
    total
}

fn train(words: &[(String, u64)], order: usize) -> PositionalNgramModel {
    let mut t = WordFrequencyTable::new(Alphabet::swedish());
    for (w, n) in words {
        t.add(w, *n);
    }
    PositionalNgramModel::train(&t, order).unwrap()
}

fn word_list() -> impl Strategy<Value = Vec<(String, u64)>> {
    prop::collection::btree_map("[abkståö]{2,9}", 1u64..20, 1..40).prop_map(|m| m.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_match_reference(words in word_list(), order in 2usize..6) {
        let model = train(&words, order);
        let expected = oracle_counts(&words, order);
        for ((zone, ctx, ch), n) in &expected {
            prop_assert_eq!(model.count(zone.parse().unwrap(), ctx, *ch), *n);
        }
        // the serialized model holds exactly the reference entries
        let text = String::from_utf8(model.to_bytes()).unwrap();
        let mut lines = text.lines();
        prop_assert_eq!(lines.next().unwrap(), format!("posgram v1 order={order} alphabet={}", Alphabet::swedish()));
        let parsed: Counts = lines
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                ((f[0].to_string(), f[1].to_string(), f[2].chars().next().unwrap()), f[3].parse().unwrap())
            })
            .collect();
        prop_assert_eq!(&parsed, &expected);
    }

    #[test]
    fn continuation_probabilities_sum_to_one(words in word_list(), order in 2usize..6) {
        let model = train(&words, order);
        let contexts: std::collections::BTreeSet<(String, String)> =
            oracle_counts(&words, order).into_keys().map(|(z, c, _)| (z, c)).collect();
        for (zone, ctx) in contexts {
            let conts = model.continuations(&ctx, zone.parse().unwrap());
            let mass: f64 = conts.iter().map(|c| c.log_likelihood.exp()).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12, "{zone}/{ctx}: {mass}");
            for pair in conts.windows(2) {
                prop_assert!(pair[0].log_likelihood >= pair[1].log_likelihood);
            }
        }
    }

    #[test]
    fn scores_match_reference(words in word_list(), probes in prop::collection::vec("[abkståöx]{2,9}", 1..10)) {
        let order = 4;
        let model = train(&words, order);
        let counts = oracle_counts(&words, order);
        for p in probes.iter().chain(words.iter().map(|(w, _)| w)) {
            let got = model.score(p).unwrap();
            let want = oracle_score(&counts, p, order);
            prop_assert!((got - want).abs() < 1e-9, "{p}: {got} vs {want}");
            prop_assert!(got <= 0.0);
        }
    }

    #[test]
    fn serialization_round_trips(words in word_list(), order in 2usize..6) {
        let model = train(&words, order);
        let bytes = model.to_bytes();
        let back = PositionalNgramModel::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}

#[test]
fn rank_picks_halve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 1_000_000;
    let mut hist = [0u32; 5];
    for _ in 0..draws {
        hist[pick_rank(5, &mut rng).unwrap()] += 1;
    }
    let expected = [0.5, 0.25, 0.125, 0.0625, 0.0625];
    for (i, (&h, e)) in hist.iter().zip(expected).enumerate() {
        let f = h as f64 / draws as f64;
        assert!((f - e).abs() <= 0.005, "rank {i}: {f} vs {e}");
    }
}

#[test]
fn next_char_follows_ranked_continuations() {
    let words: Vec<(String, u64)> = [("taks", 6), ("tabs", 3), ("tass", 1)].iter().map(|(w, n)| (w.to_string(), *n)).collect();
    let model = train(&words, 3);
    let ranked: Vec<char> = model.continuations("ta", Zone::Initial).iter().map(|c| c.ch).collect();
    assert_eq!(ranked, ['k', 'b', 's']);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut hist = BTreeMap::new();
    for _ in 0..40_000 {
        *hist.entry(model.next_char("ta", Zone::Initial, &mut rng).unwrap()).or_insert(0u32) += 1;
    }
    let f = |c| hist[&c] as f64 / 40_000.0;
    assert!((f('k') - 0.5).abs() < 0.01);
    assert!((f('b') - 0.25).abs() < 0.01);
    assert!((f('s') - 0.25).abs() < 0.01);
    assert_eq!(model.next_char("qq", Zone::Medial, &mut rng), None);
}

#[test]
fn malformed_model_files_fail_with_location() {
    let good = "posgram v1 order=3 alphabet=ab\nINITIAL\t\ta\t2\n";
    assert!(PositionalNgramModel::from_bytes(good.as_bytes()).is_ok());
    for (bad, line) in [
        ("posgram v1 order=3 alphabet=ab\nINITIAL\t\tc\t2\n", 2),
        ("posgram v1 order=3 alphabet=ab\nINITIAL\t\ta\n", 2),
        ("posgram v1 order=3 alphabet=ab\nINITIAL\t\ta\t1\nMIDDLE\ta\tb\t1\n", 3),
        ("posgram v1 order=2 alphabet=ab\nMEDIAL\tab\ta\t1\n", 2),
        ("posgram v9 order=3 alphabet=ab\n", 1),
    ] {
        match PositionalNgramModel::from_bytes(bad.as_bytes()) {
            Err(nonword_core::ModelError::Format { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
            other => panic!("{bad:?}: {other:?}"),
        }
    }
}
