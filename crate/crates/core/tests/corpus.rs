use std::collections::{BTreeMap, BTreeSet};

use nonword_core::corpus::{extract_words, load_lexicon, read_frequency_list};
use nonword_core::{Alphabet, TransliterationTable};
use proptest::prelude::*;
use regex::Regex;

const TEXT_CHARS: &[char] = &[
    'a', 'b', 'e', 'k', 'n', 's', 't', 'z', 'å', 'ä', 'ö', 'A', 'K', 'Å', 'Ö', 'é', 'ß', 'ü', '1', '7', ' ', ' ', ' ', '\n', '.', ',', '-',
    '\'', '!', '\t',
];

/// Independent tokenizer: regex letter runs, lowercased, kept when every
/// character belongs to the alphabet and the run is at least two long.
fn regex_counts(text: &str, alphabet: &Alphabet) -> BTreeMap<String, u64> {
    let letters = Regex::new(r"\p{Alphabetic}+").unwrap();
    let mut out = BTreeMap::new();
    for m in letters.find_iter(text) {
        let w = m.as_str().to_lowercase();
        if w.chars().count() >= 2 && w.chars().all(|c| alphabet.contains(c)) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

proptest! {
    #[test]
    fn extraction_matches_regex_scan(idx in prop::collection::vec(0..TEXT_CHARS.len(), 0..400)) {
        let text: String = idx.iter().map(|&i| TEXT_CHARS[i]).collect();
        let sv = Alphabet::swedish();
        let table = extract_words(text.as_bytes(), &sv).unwrap();
        let got: BTreeMap<String, u64> = table.iter().map(|(w, c)| (w.to_string(), c)).collect();
        prop_assert_eq!(got, regex_counts(&text, &sv));
    }

    #[test]
    fn lexicon_matches_sorted_unique_list(words in prop::collection::vec("[a-zåäö]{1,7}", 0..200)) {
        let text = words.join("\n");
        let lex = load_lexicon(text.as_bytes(), "".as_bytes()).unwrap();
        let unique: BTreeSet<&String> = words.iter().collect();
        prop_assert_eq!(lex.len(), unique.len());
        for w in &unique {
            prop_assert!(lex.is_word(w));
        }
        for len in 1..=7 {
            let expected: Vec<&str> = unique.iter().filter(|w| w.chars().count() == len).map(|w| w.as_str()).collect();
            prop_assert_eq!(lex.words_of_length(len), expected);
        }
    }
}

#[test]
fn frequency_list_rejects_bad_counts_with_line_number() {
    let sv = Alphabet::swedish();
    let err = read_frequency_list("hus\t3\nbil\tmånga\n".as_bytes(), &sv).unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
    let ok = read_frequency_list("# comment\nHus\t3\nhus\t2\nbil\n9x\t4\n".as_bytes(), &sv).unwrap();
    assert_eq!(ok.get("hus"), 5);
    assert_eq!(ok.get("bil"), 1);
    assert_eq!(ok.len(), 2);
}

#[test]
fn exclusions_are_case_insensitive() {
    let lex = load_lexicon("hus\n".as_bytes(), "Anna\nSVT\n".as_bytes()).unwrap();
    assert!(lex.is_excluded("anna"));
    assert!(lex.is_excluded("svt"));
    assert!(lex.is_word("Hus"));
    assert!(!lex.is_word("anna"));
}

#[test]
fn swedish_wordlist_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/wordfreq/sv.tsv");
    let table = read_frequency_list(std::io::BufReader::new(std::fs::File::open(path).unwrap()), &Alphabet::swedish()).unwrap();
    assert!(table.total_tokens() >= 100_000);
    assert!(table.len() > 5_000);
    assert!(table.iter().all(|(w, _)| w.chars().all(|c| Alphabet::swedish().contains(c))));
}

#[test]
fn arabic_output_stays_in_target_alphabet() {
    let table = TransliterationTable::arabic_default();
    let text = "كَتَبَ الوَلَدُ الدَّرْسَ، ثُمَّ ذَهَبَ إِلَى البَيْتِ؟ مَدْرَسَة";
    let out = table.transliterate(text).unwrap();
    assert!(out.chars().all(|c| c == ' ' || table.target().contains(c)), "{out}");
    assert!(out.split_whitespace().any(|w| w == "kataba"), "{out}");
    assert!(out.contains("ddarsa"), "{out}");
}
