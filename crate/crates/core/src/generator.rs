//! Candidate generation: exhaustive enumeration for short lengths and
//! model-driven sampling for long ones.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Alphabet;
use crate::lm::{pick_rank, PositionalNgramModel, Zone};

pub const MIN_LENGTH: usize = 2;
pub const MAX_EXHAUSTIVE_LENGTH: usize = 5;
pub const MIN_SAMPLED_LENGTH: usize = 6;
pub const MAX_LENGTH: usize = 11;

pub const DEFAULT_MAX_RESTARTS: usize = 1000;
pub const DEFAULT_ATTEMPTS_PER_WORD: usize = 50;

/// Raw words drawn per seeded shard in [`sample_batch_seeded`].
pub const SHARD_SIZE: usize = 64;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("exhaustive generation covers lengths {MIN_LENGTH}..={MAX_EXHAUSTIVE_LENGTH}, got {0}; sample longer words instead")]
    ExhaustiveLength(usize),
    #[error("sampled lengths are {MIN_SAMPLED_LENGTH}..={MAX_LENGTH}, got {0}")]
    SampledLength(usize),
    #[error("model has no word-initial characters")]
    NoInitialChars,
    #[error("generation exhausted after {restarts} restarts")]
    Exhausted { restarts: usize },
    #[error("only {} of {requested} distinct words after {attempts} attempts", generated.len())]
    Partial { generated: Vec<Candidate>, requested: usize, attempts: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Exhaustive,
    Sampled,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Exhaustive => "EXHAUSTIVE",
            Provenance::Sampled => "SAMPLED",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EXHAUSTIVE" => Ok(Provenance::Exhaustive),
            "SAMPLED" => Ok(Provenance::Sampled),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// A generated letter string with the scores assigned to it so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
}

impl Candidate {
    pub fn new(text: impl Into<String>, provenance: Provenance) -> Self {
        Candidate { text: text.into(), provenance, scores: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn score(&self, model_id: &str) -> Option<f64> {
        self.scores.get(model_id).copied()
    }
}

/// |alphabet|^length, the size of the exhaustive candidate space.
pub fn candidate_space(alphabet_size: usize, length: u32) -> u128 {
    (alphabet_size as u128).pow(length)
}

/// Lexicographic odometer over all strings of one length.
#[derive(Debug, Clone)]
pub struct Exhaustive {
    chars: Vec<char>,
    digits: Vec<usize>,
    remaining: u64,
}

impl Iterator for Exhaustive {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if self.remaining == 0 {
            return None;
        }
        let text: String = self.digits.iter().map(|&d| self.chars[d]).collect();
        self.remaining -= 1;
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.chars.len() {
                break;
            }
            *d = 0;
        }
        Some(Candidate::new(text, Provenance::Exhaustive))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Exhaustive {}

/// Every string of `length` characters over `alphabet`, in alphabet order.
pub fn exhaustive(alphabet: &Alphabet, length: usize) -> Result<Exhaustive, GenerateError> {
    if !(MIN_LENGTH..=MAX_EXHAUSTIVE_LENGTH).contains(&length) {
        return Err(GenerateError::ExhaustiveLength(length));
    }
    Ok(Exhaustive {
        chars: alphabet.chars().to_vec(),
        digits: vec![0; length],
        remaining: candidate_space(alphabet.len(), length as u32) as u64,
    })
}

/// Samples one word of exactly `target_length` characters. A dead end
/// (empty continuation set) restarts the word from a fresh first character.
pub fn sample_word<R: Rng + ?Sized>(
    model: &PositionalNgramModel,
    target_length: usize,
    rng: &mut R,
    max_restarts: usize,
) -> Result<Candidate, GenerateError> {
    if !(MIN_SAMPLED_LENGTH..=MAX_LENGTH).contains(&target_length) {
        return Err(GenerateError::SampledLength(target_length));
    }
    if max_restarts == 0 {
        return Err(GenerateError::InvalidArgument("max_restarts must be at least 1".into()));
    }
    let initial = model.initial_indices();
    if initial.is_empty() {
        return Err(GenerateError::NoInitialChars);
    }
    let keep = model.order() - 1;
    let mut word: Vec<u16> = Vec::with_capacity(target_length);
    'attempt: for _ in 0..=max_restarts {
        word.clear();
        word.push(initial[rng.gen_range(0..initial.len() as u32) as usize]);
        for i in 1..target_length {
            let stub = &word[i.saturating_sub(keep)..i];
            let ranked = model.ranked_indices(Zone::of(i, target_length), stub);
            match pick_rank(ranked.len(), rng) {
                Some(r) => word.push(ranked[r]),
                None => continue 'attempt,
            }
        }
        return Ok(Candidate::new(model.alphabet().decode(&word), Provenance::Sampled));
    }
    Err(GenerateError::Exhausted { restarts: max_restarts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub max_restarts: usize,
    /// Raw draws allowed before giving up; `None` means 50 × count.
    pub max_attempts: Option<usize>,
    /// Threads for [`sample_batch_seeded`]. Output does not depend on it.
    pub workers: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { max_restarts: DEFAULT_MAX_RESTARTS, max_attempts: None, workers: 1 }
    }
}

impl BatchOptions {
    fn attempts_for(&self, count: usize) -> usize {
        self.max_attempts.unwrap_or(count.saturating_mul(DEFAULT_ATTEMPTS_PER_WORD))
    }
}

/// Collects distinct words in first-drawn order.
struct Distinct {
    seen: HashSet<String>,
    words: Vec<Candidate>,
    attempts: usize,
    count: usize,
    max_attempts: usize,
}

impl Distinct {
    fn new(count: usize, max_attempts: usize) -> Self {
        Distinct { seen: HashSet::with_capacity(count), words: Vec::with_capacity(count), attempts: 0, count, max_attempts }
    }

    fn done(&self) -> bool {
        self.words.len() >= self.count
    }

    /// Feeds one raw draw; returns an error once the attempt budget is spent.
    fn offer(&mut self, word: Candidate) -> Result<(), GenerateError> {
        self.attempts += 1;
        if self.seen.insert(word.text.clone()) {
            self.words.push(word);
        }
        if !self.done() && self.attempts >= self.max_attempts {
            return Err(self.partial());
        }
        Ok(())
    }

    fn partial(&mut self) -> GenerateError {
        GenerateError::Partial { generated: std::mem::take(&mut self.words), requested: self.count, attempts: self.attempts }
    }
}

/// `count` distinct sampled words from one caller-supplied random stream.
pub fn sample_batch<R: Rng + ?Sized>(
    model: &PositionalNgramModel,
    target_length: usize,
    count: usize,
    rng: &mut R,
    options: &BatchOptions,
) -> Result<Vec<Candidate>, GenerateError> {
    if count == 0 {
        return Err(GenerateError::InvalidArgument("count must be at least 1".into()));
    }
    let mut acc = Distinct::new(count, options.attempts_for(count));
    if acc.max_attempts == 0 {
        return Err(acc.partial());
    }
    while !acc.done() {
        acc.offer(sample_word(model, target_length, rng, options.max_restarts)?)?;
    }
    Ok(acc.words)
}

/// Seeded random source for shard `index` of a run seeded with `seed`.
pub fn shard_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_shard(
    model: &PositionalNgramModel,
    target_length: usize,
    seed: u64,
    index: u64,
    max_restarts: usize,
) -> Vec<Result<Candidate, GenerateError>> {
    let mut rng = shard_rng(seed, index);
    let mut out = Vec::with_capacity(SHARD_SIZE);
    for _ in 0..SHARD_SIZE {
        let word = sample_word(model, target_length, &mut rng, max_restarts);
        let failed = word.is_err();
        out.push(word);
        if failed {
            break;
        }
    }
    out
}

/// Like [`sample_batch`], but draws from fixed-size shards, each with its
/// own ChaCha8 stream derived from `seed`. Shards are merged in index order,
/// so the result depends only on the seed, never on `options.workers`.
pub fn sample_batch_seeded(
    model: &PositionalNgramModel,
    target_length: usize,
    count: usize,
    seed: u64,
    options: &BatchOptions,
) -> Result<Vec<Candidate>, GenerateError> {
    if count == 0 {
        return Err(GenerateError::InvalidArgument("count must be at least 1".into()));
    }
    if !(MIN_SAMPLED_LENGTH..=MAX_LENGTH).contains(&target_length) {
        return Err(GenerateError::SampledLength(target_length));
    }
    let workers = options.workers.max(1) as u64;
    let mut acc = Distinct::new(count, options.attempts_for(count));
    if acc.max_attempts == 0 {
        return Err(acc.partial());
    }
    let mut next_shard = 0u64;
    while !acc.done() {
        let wave: Vec<Vec<Result<Candidate, GenerateError>>> = if workers == 1 {
            vec![draw_shard(model, target_length, seed, next_shard, options.max_restarts)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (next_shard..next_shard + workers)
                    .map(|index| scope.spawn(move || draw_shard(model, target_length, seed, index, options.max_restarts)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
            })
        };
        next_shard += wave.len() as u64;
        for word in wave.into_iter().flatten() {
            acc.offer(word?)?;
            if acc.done() {
                break;
            }
        }
    }
    Ok(acc.words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordFrequencyTable;

    fn model(words: &[(&str, u64)]) -> PositionalNgramModel {
        let mut t = WordFrequencyTable::new(Alphabet::swedish());
        for (w, c) in words {
            t.add(w, *c);
        }
        PositionalNgramModel::train(&t, 4).unwrap()
    }

    #[test]
    fn exhaustive_small_alphabet() {
        let ab = Alphabet::new("ab".chars()).unwrap();
        let words: Vec<String> = exhaustive(&ab, 2).unwrap().map(|c| c.text).collect();
        assert_eq!(words, ["aa", "ab", "ba", "bb"]);
    }

    #[test]
    fn exhaustive_length_three_extremes() {
        let sv = Alphabet::swedish();
        let it = exhaustive(&sv, 3).unwrap();
        assert_eq!(it.len(), 24_389);
        let all: Vec<Candidate> = it.collect();
        assert_eq!(all.len(), 24_389);
        assert_eq!(all[0].text, "aaa");
        assert_eq!(all.last().unwrap().text, "ööö");
        assert!(all.iter().all(|c| c.provenance == Provenance::Exhaustive));
        let distinct: HashSet<&str> = all.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(distinct.len(), all.len());
        assert!(all.windows(2).all(|w| sv.compare(&w[0].text, &w[1].text).is_lt()));
    }

    #[test]
    fn exhaustive_rejects_out_of_range() {
        for len in [0, 1, 6, 11] {
            assert!(matches!(exhaustive(&Alphabet::swedish(), len), Err(GenerateError::ExhaustiveLength(_))));
        }
    }

    #[test]
    fn candidate_space_arithmetic() {
        assert_eq!(candidate_space(29, 2), 841);
        assert_eq!(candidate_space(29, 5), 20_511_149);
        assert_eq!(candidate_space(29, 6), 594_823_321);
    }

    #[test]
    fn single_path_model_yields_its_word() {
        let m = model(&[("abcdef", 1)]);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(sample_word(&m, 6, &mut rng, 10).unwrap().text, "abcdef");
        }
    }

    #[test]
    fn dead_end_model_exhausts() {
        // no FINAL continuation exists for any 6-letter path
        let m = model(&[("abcdefg", 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_word(&m, 6, &mut rng, 5), Err(GenerateError::Exhausted { restarts: 5 })));
    }

    #[test]
    fn sample_word_length_bounds() {
        let m = model(&[("abcdef", 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_word(&m, 5, &mut rng, 10), Err(GenerateError::SampledLength(5))));
        assert!(matches!(sample_word(&m, 12, &mut rng, 10), Err(GenerateError::SampledLength(12))));
    }

    #[test]
    fn batch_reports_partial_result() {
        let m = model(&[("abcdef", 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = BatchOptions { max_attempts: Some(10), ..Default::default() };
        match sample_batch(&m, 6, 2, &mut rng, &opts) {
            Err(GenerateError::Partial { generated, requested: 2, attempts: 10 }) => {
                assert_eq!(generated.len(), 1);
                assert_eq!(generated[0].text, "abcdef");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(sample_batch(&m, 6, 1, &mut rng, &BatchOptions::default()).unwrap().len(), 1);
    }

    #[test]
    fn seeded_batch_ignores_worker_count() {
        let m = model(&[("abcdef", 3), ("abdefg", 2), ("bacdeg", 1), ("bbcdef", 1), ("acbdef", 1)]);
        let one = sample_batch_seeded(&m, 6, 5, 9, &BatchOptions::default()).unwrap();
        let four = sample_batch_seeded(&m, 6, 5, 9, &BatchOptions { workers: 4, ..Default::default() }).unwrap();
        assert_eq!(one, four);
    }
}
