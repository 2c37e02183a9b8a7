//! Candidate filters: existing words, exclusions, low model probability.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, Lexicon};
use crate::generator::Candidate;
use crate::lm::PositionalNgramModel;

/// Percentile of real-word per-character scores used as the default
/// low-probability threshold.
pub const DEFAULT_THRESHOLD_PERCENTILE: f64 = 5.0;

/// Counts for one or more filter stages.
/// `input_count = output_count + removed_lexicon + removed_exclusion + removed_low_probability`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: u64,
    pub removed_lexicon: u64,
    pub removed_exclusion: u64,
    pub removed_low_probability: u64,
    /// Subset of `removed_low_probability` that could not be scored at all.
    pub unscorable: u64,
    pub output_count: u64,
}

impl FilterReport {
    pub fn removed(&self) -> u64 {
        self.removed_lexicon + self.removed_exclusion + self.removed_low_probability
    }

    pub fn is_balanced(&self) -> bool {
        self.input_count == self.output_count + self.removed()
    }

    /// Report for running `self`'s stage and then `next`'s.
    pub fn then(self, next: FilterReport) -> FilterReport {
        FilterReport {
            input_count: self.input_count,
            removed_lexicon: self.removed_lexicon + next.removed_lexicon,
            removed_exclusion: self.removed_exclusion + next.removed_exclusion,
            removed_low_probability: self.removed_low_probability + next.removed_low_probability,
            unscorable: self.unscorable + next.unscorable,
            output_count: next.output_count,
        }
    }

    /// `key=value` lines, one per field.
    pub fn to_key_values(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FilterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input_count={}", self.input_count)?;
        writeln!(f, "removed_lexicon={}", self.removed_lexicon)?;
        writeln!(f, "removed_exclusion={}", self.removed_exclusion)?;
        writeln!(f, "removed_low_probability={}", self.removed_low_probability)?;
        writeln!(f, "unscorable={}", self.unscorable)?;
        writeln!(f, "output_count={}", self.output_count)
    }
}

/// Streaming lexicon filter; call [`LexiconFilter::report`] once drained.
pub struct LexiconFilter<'a, I> {
    inner: I,
    lexicon: &'a Lexicon,
    report: FilterReport,
}

impl<I: Iterator<Item = Candidate>> Iterator for LexiconFilter<'_, I> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        for candidate in self.inner.by_ref() {
            self.report.input_count += 1;
            if self.lexicon.is_word(&candidate.text) {
                self.report.removed_lexicon += 1;
            } else if self.lexicon.is_excluded(&candidate.text) {
                self.report.removed_exclusion += 1;
            } else {
                self.report.output_count += 1;
                return Some(candidate);
            }
        }
        None
    }
}

impl<I> LexiconFilter<'_, I> {
    pub fn report(&self) -> FilterReport {
        self.report
    }
}

/// Keeps candidates that are neither lexicon words nor exclusions.
pub fn filter_lexicon<I: IntoIterator<Item = Candidate>>(candidates: I, lexicon: &Lexicon) -> LexiconFilter<'_, I::IntoIter> {
    LexiconFilter { inner: candidates.into_iter(), lexicon, report: FilterReport::default() }
}

pub struct ProbabilityFilter<'a, I> {
    inner: I,
    model: &'a PositionalNgramModel,
    threshold: f64,
    report: FilterReport,
}

impl<I: Iterator<Item = Candidate>> Iterator for ProbabilityFilter<'_, I> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        for candidate in self.inner.by_ref() {
            self.report.input_count += 1;
            match self.model.score_per_char(&candidate.text) {
                Ok(mean) if mean >= self.threshold => {
                    self.report.output_count += 1;
                    return Some(candidate);
                }
                Ok(_) => self.report.removed_low_probability += 1,
                Err(_) => {
                    self.report.removed_low_probability += 1;
                    self.report.unscorable += 1;
                }
            }
        }
        None
    }
}

impl<I> ProbabilityFilter<'_, I> {
    pub fn report(&self) -> FilterReport {
        self.report
    }
}

/// Drops candidates whose mean per-character log-likelihood is below
/// `per_char_threshold`. Unscorable candidates are dropped and counted.
pub fn filter_low_probability<'a, I: IntoIterator<Item = Candidate>>(
    candidates: I,
    model: &'a PositionalNgramModel,
    per_char_threshold: f64,
) -> ProbabilityFilter<'a, I::IntoIter> {
    ProbabilityFilter { inner: candidates.into_iter(), model, threshold: per_char_threshold, report: FilterReport::default() }
}

/// The 5th percentile (nearest rank) of per-character scores of lexicon
/// words with `length` characters. `None` when no such word is scorable.
pub fn default_threshold(model: &PositionalNgramModel, lexicon: &Lexicon, length: usize) -> Option<f64> {
    let mut scores: Vec<f64> =
        lexicon.words().filter(|w| w.chars().count() == length).filter_map(|w| model.score_per_char(w).ok()).collect();
    percentile(&mut scores, DEFAULT_THRESHOLD_PERCENTILE)
}

/// Nearest-rank percentile.
pub fn percentile(values: &mut [f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * values.len() as f64).ceil() as usize;
    Some(values[rank.clamp(1, values.len()) - 1])
}

/// Coltheart's N: lexicon words reachable by substituting exactly one
/// character of `word` with a different alphabet character.
pub fn neighborhood_size(word: &str, lexicon: &Lexicon, alphabet: &Alphabet) -> usize {
    let mut chars: Vec<char> = word.chars().collect();
    let mut variant = String::with_capacity(word.len() + 4);
    let mut n = 0;
    for i in 0..chars.len() {
        let original = chars[i];
        for &c in alphabet.chars() {
            if c == original {
                continue;
            }
            chars[i] = c;
            variant.clear();
            variant.extend(&chars);
            if lexicon.is_word(&variant) {
                n += 1;
            }
        }
        chars[i] = original;
    }
    n
}
