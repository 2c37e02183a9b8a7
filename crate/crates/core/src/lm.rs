//! Position-aware character n-gram model.
//!
//! Counts are kept separately for three word zones (INITIAL, MEDIAL,
//! FINAL) so the model learns which characters start, continue and end
//! words. Probabilities are plain relative frequencies within a context.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::corpus::{Alphabet, WordFrequencyTable};

pub const DEFAULT_ORDER: usize = 4;

/// ln(1e-7), contributed by a character no context level has seen.
pub const FLOOR_LOG_PROB: f64 = -16.11809565095832;

const FORMAT_MAGIC: &str = "posgram";
const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot train on an empty frequency table")]
    EmptyTable,
    #[error("model order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("{word:?} contains {ch:?}, which is outside the model alphabet")]
    ForeignChar { word: String, ch: char },
    #[error("{0:?} is too short to score")]
    TooShort(String),
    #[error("model format error at byte {offset} (line {line}): {message}")]
    Format { offset: usize, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    Initial,
    Medial,
    Final,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::Initial, Zone::Medial, Zone::Final];

    /// Zone of character `index` in a word of `len` characters. The last
    /// character is always FINAL; otherwise the first three are INITIAL.
    pub fn of(index: usize, len: usize) -> Zone {
        if index + 1 == len {
            Zone::Final
        } else if index <= 2 {
            Zone::Initial
        } else {
            Zone::Medial
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Initial => "INITIAL",
            Zone::Medial => "MEDIAL",
            Zone::Final => "FINAL",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Zone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "INITIAL" => Ok(Zone::Initial),
            "MEDIAL" => Ok(Zone::Medial),
            "FINAL" => Ok(Zone::Final),
            other => Err(format!("unknown zone {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuation {
    pub ch: char,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct ContextStats {
    total: u64,
    /// (char index, count, ln p) sorted by char index.
    by_char: Vec<(u16, u64, f64)>,
    /// Char indices by descending count, alphabet order on ties.
    ranked: Vec<u16>,
}

impl ContextStats {
    fn from_counts(counts: &BTreeMap<u16, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let by_char: Vec<(u16, u64, f64)> = counts.iter().map(|(&c, &n)| (c, n, (n as f64 / total as f64).ln())).collect();
        let mut ranked: Vec<(u16, u64)> = counts.iter().map(|(&c, &n)| (c, n)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ContextStats { total, by_char, ranked: ranked.into_iter().map(|(c, _)| c).collect() }
    }

    fn entry(&self, ch: u16) -> Option<&(u16, u64, f64)> {
        self.by_char.binary_search_by_key(&ch, |e| e.0).ok().map(|i| &self.by_char[i])
    }
}

type ZoneTable = HashMap<Vec<u16>, ContextStats>;

/// Accumulates raw counts; `build` freezes them into a model.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    order: usize,
    alphabet: Alphabet,
    counts: [BTreeMap<Vec<u16>, BTreeMap<u16, u64>>; 3],
}

impl ModelBuilder {
    pub fn new(order: usize, alphabet: Alphabet) -> Result<Self, ModelError> {
        if order < 2 {
            return Err(ModelError::InvalidOrder(order));
        }
        Ok(ModelBuilder { order, alphabet, counts: Default::default() })
    }

    /// Counts every character of `word`, `weight` times.
    pub fn add_word(&mut self, word: &str, weight: u64) -> Result<(), ModelError> {
        let encoded = self.alphabet.encode(word).map_err(|ch| ModelError::ForeignChar { word: word.to_string(), ch })?;
        let len = encoded.len();
        for i in 0..len {
            let start = i.saturating_sub(self.order - 1);
            let zone = Zone::of(i, len);
            *self.counts[zone.slot()].entry(encoded[start..i].to_vec()).or_default().entry(encoded[i]).or_insert(0) += weight;
        }
        Ok(())
    }

    fn add_count(&mut self, zone: Zone, context: Vec<u16>, ch: u16, count: u64) {
        *self.counts[zone.slot()].entry(context).or_default().entry(ch).or_insert(0) += count;
    }

    pub fn build(self) -> PositionalNgramModel {
        let mut tables: [ZoneTable; 3] = Default::default();
        for (slot, zone_counts) in self.counts.iter().enumerate() {
            tables[slot] = zone_counts
                .iter()
                .filter(|(_, chars)| !chars.is_empty())
                .map(|(ctx, chars)| (ctx.clone(), ContextStats::from_counts(chars)))
                .collect();
        }
        PositionalNgramModel { order: self.order, alphabet: self.alphabet, tables }
    }
}

/// Zone-conditioned character n-gram counts. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalNgramModel {
    order: usize,
    alphabet: Alphabet,
    tables: [ZoneTable; 3],
}

impl PositionalNgramModel {
    /// Trains on every word of `table`, weighted by its count.
    pub fn train(table: &WordFrequencyTable, order: usize) -> Result<Self, ModelError> {
        if table.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        let mut builder = ModelBuilder::new(order, table.alphabet().clone())?;
        for (word, count) in table.iter() {
            builder.add_word(word, count)?;
        }
        Ok(builder.build())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Number of distinct (zone, context) pairs with observations.
    pub fn context_count(&self) -> usize {
        self.tables.iter().map(HashMap::len).sum()
    }

    fn stats(&self, zone: Zone, context: &[u16]) -> Option<&ContextStats> {
        self.tables[zone.slot()].get(context)
    }

    fn encode_context(&self, context: &str) -> Option<Vec<u16>> {
        self.alphabet.encode(context).ok()
    }

    /// Raw count of `ch` after `context` in `zone`.
    pub fn count(&self, zone: Zone, context: &str, ch: char) -> u64 {
        let (Some(ctx), Some(c)) = (self.encode_context(context), self.alphabet.index_of(ch)) else {
            return 0;
        };
        self.stats(zone, &ctx).and_then(|s| s.entry(c)).map_or(0, |e| e.1)
    }

    pub fn context_total(&self, zone: Zone, context: &str) -> u64 {
        self.encode_context(context).and_then(|ctx| self.stats(zone, &ctx).map(|s| s.total)).unwrap_or(0)
    }

    /// Characters observed after `stub` in `zone`, most probable first.
    /// Empty when the context was never seen.
    pub fn continuations(&self, stub: &str, zone: Zone) -> Vec<Continuation> {
        let Some(ctx) = self.encode_context(stub) else {
            return Vec::new();
        };
        match self.stats(zone, &ctx) {
            Some(stats) => stats
                .ranked
                .iter()
                .map(|&c| Continuation { ch: self.alphabet.char_at(c), log_likelihood: stats.entry(c).expect("ranked entry").2 })
                .collect(),
            None => Vec::new(),
        }
    }

    pub(crate) fn ranked_indices(&self, zone: Zone, context: &[u16]) -> &[u16] {
        self.stats(zone, context).map_or(&[], |s| s.ranked.as_slice())
    }

    /// Characters observed word-initially with an empty context, in alphabet order.
    pub fn initial_chars(&self) -> Vec<char> {
        self.initial_indices().iter().map(|&c| self.alphabet.char_at(c)).collect()
    }

    pub(crate) fn initial_indices(&self) -> Vec<u16> {
        self.stats(Zone::Initial, &[]).map_or_else(Vec::new, |s| s.by_char.iter().map(|e| e.0).collect())
    }

    /// Stochastic next character: walk the ranked continuations, accepting
    /// each with probability one half; fall through to the last one. `None`
    /// when the context has no continuations.
    pub fn next_char<R: Rng + ?Sized>(&self, stub: &str, zone: Zone, rng: &mut R) -> Option<char> {
        let ctx = self.encode_context(stub)?;
        let ranked = self.ranked_indices(zone, &ctx);
        pick_rank(ranked.len(), rng).map(|i| self.alphabet.char_at(ranked[i]))
    }

    /// Natural-log likelihood of `word`, summed over characters.
    pub fn score(&self, word: &str) -> Result<f64, ModelError> {
        let encoded = self.alphabet.encode(word).map_err(|ch| ModelError::ForeignChar { word: word.to_string(), ch })?;
        if encoded.len() < 2 {
            return Err(ModelError::TooShort(word.to_string()));
        }
        Ok(self.score_encoded(&encoded))
    }

    /// Score divided by the number of characters.
    pub fn score_per_char(&self, word: &str) -> Result<f64, ModelError> {
        let n = word.chars().count();
        self.score(word).map(|s| s / n as f64)
    }

    pub(crate) fn score_encoded(&self, word: &[u16]) -> f64 {
        let len = word.len();
        (0..len)
            .map(|i| {
                let start = i.saturating_sub(self.order - 1);
                self.log_prob(Zone::of(i, len), &word[start..i], word[i])
            })
            .sum()
    }

    /// Longest context suffix in `zone` that has seen `ch`; floor otherwise.
    fn log_prob(&self, zone: Zone, context: &[u16], ch: u16) -> f64 {
        for start in 0..=context.len() {
            if let Some(entry) = self.stats(zone, &context[start..]).and_then(|s| s.entry(ch)) {
                return entry.2;
            }
        }
        FLOOR_LOG_PROB
    }

    /// Writes the text model format: a header line, then one
    /// `zone<TAB>context<TAB>char<TAB>count` line per entry.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION} order={} alphabet={}", self.order, self.alphabet)?;
        for zone in Zone::ALL {
            let mut contexts: Vec<(&Vec<u16>, &ContextStats)> = self.tables[zone.slot()].iter().collect();
            contexts.sort_by(|a, b| a.0.cmp(b.0));
            for (ctx, stats) in contexts {
                let ctx = self.alphabet.decode(ctx);
                for &(c, n, _) in &stats.by_char {
                    writeln!(out, "{zone}\t{ctx}\t{}\t{n}", self.alphabet.char_at(c))?;
                }
            }
        }
        out.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    /// Parses the text model format. Fails without returning a partial
    /// model on any malformed line.
    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self, ModelError> {
        let mut offset = 0;
        let mut line_no = 0;
        let mut line = String::new();
        let format_err = |offset, line, message: String| ModelError::Format { offset, line, message };

        let mut next_line = |line: &mut String, offset: &mut usize, line_no: &mut usize| -> Result<Option<usize>, ModelError> {
            line.clear();
            let start = *offset;
            let n = input.read_line(line).map_err(|e| {
                if e.kind() == io::ErrorKind::InvalidData {
                    format_err(start, *line_no + 1, "invalid UTF-8".into())
                } else {
                    ModelError::Io(e)
                }
            })?;
            *offset += n;
            *line_no += 1;
            if line.ends_with('\n') {
                line.pop();
                if line.ends_with('\r') {
                    line.pop();
                }
            }
            Ok((n > 0).then_some(start))
        };

        let Some(start) = next_line(&mut line, &mut offset, &mut line_no)? else {
            return Err(format_err(0, 1, "empty model file".into()));
        };
        let (order, alphabet) = parse_header(&line).map_err(|m| format_err(start, 1, m))?;
        let mut builder = ModelBuilder::new(order, alphabet).map_err(|e| format_err(start, 1, e.to_string()))?;

        while let Some(start) = next_line(&mut line, &mut offset, &mut line_no)? {
            if line.is_empty() {
                continue;
            }
            let (zone, ctx, ch, count) = parse_entry(&line, &builder).map_err(|m| format_err(start, line_no, m))?;
            builder.add_count(zone, ctx, ch, count);
        }
        Ok(builder.build())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        Self::read_from(bytes)
    }
}

fn parse_header(line: &str) -> Result<(usize, Alphabet), String> {
    let rest = line.strip_prefix(FORMAT_MAGIC).and_then(|r| r.strip_prefix(' ')).ok_or_else(|| "missing posgram header".to_string())?;
    let (version, rest) = rest.split_once(' ').ok_or("truncated header")?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version:?}"));
    }
    let (order, rest) = rest.split_once(' ').ok_or("truncated header")?;
    let order = order.strip_prefix("order=").and_then(|o| o.parse::<usize>().ok()).ok_or_else(|| format!("bad order field {order:?}"))?;
    let chars = rest.strip_prefix("alphabet=").ok_or("missing alphabet field")?;
    let alphabet = Alphabet::new(chars.chars()).map_err(|e| e.to_string())?;
    Ok((order, alphabet))
}

fn parse_entry(line: &str, builder: &ModelBuilder) -> Result<(Zone, Vec<u16>, u16, u64), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [zone, ctx, ch, count] = fields[..] else {
        return Err(format!("expected 4 tab-separated fields, got {}", fields.len()));
    };
    let zone: Zone = zone.parse()?;
    let ctx = builder.alphabet.encode(ctx).map_err(|c| format!("context has foreign character {c:?}"))?;
    if ctx.len() >= builder.order {
        return Err(format!("context of length {} exceeds order {}", ctx.len(), builder.order));
    }
    let mut chars = ch.chars();
    let ch = match (chars.next(), chars.next()) {
        (Some(c), None) => builder.alphabet.index_of(c).ok_or(format!("foreign character {c:?}"))?,
        _ => return Err(format!("expected a single character, got {ch:?}")),
    };
    let count: u64 = count.parse().map_err(|_| format!("bad count {count:?}"))?;
    if count == 0 {
        return Err("zero count".into());
    }
    Ok((zone, ctx, ch, count))
}

/// Index chosen from a ranked list of `k` items: each item in turn is
/// accepted when a uniform draw is at least 0.5; the last item catches
/// the fall-through. `None` when `k` is zero.
pub fn pick_rank<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Option<usize> {
    if k == 0 {
        return None;
    }
    for i in 0..k {
        let r: f64 = rng.gen();
        if r >= 0.5 {
            return Some(i);
        }
    }
    Some(k - 1)
}
