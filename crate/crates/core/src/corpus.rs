//! Corpus ingestion: alphabets, word-frequency tables, lexicons and
//! transliteration onto a shared Latin alphabet.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead};

use thiserror::Error;

/// Minimum token length kept for training.
pub const MIN_WORD_LEN: usize = 2;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 text near line {line}")]
    InputFormat { line: usize },
    #[error("malformed line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid alphabet: {0}")]
    Alphabet(String),
    #[error("cannot transliterate {ch:?} (U+{code:04X}) at offset {offset}")]
    Transliteration { ch: char, code: u32, offset: usize },
    #[error("transliteration table has no rules")]
    EmptyTable,
    #[error(transparent)]
    Io(io::Error),
}

impl CorpusError {
    fn from_io(err: io::Error, line: usize) -> Self {
        if err.kind() == io::ErrorKind::InvalidData {
            CorpusError::InputFormat { line }
        } else {
            CorpusError::Io(err)
        }
    }
}

/// An ordered character set. The declared order is the collation used for
/// enumeration and for all tie-breaks.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, u16>,
}

impl Alphabet {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Result<Self, CorpusError> {
        let chars: Vec<char> = chars.into_iter().collect();
        if chars.is_empty() {
            return Err(CorpusError::Alphabet("alphabet is empty".into()));
        }
        if chars.len() > u16::MAX as usize {
            return Err(CorpusError::Alphabet("alphabet is too large".into()));
        }
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if c.is_whitespace() || c.is_control() {
                return Err(CorpusError::Alphabet(format!("{c:?} cannot be an alphabet member")));
            }
            if index.insert(c, i as u16).is_some() {
                return Err(CorpusError::Alphabet(format!("duplicate character {c:?}")));
            }
        }
        Ok(Alphabet { chars, index })
    }

    /// a–z followed by å, ä, ö.
    pub fn swedish() -> Self {
        Self::new(('a'..='z').chain(['å', 'ä', 'ö'])).expect("static alphabet")
    }

    /// a–z.
    pub fn latin() -> Self {
        Self::new('a'..='z').expect("static alphabet")
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn index_of(&self, c: char) -> Option<u16> {
        self.index.get(&c).copied()
    }

    pub fn char_at(&self, i: u16) -> char {
        self.chars[i as usize]
    }

    /// Simple one-to-one lowercase mapping restricted to this alphabet.
    pub fn fold(&self, c: char) -> Option<char> {
        if self.contains(c) {
            return Some(c);
        }
        let mut lower = c.to_lowercase();
        match (lower.next(), lower.next()) {
            (Some(l), None) if self.contains(l) => Some(l),
            _ => None,
        }
    }

    /// Encodes `word` as alphabet indices, or returns the first foreign character.
    pub fn encode(&self, word: &str) -> Result<Vec<u16>, char> {
        word.chars().map(|c| self.index_of(c).ok_or(c)).collect()
    }

    pub fn decode(&self, indices: &[u16]) -> String {
        indices.iter().map(|&i| self.char_at(i)).collect()
    }

    /// Compares two strings by the declared character order. Characters
    /// outside the alphabet sort after all members, by code point.
    pub fn compare(&self, a: &str, b: &str) -> Ordering {
        let key = |c: char| match self.index_of(c) {
            Some(i) => (0u8, i as u32),
            None => (1u8, c as u32),
        };
        a.chars().map(key).cmp(b.chars().map(key))
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.chars.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Alphabet({self})")
    }
}

/// Training word counts over a declared alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordFrequencyTable {
    alphabet: Alphabet,
    entries: BTreeMap<String, u64>,
}

impl WordFrequencyTable {
    pub fn new(alphabet: Alphabet) -> Self {
        WordFrequencyTable { alphabet, entries: BTreeMap::new() }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Folds `token` onto the alphabet and adds `count` occurrences.
    /// Returns false (and records nothing) when the token is too short, has
    /// a foreign character, or `count` is zero.
    pub fn add(&mut self, token: &str, count: u64) -> bool {
        if count == 0 {
            return false;
        }
        let folded: Option<String> = token.chars().map(|c| self.alphabet.fold(c)).collect();
        match folded {
            Some(word) if word.chars().count() >= MIN_WORD_LEN => {
                *self.entries.entry(word).or_insert(0) += count;
                true
            }
            _ => false,
        }
    }

    pub fn merge(&mut self, other: &WordFrequencyTable) {
        for (word, &count) in &other.entries {
            self.add(word, count);
        }
    }

    pub fn get(&self, word: &str) -> u64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Words sorted by descending count, ties in alphabet order.
    pub fn most_frequent(&self, n: usize) -> Vec<(&str, u64)> {
        let mut all: Vec<(&str, u64)> = self.iter().collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| self.alphabet.compare(a.0, b.0)));
        all.truncate(n);
        all
    }
}

/// Tokenizes running text into maximal letter runs and counts the ones that
/// fold onto `alphabet` with at least two characters.
pub fn extract_words<R: BufRead>(mut reader: R, alphabet: &Alphabet) -> Result<WordFrequencyTable, CorpusError> {
    let mut table = WordFrequencyTable::new(alphabet.clone());
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        line_no += 1;
        let n = reader.read_line(&mut line).map_err(|e| CorpusError::from_io(e, line_no))?;
        if n == 0 {
            break;
        }
        add_tokens(&mut table, &line);
    }
    Ok(table)
}

pub fn extract_words_str(text: &str, alphabet: &Alphabet) -> WordFrequencyTable {
    let mut table = WordFrequencyTable::new(alphabet.clone());
    add_tokens(&mut table, text);
    table
}

fn add_tokens(table: &mut WordFrequencyTable, text: &str) {
    for token in text.split(|c: char| !c.is_alphabetic()) {
        if !token.is_empty() {
            table.add(token, 1);
        }
    }
}

/// Reads a `word<TAB>count` list (count defaults to 1). Words that do not
/// fold onto the alphabet are skipped, as with running text.
pub fn read_frequency_list<R: BufRead>(reader: R, alphabet: &Alphabet) -> Result<WordFrequencyTable, CorpusError> {
    let mut table = WordFrequencyTable::new(alphabet.clone());
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::from_io(e, i + 1))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or_default().trim();
        let count = match fields.next() {
            Some(c) => c.trim().parse::<u64>().map_err(|_| CorpusError::Malformed { line: i + 1, message: format!("bad count {c:?}") })?,
            None => 1,
        };
        table.add(word, count);
    }
    Ok(table)
}

/// Existing word forms plus an exclusion list (names, abbreviations).
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashSet<String>,
    exclusions: HashSet<String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_word(&mut self, word: &str) {
        if let Some(w) = normalize_entry(word) {
            self.words.insert(w);
        }
    }

    pub fn insert_exclusion(&mut self, word: &str) {
        if let Some(w) = normalize_entry(word) {
            self.exclusions.insert(w);
        }
    }

    /// Number of distinct word forms (exclusions not counted).
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn exclusion_count(&self) -> usize {
        self.exclusions.len()
    }

    pub fn is_word(&self, query: &str) -> bool {
        lookup(&self.words, query)
    }

    pub fn is_excluded(&self, query: &str) -> bool {
        lookup(&self.exclusions, query)
    }

    /// Membership in words ∪ exclusions.
    pub fn contains(&self, query: &str) -> bool {
        self.is_word(query) || self.is_excluded(query)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Word forms with exactly `len` characters, sorted.
    pub fn words_of_length(&self, len: usize) -> Vec<&str> {
        let mut out: Vec<&str> = self.words().filter(|w| w.chars().count() == len).collect();
        out.sort_unstable();
        out
    }
}

fn normalize_entry(line: &str) -> Option<String> {
    let t = line.trim();
    (!t.is_empty()).then(|| t.to_lowercase())
}

fn lookup(set: &HashSet<String>, query: &str) -> bool {
    if query.chars().any(char::is_uppercase) {
        set.contains(&query.to_lowercase())
    } else {
        set.contains(query)
    }
}

/// Builds a lexicon from newline-delimited word and exclusion lists.
pub fn load_lexicon<W: BufRead, E: BufRead>(words: W, exclusions: E) -> Result<Lexicon, CorpusError> {
    let mut lexicon = Lexicon::new();
    for (i, line) in words.lines().enumerate() {
        lexicon.insert_word(&line.map_err(|e| CorpusError::from_io(e, i + 1))?);
    }
    for (i, line) in exclusions.lines().enumerate() {
        lexicon.insert_exclusion(&line.map_err(|e| CorpusError::from_io(e, i + 1))?);
    }
    Ok(lexicon)
}

const ARABIC_DEFAULT: &str = include_str!("../data/arabic.translit");

/// Ordered grapheme rewrite rules onto a target alphabet.
///
/// Matching is left to right, longest source first, one rule per position.
/// Whitespace always passes through unchanged so word boundaries survive.
#[derive(Debug, Clone)]
pub struct TransliterationTable {
    rules: HashMap<String, String>,
    max_source_len: usize,
    drop_unmapped: bool,
    target: Alphabet,
}

impl TransliterationTable {
    pub fn new(rules: impl IntoIterator<Item = (String, String)>, drop_unmapped: bool, target: Alphabet) -> Result<Self, CorpusError> {
        let mut map = HashMap::new();
        let mut max_source_len = 0;
        for (source, replacement) in rules {
            if source.is_empty() {
                return Err(CorpusError::Alphabet("empty rule source".into()));
            }
            if let Some(c) = replacement.chars().find(|&c| !c.is_whitespace() && !target.contains(c)) {
                return Err(CorpusError::Alphabet(format!("replacement for {source:?} contains {c:?}, outside the target alphabet")));
            }
            max_source_len = max_source_len.max(source.chars().count());
            // first rule for a source wins
            map.entry(source).or_insert(replacement);
        }
        if map.is_empty() {
            return Err(CorpusError::EmptyTable);
        }
        Ok(TransliterationTable { rules: map, max_source_len, drop_unmapped, target })
    }

    /// Parses the `source<TAB>replacement` file format. `#` starts a comment
    /// line; `!drop_unmapped true|false` sets the unmapped-character policy.
    pub fn parse(text: &str, target: Alphabet) -> Result<Self, CorpusError> {
        let mut rules = Vec::new();
        let mut drop_unmapped = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(directive) = line.strip_prefix('!') {
                let mut parts = directive.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some("drop_unmapped"), Some("true"), None) => drop_unmapped = true,
                    (Some("drop_unmapped"), Some("false"), None) => drop_unmapped = false,
                    _ => return Err(CorpusError::Malformed { line: line_no, message: format!("unknown directive {line:?}") }),
                }
                continue;
            }
            let Some((source, replacement)) = line.split_once('\t') else {
                return Err(CorpusError::Malformed { line: line_no, message: "expected source<TAB>replacement".into() });
            };
            if replacement.contains('\t') {
                return Err(CorpusError::Malformed { line: line_no, message: "too many fields".into() });
            }
            rules.push((source.to_string(), replacement.to_string()));
        }
        Self::new(rules, drop_unmapped, target)
    }

    /// The bundled vocalized-Arabic table targeting a–z.
    pub fn arabic_default() -> Self {
        Self::parse(ARABIC_DEFAULT, Alphabet::latin()).expect("bundled table parses")
    }

    pub fn target(&self) -> &Alphabet {
        &self.target
    }

    pub fn drop_unmapped(&self) -> bool {
        self.drop_unmapped
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn transliterate(&self, text: &str) -> Result<String, CorpusError> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut key = String::new();
        let mut pos = 0;
        'outer: while pos < chars.len() {
            let longest = self.max_source_len.min(chars.len() - pos);
            for len in (1..=longest).rev() {
                key.clear();
                key.extend(&chars[pos..pos + len]);
                if let Some(replacement) = self.rules.get(&key) {
                    out.push_str(replacement);
                    pos += len;
                    continue 'outer;
                }
            }
            let c = chars[pos];
            if c.is_whitespace() {
                out.push(c);
            } else if !self.drop_unmapped {
                if !self.target.contains(c) {
                    return Err(CorpusError::Transliteration { ch: c, code: c as u32, offset: pos });
                }
                out.push(c);
            }
            pos += 1;
        }
        Ok(out)
    }
}
