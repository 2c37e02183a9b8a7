//! Generation, filtering and ranking of non-words with position-aware
//! character n-gram models, plus construction and analysis of
//! perception and lexical-decision studies built from them.
//!
//! The pipeline is:
//!
//! 1. [`corpus`]: turn raw text into word-frequency tables, load lexicons,
//!    transliterate non-Latin corpora onto the shared alphabet.
//! 2. [`lm`]: train a [`PositionalNgramModel`] over INITIAL/MEDIAL/FINAL zones.
//! 3. [`generator`]: enumerate short candidates or sample long ones.
//! 4. [`filter`]: drop existing words, exclusions and low-probability junk.
//! 5. [`ranker`]: order by model score, re-rank under other-language models
//!    and assemble study presentation lists.
//! 6. [`study`]: aggregate lexical-decision trial logs.

pub mod corpus;
pub mod filter;
pub mod generator;
pub mod lm;
pub mod ranker;
pub mod study;

pub use corpus::{Alphabet, CorpusError, Lexicon, TransliterationTable, WordFrequencyTable};
pub use filter::{FilterReport, LexiconFilter, ProbabilityFilter};
pub use generator::{BatchOptions, Candidate, GenerateError, Provenance};
pub use lm::{Continuation, ModelError, PositionalNgramModel, Zone};
pub use ranker::{Design, RankError, RankedList, StudyItem, StudyList};
pub use study::{Analysis, Group, Proficiency, Response, StudyError, TrialRecord};
