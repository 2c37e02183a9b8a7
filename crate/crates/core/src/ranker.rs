//! Ranking by model score, cross-language re-ranking, and the two study
//! presentation designs (perception rating, lexical decision).

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::io::{self, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Alphabet, Lexicon};
use crate::generator::Candidate;
use crate::lm::PositionalNgramModel;

pub const FILLER_TAG: &str = "FI";
pub const PERCEPTION_TAGS: [&str; 3] = ["g1", "g2", "g3"];

#[derive(Debug, Error)]
pub enum RankError {
    #[error("{} candidate(s) cannot be scored by model {model_id}: {}", offenders.len(), offenders.join(", "))]
    Unscorable { model_id: String, offenders: Vec<String> },
    #[error("candidate {0:?} appears more than once")]
    Duplicate(String),
    #[error("k={k} is out of range for lists of length {len}")]
    OutOfRange { k: usize, len: usize },
    #[error("ranking {model_id} ran out after {found} of {k} unclaimed items")]
    Exhausted { model_id: String, found: usize, k: usize },
    #[error("study construction: {0}")]
    Construction(String),
}

/// Candidates sorted by descending score under `model_id`; equal scores
/// fall back to alphabet order of the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub model_id: String,
    pub items: Vec<Candidate>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|c| c.text.as_str())
    }

    pub fn score_at(&self, i: usize) -> f64 {
        self.items[i].scores[&self.model_id]
    }

    pub fn top(&self, k: usize) -> &[Candidate] {
        &self.items[..k.min(self.items.len())]
    }

    /// `rank<TAB>word<TAB>score`, ranks starting at 1.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        // adding 0.0 turns -0.0 into 0.0
        for (i, c) in self.items.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", i + 1, c.text, c.scores[&self.model_id] + 0.0)?;
        }
        Ok(())
    }
}

fn by_score_then_text(alphabet: &Alphabet, a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| alphabet.compare(a.1, b.1))
}

/// Scores every candidate under `model` and sorts them.
pub fn rank<I: IntoIterator<Item = Candidate>>(
    candidates: I,
    model_id: &str,
    model: &PositionalNgramModel,
) -> Result<RankedList, RankError> {
    let mut items = Vec::new();
    let mut offenders = Vec::new();
    let mut seen = HashSet::new();
    for mut c in candidates {
        if !seen.insert(c.text.clone()) {
            return Err(RankError::Duplicate(c.text));
        }
        match model.score(&c.text) {
            Ok(s) => {
                c.scores.insert(model_id.to_string(), s);
                items.push((s, c));
            }
            Err(_) => offenders.push(c.text),
        }
    }
    if !offenders.is_empty() {
        return Err(RankError::Unscorable { model_id: model_id.to_string(), offenders });
    }
    let alphabet = model.alphabet();
    items.sort_by(|a, b| by_score_then_text(alphabet, (a.0, &a.1.text), (b.0, &b.1.text)));
    Ok(RankedList { model_id: model_id.to_string(), items: items.into_iter().map(|(_, c)| c).collect() })
}

/// Re-orders an existing ranking under another model. The candidate set is
/// unchanged; earlier scores are kept on each candidate.
pub fn rerank(ranked: &RankedList, model_id: &str, model: &PositionalNgramModel) -> Result<RankedList, RankError> {
    rank(ranked.items.iter().cloned(), model_id, model)
}

struct HeapEntry {
    score: f64,
    key: Vec<u16>,
    candidate: Candidate,
}

impl HeapEntry {
    /// Greater means ranked lower.
    fn worse_than(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.worse_than(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worse_than(other)
    }
}

/// The first `k` items of `rank(candidates)` in bounded memory. Input texts
/// must be distinct; suited to exhaustive streams.
pub fn rank_top<I: IntoIterator<Item = Candidate>>(
    candidates: I,
    model_id: &str,
    model: &PositionalNgramModel,
    k: usize,
) -> Result<RankedList, RankError> {
    let alphabet = model.alphabet();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
    let mut offenders = Vec::new();
    for c in candidates {
        let score = match model.score(&c.text) {
            Ok(s) => s,
            Err(_) => {
                offenders.push(c.text);
                continue;
            }
        };
        if k == 0 {
            continue;
        }
        let key = alphabet.encode(&c.text).expect("scorable text is in the alphabet");
        let entry = HeapEntry { score, key, candidate: c };
        if heap.len() < k {
            heap.push(entry);
        } else if entry.worse_than(heap.peek().expect("heap is full")) == Ordering::Less {
            heap.pop();
            heap.push(entry);
        }
    }
    if !offenders.is_empty() {
        return Err(RankError::Unscorable { model_id: model_id.to_string(), offenders });
    }
    let items = heap
        .into_sorted_vec()
        .into_iter()
        .map(|mut e| {
            e.candidate.scores.insert(model_id.to_string(), e.score);
            e.candidate
        })
        .collect();
    Ok(RankedList { model_id: model_id.to_string(), items })
}

/// Texts found among the first `k` items of both lists.
pub fn top_k_intersection(a: &RankedList, b: &RankedList, k: usize) -> Result<BTreeSet<String>, RankError> {
    let len = a.len().min(b.len());
    if k > len {
        return Err(RankError::OutOfRange { k, len });
    }
    let head: HashSet<&str> = a.top(k).iter().map(|c| c.text.as_str()).collect();
    Ok(b.top(k).iter().filter(|c| head.contains(c.text.as_str())).map(|c| c.text.clone()).collect())
}

/// Takes the top `k` of each ranking in turn, skipping items an earlier
/// ranking already claimed. Lists come back in input order, pairwise disjoint.
pub fn select_disjoint_top(rankings: &[RankedList], k: usize) -> Result<Vec<RankedList>, RankError> {
    let mut claimed: HashSet<&str> = HashSet::new();
    let mut out = Vec::with_capacity(rankings.len());
    for ranking in rankings {
        let mut picked = Vec::with_capacity(k);
        for c in &ranking.items {
            if picked.len() == k {
                break;
            }
            if claimed.insert(c.text.as_str()) {
                picked.push(c.clone());
            }
        }
        if picked.len() < k {
            return Err(RankError::Exhausted { model_id: ranking.model_id.clone(), found: picked.len(), k });
        }
        out.push(RankedList { model_id: ranking.model_id.clone(), items: picked });
    }
    Ok(out)
}

/// `n` items drawn without replacement, in draw order.
pub fn sample_without_replacement<T: Clone, R: Rng + ?Sized>(items: &[T], n: usize, rng: &mut R) -> Result<Vec<T>, RankError> {
    if n > items.len() {
        return Err(RankError::OutOfRange { k: n, len: items.len() });
    }
    Ok(index::sample(rng, items.len(), n).into_iter().map(|i| items[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Design {
    Perception,
    LexicalDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyItem {
    pub text: String,
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
}

/// An ordered presentation list for one of the two study designs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyList {
    pub design: Design,
    #[serde(default)]
    pub seed: Option<u64>,
    pub items: Vec<StudyItem>,
}

impl StudyList {
    pub fn contains(&self, word: &str) -> bool {
        self.items.iter().any(|i| i.text == word)
    }

    pub fn group_of(&self, word: &str) -> Option<&str> {
        self.items.iter().find(|i| i.text == word).map(|i| i.group.as_str())
    }

    /// Checks the structural invariant of the design: a strict g1/g2/g3
    /// cycle for perception lists, one item per source in every block for
    /// lexical-decision lists.
    pub fn validate(&self) -> Result<(), String> {
        match self.design {
            Design::Perception => {
                if !self.items.len().is_multiple_of(3) {
                    return Err(format!("{} items is not a multiple of 3", self.items.len()));
                }
                for (i, item) in self.items.iter().enumerate() {
                    if item.group != PERCEPTION_TAGS[i % 3] {
                        return Err(format!("item {i} is tagged {} instead of {}", item.group, PERCEPTION_TAGS[i % 3]));
                    }
                }
                Ok(())
            }
            Design::LexicalDecision => {
                let sources: BTreeSet<&str> = self.items.iter().map(|i| i.group.as_str()).collect();
                let size = sources.len();
                if size == 0 || !self.items.len().is_multiple_of(size) {
                    return Err("items do not split into whole blocks".into());
                }
                for (b, block) in self.items.chunks(size).enumerate() {
                    let tags: BTreeSet<&str> = block.iter().map(|i| i.group.as_str()).collect();
                    if tags != sources {
                        return Err(format!("block {b} does not hold one item per source"));
                    }
                    if block.iter().any(|i| i.block != Some(b)) {
                        return Err(format!("block {b} has a mislabelled item"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Round-robin interleave of three equal-length groups: g1, g2, g3, g1, ...
pub fn build_perception_list(g1: &[String], g2: &[String], g3: &[String]) -> Result<StudyList, RankError> {
    if g1.len() != g2.len() || g2.len() != g3.len() {
        return Err(RankError::Construction(format!(
            "perception groups must have equal lengths, got {}/{}/{}",
            g1.len(),
            g2.len(),
            g3.len()
        )));
    }
    let items = g1
        .iter()
        .zip(g2)
        .zip(g3)
        .flat_map(|((a, b), c)| [a, b, c])
        .enumerate()
        .map(|(i, text)| StudyItem { text: text.clone(), group: PERCEPTION_TAGS[i % 3].to_string(), block: None })
        .collect();
    Ok(StudyList { design: Design::Perception, seed: None, items })
}

/// Block `i` holds item `i` of every source list plus filler `i`, shuffled.
pub fn build_decision_blocks<R: Rng + ?Sized>(
    sources: &[(String, Vec<String>)],
    fillers: &[String],
    rng: &mut R,
) -> Result<StudyList, RankError> {
    if sources.is_empty() {
        return Err(RankError::Construction("no source lists".into()));
    }
    let k = fillers.len();
    if let Some((tag, list)) = sources.iter().find(|(_, l)| l.len() != k) {
        return Err(RankError::Construction(format!("list {tag} has {} items, fillers have {k}", list.len())));
    }
    let mut tags: HashSet<&str> = HashSet::new();
    for (tag, _) in sources {
        if tag == FILLER_TAG || !tags.insert(tag) {
            return Err(RankError::Construction(format!("source tag {tag:?} is reserved or repeated")));
        }
    }
    let mut items = Vec::with_capacity(k * (sources.len() + 1));
    for b in 0..k {
        let mut block: Vec<StudyItem> = sources
            .iter()
            .map(|(tag, list)| (tag.as_str(), &list[b]))
            .chain(std::iter::once((FILLER_TAG, &fillers[b])))
            .map(|(tag, text)| StudyItem { text: text.clone(), group: tag.to_string(), block: Some(b) })
            .collect();
        block.shuffle(rng);
        items.extend(block);
    }
    Ok(StudyList { design: Design::LexicalDecision, seed: None, items })
}

/// The three perception groups: top `k` of `primary`, top `k` of
/// `secondary`, and `k` random picks from the intersection of both lists'
/// first `pool_k` items.
pub fn perception_groups<R: Rng + ?Sized>(
    primary: &RankedList,
    secondary: &RankedList,
    k: usize,
    pool_k: usize,
    rng: &mut R,
) -> Result<[Vec<String>; 3], RankError> {
    let top = |l: &RankedList| -> Result<Vec<String>, RankError> {
        if l.len() < k {
            return Err(RankError::OutOfRange { k, len: l.len() });
        }
        Ok(l.texts().take(k).map(str::to_string).collect())
    };
    let pool: Vec<String> = top_k_intersection(primary, secondary, pool_k)?.into_iter().collect();
    let g3 = sample_without_replacement(&pool, k, rng)
        .map_err(|_| RankError::Construction(format!("intersection holds only {} items, need {k}", pool.len())))?;
    Ok([top(primary)?, top(secondary)?, g3])
}

/// `k` random lexicon words of `length` characters, avoiding `avoid`.
pub fn select_fillers<R: Rng + ?Sized>(
    lexicon: &Lexicon,
    length: usize,
    k: usize,
    avoid: &HashSet<String>,
    rng: &mut R,
) -> Result<Vec<String>, RankError> {
    let pool: Vec<String> = lexicon
        .words_of_length(length)
        .into_iter()
        .filter(|w| !lexicon.is_excluded(w) && !avoid.contains(*w))
        .map(str::to_string)
        .collect();
    sample_without_replacement(&pool, k, rng)
        .map_err(|_| RankError::Construction(format!("lexicon has only {} usable words of length {length}", pool.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordFrequencyTable;
    use crate::generator::Provenance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(words: &[(&str, u64)]) -> PositionalNgramModel {
        let mut t = WordFrequencyTable::new(Alphabet::swedish());
        for (w, c) in words {
            t.add(w, *c);
        }
        PositionalNgramModel::train(&t, 4).unwrap()
    }

    fn cands(words: &[&str]) -> Vec<Candidate> {
        words.iter().map(|w| Candidate::new(*w, Provenance::Sampled)).collect()
    }

    fn list(id: &str, words: &[&str]) -> RankedList {
        RankedList {
            model_id: id.into(),
            items: words
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let mut c = Candidate::new(*w, Provenance::Sampled);
                    c.scores.insert(id.into(), -(i as f64));
                    c
                })
                .collect(),
        }
    }

    fn strings(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn rank_single_and_idempotent() {
        let m = model(&[("hus", 3), ("hem", 2), ("mat", 1)]);
        let r = rank(cands(&["hus"]), "sv", &m).unwrap();
        assert_eq!(r.texts().collect::<Vec<_>>(), ["hus"]);

        let r = rank(cands(&["mat", "hus", "qqq", "hem", "hat"]), "sv", &m).unwrap();
        let again = rank(r.items.clone(), "sv", &m).unwrap();
        assert_eq!(again, r);
        assert!((0..r.len() - 1).all(|i| r.score_at(i) >= r.score_at(i + 1)));
    }

    #[test]
    fn rank_ties_fall_back_to_alphabet_order() {
        let m = model(&[("ab", 1)]);
        // all three floor out identically
        let r = rank(cands(&["öö", "åå", "zz"]), "sv", &m).unwrap();
        assert_eq!(r.texts().collect::<Vec<_>>(), ["zz", "åå", "öö"]);
    }

    #[test]
    fn rank_reports_offenders_and_duplicates() {
        let m = model(&[("ab", 1)]);
        match rank(cands(&["ab", "a1", "x"]), "sv", &m) {
            Err(RankError::Unscorable { offenders, .. }) => assert_eq!(offenders, ["a1", "x"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(rank(cands(&["ab", "ab"]), "sv", &m), Err(RankError::Duplicate(_))));
    }

    #[test]
    fn rerank_same_model_is_identity() {
        let m = model(&[("hus", 3), ("hem", 2), ("mat", 1)]);
        let r = rank(cands(&["mat", "hus", "hem", "hat"]), "sv", &m).unwrap();
        assert_eq!(rerank(&r, "sv", &m).unwrap(), r);
    }

    #[test]
    fn rank_top_matches_full_rank_prefix() {
        let m = model(&[("hus", 3), ("hem", 2), ("mat", 1), ("hat", 1)]);
        let words = ["mat", "hus", "qqq", "hem", "hat", "mus", "tam", "ham"];
        let full = rank(cands(&words), "sv", &m).unwrap();
        for k in 0..=words.len() + 1 {
            let top = rank_top(cands(&words), "sv", &m, k).unwrap();
            assert_eq!(top.items, full.top(k));
        }
    }

    #[test]
    fn intersection_cases() {
        let a = list("a", &["w", "x", "y", "z"]);
        assert_eq!(top_k_intersection(&a, &a, 2).unwrap(), BTreeSet::from(["w".to_string(), "x".to_string()]));
        let b = list("b", &["z", "y", "x", "w"]);
        assert!(top_k_intersection(&a, &b, 2).unwrap().is_empty());
        assert_eq!(top_k_intersection(&a, &b, 3).unwrap().len(), 2);
        assert!(matches!(top_k_intersection(&a, &b, 5), Err(RankError::OutOfRange { k: 5, len: 4 })));
    }

    #[test]
    fn disjoint_top_full_collision() {
        let a = list("sv", &["w", "x", "y", "z"]);
        let b = list("de", &["w", "x", "y", "z"]);
        let out = select_disjoint_top(&[a, b], 2).unwrap();
        assert_eq!(out[0].texts().collect::<Vec<_>>(), ["w", "x"]);
        assert_eq!(out[1].texts().collect::<Vec<_>>(), ["y", "z"]);
    }

    #[test]
    fn disjoint_top_plain_and_exhausted() {
        let a = list("sv", &["a1", "a2", "a3"]);
        let b = list("de", &["b1", "b2", "b3"]);
        let out = select_disjoint_top(&[a.clone(), b], 2).unwrap();
        assert_eq!(out[1].texts().collect::<Vec<_>>(), ["b1", "b2"]);
        let c = list("en", &["a1", "a2", "c1"]);
        assert!(matches!(select_disjoint_top(&[a, c], 2), Err(RankError::Exhausted { found: 1, .. })));
    }

    #[test]
    fn perception_interleave() {
        let l = build_perception_list(&strings(&["a1", "a2"]), &strings(&["b1", "b2"]), &strings(&["c1", "c2"])).unwrap();
        let texts: Vec<&str> = l.items.iter().map(|i| i.text.as_str()).collect();
        assert_eq!(texts, ["a1", "b1", "c1", "a2", "b2", "c2"]);
        l.validate().unwrap();
        let single = build_perception_list(&strings(&["a"]), &strings(&["b"]), &strings(&["c"])).unwrap();
        assert_eq!(single.items.len(), 3);
        assert!(build_perception_list(&strings(&["a"]), &strings(&[]), &strings(&["c"])).is_err());
    }

    #[test]
    fn decision_blocks_single_block() {
        let sources = vec![("SV".to_string(), strings(&["s"])), ("DE".to_string(), strings(&["d"])), ("EN".to_string(), strings(&["e"]))];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = build_decision_blocks(&sources, &strings(&["f"]), &mut rng).unwrap();
        let mut texts: Vec<&str> = l.items.iter().map(|i| i.text.as_str()).collect();
        texts.sort();
        assert_eq!(texts, ["d", "e", "f", "s"]);
        assert_eq!(l.items.iter().filter(|i| i.group == FILLER_TAG).count(), 1);
        l.validate().unwrap();
    }

    #[test]
    fn decision_blocks_reject_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let uneven = vec![("SV".to_string(), strings(&["a", "b"]))];
        assert!(build_decision_blocks(&uneven, &strings(&["f"]), &mut rng).is_err());
        let reserved = vec![("FI".to_string(), strings(&["a"]))];
        assert!(build_decision_blocks(&reserved, &strings(&["f"]), &mut rng).is_err());
        assert!(build_decision_blocks(&[], &strings(&["f"]), &mut rng).is_err());
    }

    #[test]
    fn perception_groups_draw_from_intersection() {
        let a = list("sv", &["a", "b", "c", "d", "e", "f"]);
        let b = list("ar", &["f", "e", "d", "c", "x", "y"]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let [g1, g2, g3] = perception_groups(&a, &b, 2, 4, &mut rng).unwrap();
        assert_eq!(g1, ["a", "b"]);
        assert_eq!(g2, ["f", "e"]);
        assert!(g3.iter().all(|w| w == "c" || w == "d"));
        assert_eq!(g3.len(), 2);
        assert!(perception_groups(&a, &b, 3, 4, &mut rng).is_err());
    }

    #[test]
    fn fillers_come_from_lexicon() {
        let lex = crate::corpus::load_lexicon("huset\nkatten\nbilen\nhunden\n".as_bytes(), "bilen\n".as_bytes()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let avoid = HashSet::from(["hunden".to_string()]);
        let f = select_fillers(&lex, 6, 1, &avoid, &mut rng).unwrap();
        assert_eq!(f, ["katten"]);
        assert!(select_fillers(&lex, 6, 2, &avoid, &mut rng).is_err());
    }

    #[test]
    fn tsv_output() {
        let l = list("sv", &["ab", "cd"]);
        let mut buf = Vec::new();
        l.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1\tab\t0\n2\tcd\t-1\n");
    }
}
