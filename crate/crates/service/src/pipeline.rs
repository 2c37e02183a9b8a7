//! Request handling that does not depend on HTTP: generation, study-list
//! construction and trial validation.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use nonword_core::corpus::load_lexicon;
use nonword_core::filter::{default_threshold, filter_lexicon, filter_low_probability};
use nonword_core::generator::{self, exhaustive, sample_batch_seeded, MAX_EXHAUSTIVE_LENGTH, MAX_LENGTH, MIN_LENGTH};
use nonword_core::ranker::{
    build_decision_blocks, build_perception_list, perception_groups, rank, rank_top, rerank, select_disjoint_top, select_fillers,
};
use nonword_core::{
    BatchOptions, Candidate, Design, FilterReport, GenerateError, Group, Lexicon, PositionalNgramModel, Proficiency, RankError, RankedList,
    Response, StudyList, TrialRecord,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::ApiError;
use crate::store::{FileStore, MemoryStore, SessionStore};
use crate::ServiceError;

pub const MAX_COUNT: usize = 1000;
pub const DEFAULT_LENGTH: usize = 6;
pub const DEFAULT_COUNT: usize = 20;
pub const DEFAULT_STUDY_K: usize = 20;
pub const DEFAULT_POOL_K: usize = 1000;
/// Seeds drawn by the server stay below 2^53 so JSON clients keep them exact.
pub const SEED_LIMIT: u64 = 1 << 53;

pub struct LoadedModel {
    pub model: PositionalNgramModel,
    pub path: PathBuf,
}

/// Shared, read-only request context plus the session store.
pub struct AppState {
    pub models: BTreeMap<String, LoadedModel>,
    pub lexicon: Lexicon,
    pub base_model: String,
    pub pool_size: usize,
    pub store: Arc<dyn SessionStore>,
    /// Low-probability thresholds for exhaustive lengths, from the lexicon.
    thresholds: BTreeMap<usize, f64>,
}

impl AppState {
    pub fn new(
        models: BTreeMap<String, LoadedModel>,
        lexicon: Lexicon,
        base_model: String,
        pool_size: usize,
        store: Arc<dyn SessionStore>,
    ) -> Self {
        let thresholds = match models.get(&base_model) {
            Some(base) => (MIN_LENGTH..=MAX_EXHAUSTIVE_LENGTH)
                .filter_map(|len| default_threshold(&base.model, &lexicon, len).map(|t| (len, t)))
                .collect(),
            None => BTreeMap::new(),
        };
        AppState { models, lexicon, base_model, pool_size, store, thresholds }
    }

    pub fn from_config(config: &Config) -> Result<Self, ServiceError> {
        let mut models = BTreeMap::new();
        for (id, entry) in &config.models {
            let file = File::open(&entry.path).map_err(|e| ServiceError::Config(format!("model {id}: {}: {e}", entry.path.display())))?;
            let model = PositionalNgramModel::read_from(BufReader::new(file))
                .map_err(|e| ServiceError::Config(format!("model {id}: {}: {e}", entry.path.display())))?;
            models.insert(id.clone(), LoadedModel { model, path: entry.path.clone() });
        }
        let lexicon = match &config.lexicon {
            Some(entry) => {
                let open =
                    |p: &PathBuf| File::open(p).map(BufReader::new).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())));
                let words = open(&entry.path)?;
                let lex = match &entry.exclusions {
                    Some(ex) => load_lexicon(words, open(ex)?),
                    None => load_lexicon(words, std::io::empty()),
                };
                lex.map_err(|e| ServiceError::Config(e.to_string()))?
            }
            None => Lexicon::new(),
        };
        let store: Arc<dyn SessionStore> = match &config.store {
            Some(s) => Arc::new(FileStore::open(&s.path)?),
            None => Arc::new(MemoryStore::new()),
        };
        Ok(AppState::new(models, lexicon, config.base_model.clone(), config.pool_size, store))
    }

    fn model(&self, id: &str) -> Result<&PositionalNgramModel, ApiError> {
        self.models.get(id).map(|m| &m.model).ok_or_else(|| ApiError::not_found(format!("unknown model {id:?}")))
    }

    fn base(&self) -> Result<&PositionalNgramModel, ApiError> {
        self.model(&self.base_model)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    #[serde(default = "default_length")]
    pub length: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    pub l1_model: Option<String>,
    pub seed: Option<u64>,
}

fn default_length() -> usize {
    DEFAULT_LENGTH
}

fn default_count() -> usize {
    DEFAULT_COUNT
}

#[derive(Debug, Clone, Serialize)]
pub struct WordOut {
    pub text: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateResponse {
    pub seed: u64,
    /// Model whose scores order `words`.
    pub model: String,
    pub words: Vec<WordOut>,
    pub filter_report: FilterReport,
}

fn draw_seed() -> u64 {
    rand::random::<u64>() % SEED_LIMIT
}

fn exhausted(e: GenerateError) -> ApiError {
    ApiError::unavailable(e.to_string())
}

fn rank_failure(e: RankError) -> ApiError {
    match e {
        RankError::Exhausted { .. } | RankError::OutOfRange { .. } => ApiError::unavailable(e.to_string()),
        other => ApiError::internal(other.to_string()),
    }
}

/// Lexicon-filtered sampled pool from the base model.
fn sampled_pool(state: &AppState, length: usize, size: usize, seed: u64) -> Result<(Vec<Candidate>, FilterReport), ApiError> {
    let base = state.base()?;
    let opts = BatchOptions { workers: 1, ..Default::default() };
    let raw = match sample_batch_seeded(base, length, size, seed, &opts) {
        Ok(words) => words,
        // a small model may not hold `size` distinct words; keep what was found
        Err(GenerateError::Partial { generated, .. }) if !generated.is_empty() => generated,
        Err(e) => return Err(exhausted(e)),
    };
    let mut filter = filter_lexicon(raw, &state.lexicon);
    let pool: Vec<Candidate> = filter.by_ref().collect();
    Ok((pool, filter.report()))
}

pub fn generate(state: &AppState, req: &GenerateRequest) -> Result<GenerateResponse, ApiError> {
    if !(MIN_LENGTH..=MAX_LENGTH).contains(&req.length) {
        return Err(ApiError::field("length", format!("length must be between {MIN_LENGTH} and {MAX_LENGTH}, got {}", req.length)));
    }
    if !(1..=MAX_COUNT).contains(&req.count) {
        return Err(ApiError::field("count", format!("count must be between 1 and {MAX_COUNT}, got {}", req.count)));
    }
    let base = state.base()?;
    let l1 = match &req.l1_model {
        Some(id) => Some((id.as_str(), state.model(id)?)),
        None => None,
    };
    let seed = req.seed.unwrap_or_else(draw_seed);
    let base_id = state.base_model.as_str();
    let head = if l1.is_some() { state.pool_size.max(req.count) } else { req.count };

    let (ranked, report) = if req.length <= MAX_EXHAUSTIVE_LENGTH {
        let stream = exhaustive(base.alphabet(), req.length).map_err(exhausted)?;
        let mut lex = filter_lexicon(stream, &state.lexicon);
        let threshold = state.thresholds.get(&req.length).copied().unwrap_or(f64::NEG_INFINITY);
        let mut prob = filter_low_probability(lex.by_ref(), base, threshold);
        let ranked = rank_top(prob.by_ref(), base_id, base, head).map_err(rank_failure)?;
        let report = prob.report();
        let report = lex.report().then(report);
        (ranked, report)
    } else {
        let (pool, report) = sampled_pool(state, req.length, state.pool_size.max(req.count), seed)?;
        (rank(pool, base_id, base).map_err(rank_failure)?, report)
    };
    let (ordered, model_id) = match l1 {
        Some((id, model)) => (rerank(&ranked, id, model).map_err(rank_failure)?, id),
        None => (ranked, base_id),
    };
    if ordered.len() < req.count {
        return Err(ApiError::unavailable(format!("only {} candidates survived filtering, {} requested", ordered.len(), req.count)));
    }
    let words = ordered
        .top(req.count)
        .iter()
        .enumerate()
        .map(|(i, c)| WordOut { text: c.text.clone(), score: c.scores[model_id] + 0.0, rank: i + 1 })
        .collect();
    Ok(GenerateResponse { seed, model: model_id.to_string(), words, filter_report: report })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceList {
    pub tag: String,
    pub words: Vec<String>,
}

/// Either explicit word lists or parameters for building them.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyRequest {
    pub design: Design,
    pub seed: Option<u64>,
    /// Perception: the three groups g1, g2, g3.
    pub groups: Option<[Vec<String>; 3]>,
    /// Lexical decision: tagged non-word lists.
    pub sources: Option<Vec<SourceList>>,
    pub fillers: Option<Vec<String>>,
    /// Generated lists: model ids (primary and secondary for perception).
    pub models: Option<Vec<String>>,
    pub length: Option<usize>,
    pub k: Option<usize>,
    pub pool_k: Option<usize>,
}

fn construction(e: RankError) -> ApiError {
    match e {
        RankError::Construction(m) => ApiError::bad_request(m),
        other => rank_failure(other),
    }
}

pub fn build_study(state: &AppState, req: &StudyRequest) -> Result<StudyList, ApiError> {
    let seed = req.seed.unwrap_or_else(draw_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let explicit = req.groups.is_some() || req.sources.is_some() || req.fillers.is_some();
    if explicit && (req.models.is_some() || req.length.is_some() || req.k.is_some() || req.pool_k.is_some()) {
        return Err(ApiError::bad_request("give either explicit word lists or generation parameters, not both"));
    }
    let mut list = match req.design {
        Design::Perception if explicit => {
            let [g1, g2, g3] = req.groups.as_ref().ok_or_else(|| ApiError::field("groups", "perception lists need three groups"))?;
            build_perception_list(g1, g2, g3).map_err(construction)?
        }
        Design::LexicalDecision if explicit => {
            let sources = req.sources.as_ref().ok_or_else(|| ApiError::field("sources", "decision lists need source lists"))?;
            let fillers = req.fillers.as_ref().ok_or_else(|| ApiError::field("fillers", "decision lists need fillers"))?;
            let sources: Vec<(String, Vec<String>)> = sources.iter().map(|s| (s.tag.clone(), s.words.clone())).collect();
            build_decision_blocks(&sources, fillers, &mut rng).map_err(construction)?
        }
        design => {
            let length = req.length.unwrap_or(DEFAULT_LENGTH);
            if !(generator::MIN_SAMPLED_LENGTH..=MAX_LENGTH).contains(&length) {
                return Err(ApiError::field(
                    "length",
                    format!("generated lists use lengths {}..={MAX_LENGTH}", generator::MIN_SAMPLED_LENGTH),
                ));
            }
            let k = req.k.unwrap_or(DEFAULT_STUDY_K);
            if k == 0 || k > MAX_COUNT {
                return Err(ApiError::field("k", format!("k must be between 1 and {MAX_COUNT}")));
            }
            let ids = req.models.as_ref().ok_or_else(|| ApiError::field("models", "generated lists need model ids"))?;
            let models: Vec<(&str, &PositionalNgramModel)> =
                ids.iter().map(|id| state.model(id).map(|m| (id.as_str(), m))).collect::<Result<_, _>>()?;
            let (pool, _) = sampled_pool(state, length, state.pool_size, seed)?;
            let first = models.first().ok_or_else(|| ApiError::field("models", "at least one model id is required"))?;
            let primary = rank(pool, first.0, first.1).map_err(rank_failure)?;
            let rankings: Vec<RankedList> = std::iter::once(Ok(primary.clone()))
                .chain(models[1..].iter().map(|(id, m)| rerank(&primary, id, m)))
                .collect::<Result<_, _>>()
                .map_err(rank_failure)?;
            match design {
                Design::Perception => {
                    if rankings.len() != 2 {
                        return Err(ApiError::field("models", "perception lists take exactly two model ids"));
                    }
                    let pool_k = req.pool_k.unwrap_or(DEFAULT_POOL_K).min(rankings[0].len());
                    let [g1, g2, g3] = perception_groups(&rankings[0], &rankings[1], k, pool_k, &mut rng).map_err(construction)?;
                    build_perception_list(&g1, &g2, &g3).map_err(construction)?
                }
                Design::LexicalDecision => {
                    let selected = select_disjoint_top(&rankings, k).map_err(rank_failure)?;
                    let avoid: HashSet<String> = selected.iter().flat_map(|r| r.texts().map(str::to_string)).collect();
                    let fillers = select_fillers(&state.lexicon, length, k, &avoid, &mut rng).map_err(construction)?;
                    let sources: Vec<(String, Vec<String>)> =
                        selected.iter().map(|r| (r.model_id.to_uppercase(), r.texts().map(str::to_string).collect())).collect();
                    build_decision_blocks(&sources, &fillers, &mut rng).map_err(construction)?
                }
            }
        }
    };
    list.seed = Some(seed);
    Ok(list)
}

/// A trial as submitted; `group` may be left out and is then taken from
/// the word's tag in the session's study list.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialIn {
    pub rater_id: String,
    pub l1: String,
    pub proficiency: Proficiency,
    pub word: String,
    pub group: Option<Group>,
    pub response: Response,
    pub rt_seconds: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialBatch {
    pub session: String,
    pub records: Vec<TrialIn>,
}

/// Checks a batch against its study list and fills in missing groups.
pub fn resolve_trials(list: &StudyList, batch: &TrialBatch) -> Result<Vec<TrialRecord>, ApiError> {
    let mut out = Vec::with_capacity(batch.records.len());
    for (i, t) in batch.records.iter().enumerate() {
        let Some(tag) = list.group_of(&t.word) else {
            return Err(ApiError::conflict(format!("record {i}: word {:?} is not in the session's study list", t.word)));
        };
        let group = match t.group {
            Some(g) => g,
            None => tag.parse().map_err(|_| {
                ApiError::field("group", format!("record {i}: list tag {tag:?} is not a stimulus group; give group explicitly"))
            })?,
        };
        let record = TrialRecord {
            rater_id: t.rater_id.clone(),
            l1: t.l1.clone(),
            proficiency: t.proficiency,
            word: t.word.clone(),
            group,
            response: t.response,
            rt_seconds: t.rt_seconds,
        };
        record.validate().map_err(|m| ApiError::bad_request(format!("record {i}: {m}")))?;
        out.push(record);
    }
    Ok(out)
}
