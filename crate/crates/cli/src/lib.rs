//! The `nonword` command line: train, generate, filter, rank, build study
//! lists and analyze trial logs. Every stage reads and writes
//! newline-delimited UTF-8 so stages compose under shell pipes.
//!
//! Exit status: 0 success, 1 usage error, 2 data or format error,
//! 3 generation exhausted.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use nonword_core::corpus::{extract_words, load_lexicon};
use nonword_core::filter::{filter_lexicon, filter_low_probability};
use nonword_core::generator::{exhaustive, sample_batch_seeded, DEFAULT_MAX_RESTARTS};
use nonword_core::ranker::{
    build_decision_blocks, build_perception_list, perception_groups, rank, rank_top, rerank, sample_without_replacement,
    select_disjoint_top,
};
use nonword_core::study::{analyze, filter_by_proficiency, read_trials};
use nonword_core::{
    Alphabet, BatchOptions, Candidate, GenerateError, Lexicon, PositionalNgramModel, Proficiency, Provenance, RankedList,
    TransliterationTable, WordFrequencyTable,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "nonword", version, about = "Generate, filter and rank non-words; build and analyze lexical-decision studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a positional n-gram model from text or word-count lists.
    Train {
        /// Input file; repeat for several. `-` reads stdin.
        #[arg(long, required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
        /// `swedish`, `latin`, or the alphabet's characters in order.
        #[arg(long, default_value = "swedish")]
        alphabet: String,
        /// Inputs are `word<TAB>count` lines instead of running text.
        #[arg(long)]
        wordlist: bool,
        /// `arabic` for the built-in table, or a rule file.
        #[arg(long)]
        transliterate: Option<String>,
    },
    /// Write candidate strings, one per line.
    Generate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Alphabet for --exhaustive when no model is given.
        #[arg(long)]
        alphabet: Option<String>,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Every string of the length (2 to 5) instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        /// Sampling threads; output does not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_RESTARTS)]
        max_restarts: usize,
        /// Fail instead of drawing a seed when --seed is missing.
        #[arg(long)]
        require_seed: bool,
    },
    /// Drop existing words, exclusions and (with --model) improbable strings.
    Filter {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        #[arg(long, requires = "min_logprob")]
        model: Option<PathBuf>,
        /// Minimum mean log-likelihood per character.
        #[arg(long, requires = "model", allow_negative_numbers = true)]
        min_logprob: Option<f64>,
    },
    /// Score words from stdin; write `rank<TAB>word<TAB>score`.
    Rank {
        #[arg(long)]
        model: PathBuf,
        /// Re-order the ranking under this model.
        #[arg(long)]
        rerank: Option<PathBuf>,
        #[arg(long)]
        top: Option<usize>,
    },
    /// Build a study list as JSON.
    StudyBuild {
        #[arg(long, value_enum)]
        design: DesignArg,
        /// Rankings (TSV from `rank`) or plain word lists.
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Real words for decision lists.
        #[arg(long)]
        fillers: Option<PathBuf>,
        /// Comma-separated source tags; default: input file stems, upper-cased.
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// Perception: draw group 3 from the first N of both rankings.
        #[arg(long, default_value_t = 1000)]
        intersect: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Accuracy, reaction-time and normalized-average tables from a trial CSV.
    StudyAnalyze {
        #[arg(long)]
        trials: PathBuf,
        /// Comma-separated proficiency levels to keep (B, I, A).
        #[arg(long, value_delimiter = ',')]
        proficiency: Vec<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DesignArg {
    Perception,
    Decision,
}

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, error: anyhow!(message.into()) }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: EXIT_DATA, error }
    }
}

impl From<GenerateError> for Failure {
    fn from(e: GenerateError) -> Self {
        let code = match e {
            GenerateError::Exhausted { .. } | GenerateError::Partial { .. } | GenerateError::NoInitialChars => EXIT_EXHAUSTED,
            GenerateError::ExhaustiveLength(_) | GenerateError::SampledLength(_) | GenerateError::InvalidArgument(_) => EXIT_USAGE,
        };
        Failure { code, error: e.into() }
    }
}

type CmdResult = Result<(), Failure>;

/// Runs one command line; returns the exit status.
pub fn run<I, S>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stdout, "{e}");
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Train { corpus, order, out, alphabet, wordlist, transliterate } => {
            train(&corpus, order, &out, &alphabet, wordlist, transliterate.as_deref(), stdin)
        }
        Command::Generate { model, alphabet, length, count, seed, exhaustive, workers, max_restarts, require_seed } => {
            let opts = GenerateOpts { length, count, seed, exhaustive, workers, max_restarts, require_seed };
            generate(model.as_deref(), alphabet.as_deref(), &opts, stdout, stderr)
        }
        Command::Filter { lexicon, exclusions, model, min_logprob } => {
            filter(&lexicon, exclusions.as_deref(), model.as_deref(), min_logprob, stdin, stdout, stderr)
        }
        Command::Rank { model, rerank, top } => rank_cmd(&model, rerank.as_deref(), top, stdin, stdout),
        Command::StudyBuild { design, inputs, fillers, tags, top, intersect, seed } => {
            study_build(design, &inputs, fillers.as_deref(), &tags, top, intersect, seed, stdout)
        }
        Command::StudyAnalyze { trials, proficiency, json } => study_analyze(&trials, &proficiency, json, stdout),
    };
    match result.and_then(|()| stdout.flush().context("writing output").map_err(Failure::from)) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            // a closed pipe downstream is not an error of ours
            if f.error.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)) {
                return EXIT_OK;
            }
            let _ = writeln!(stderr, "nonword: {:#}", f.error);
            f.code
        }
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn parse_alphabet(spec: &str) -> Result<Alphabet, Failure> {
    match spec {
        "swedish" => Ok(Alphabet::swedish()),
        "latin" => Ok(Alphabet::latin()),
        chars => Alphabet::new(chars.chars()).map_err(|e| Failure::usage(format!("--alphabet: {e}"))),
    }
}

pub fn load_model(path: &Path) -> anyhow::Result<PositionalNgramModel> {
    PositionalNgramModel::read_from(open(path)?).with_context(|| format!("reading model {}", path.display()))
}

/// Model id used in rankings: the file stem.
fn model_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned())
}

fn train(
    inputs: &[PathBuf],
    order: usize,
    out: &Path,
    alphabet: &str,
    wordlist: bool,
    transliterate: Option<&str>,
    stdin: &mut dyn BufRead,
) -> CmdResult {
    let alphabet = parse_alphabet(alphabet)?;
    let translit = match transliterate {
        None => None,
        Some("arabic") => Some(TransliterationTable::arabic_default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            Some(TransliterationTable::parse(&text, alphabet.clone()).with_context(|| format!("parsing {path}"))?)
        }
    };
    let mut table = WordFrequencyTable::new(alphabet.clone());
    for input in inputs {
        let mut text = String::new();
        if input.as_os_str() == "-" {
            stdin.read_to_string(&mut text).context("reading stdin")?;
        } else {
            text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        }
        let label = input.display();
        if wordlist {
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (word, count) = line.split_once('\t').unwrap_or((line, "1"));
                let count: u64 = count.trim().parse().map_err(|_| anyhow!("{label}:{}: bad count {count:?}", i + 1))?;
                let word = match &translit {
                    Some(t) => t.transliterate(word).with_context(|| format!("{label}:{}", i + 1))?,
                    None => word.to_string(),
                };
                table.add(word.trim(), count);
            }
        } else {
            let text = match &translit {
                Some(t) => t.transliterate(&text).with_context(|| format!("transliterating {label}"))?,
                None => text,
            };
            table.merge(&extract_words(text.as_bytes(), &alphabet).with_context(|| format!("reading {label}"))?);
        }
    }
    let model = PositionalNgramModel::train(&table, order).map_err(|e| match e {
        nonword_core::ModelError::InvalidOrder(_) => Failure::usage(format!("--order: {e}")),
        other => Failure::from(anyhow::Error::from(other).context("training")),
    })?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    model.write_to(&mut w).with_context(|| format!("writing {}", out.display()))?;
    w.flush().with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

struct GenerateOpts {
    length: usize,
    count: Option<usize>,
    seed: Option<u64>,
    exhaustive: bool,
    workers: usize,
    max_restarts: usize,
    require_seed: bool,
}

fn generate(model: Option<&Path>, alphabet: Option<&str>, o: &GenerateOpts, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    if o.exhaustive {
        let alphabet = match (model, alphabet) {
            (Some(m), None) => load_model(m)?.alphabet().clone(),
            (None, Some(a)) => parse_alphabet(a)?,
            (None, None) => return Err(Failure::usage("--exhaustive needs --model or --alphabet")),
            (Some(_), Some(_)) => return Err(Failure::usage("give --model or --alphabet, not both")),
        };
        let stream = exhaustive(&alphabet, o.length)?;
        for c in stream.take(o.count.unwrap_or(usize::MAX)) {
            writeln!(stdout, "{}", c.text).context("writing output")?;
        }
        return Ok(());
    }
    let model = model.ok_or_else(|| Failure::usage("sampling needs --model"))?;
    let count = o.count.ok_or_else(|| Failure::usage("sampling needs --count"))?;
    let seed = match o.seed {
        Some(s) => s,
        None if o.require_seed => return Err(Failure::usage("--require-seed is set but --seed is missing")),
        None => {
            let s = rand::random::<u64>() >> 11;
            let _ = writeln!(stderr, "seed={s}");
            s
        }
    };
    let model = load_model(model)?;
    let opts = BatchOptions { max_restarts: o.max_restarts, max_attempts: None, workers: o.workers };
    for c in sample_batch_seeded(&model, o.length, count, seed, &opts)? {
        writeln!(stdout, "{}", c.text).context("writing output")?;
    }
    Ok(())
}

/// Candidate per non-empty input line; the first tab-separated field
/// that is not a number is the word, so `rank` output can be re-filtered.
fn read_candidates(stdin: &mut dyn BufRead) -> impl Iterator<Item = anyhow::Result<Candidate>> + '_ {
    stdin.lines().filter_map(|line| match line {
        Err(e) => Some(Err(anyhow::Error::from(e).context("reading stdin"))),
        Ok(l) => {
            let word = l.split('\t').find(|f| !f.is_empty() && f.parse::<f64>().is_err())?.trim().to_string();
            (!word.is_empty()).then(|| Ok(Candidate::new(word, Provenance::Sampled)))
        }
    })
}

/// Stops the candidate stream at the first read error, keeping it.
struct Checked<I> {
    inner: I,
    error: Option<anyhow::Error>,
}

impl<I: Iterator<Item = anyhow::Result<Candidate>>> Iterator for Checked<I> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if self.error.is_some() {
            return None;
        }
        match self.inner.next()? {
            Ok(c) => Some(c),
            Err(e) => {
                self.error = Some(e);
                None
            }
        }
    }
}

fn load_lexicon_files(lexicon: &Path, exclusions: Option<&Path>) -> anyhow::Result<Lexicon> {
    let words = open(lexicon)?;
    let lex = match exclusions {
        Some(ex) => load_lexicon(words, open(ex)?),
        None => load_lexicon(words, std::io::empty()),
    };
    lex.with_context(|| format!("reading lexicon {}", lexicon.display()))
}

fn filter(
    lexicon: &Path,
    exclusions: Option<&Path>,
    model: Option<&Path>,
    min_logprob: Option<f64>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CmdResult {
    let lex = load_lexicon_files(lexicon, exclusions)?;
    let model = model.map(load_model).transpose()?;
    let mut input = Checked { inner: read_candidates(stdin), error: None };
    let mut by_lexicon = filter_lexicon(input.by_ref(), &lex);
    let report = match (&model, min_logprob) {
        (Some(m), Some(t)) => {
            let mut by_prob = filter_low_probability(by_lexicon.by_ref(), m, t);
            for c in by_prob.by_ref() {
                writeln!(stdout, "{}", c.text).context("writing output")?;
            }
            let second = by_prob.report();
            by_lexicon.report().then(second)
        }
        _ => {
            for c in by_lexicon.by_ref() {
                writeln!(stdout, "{}", c.text).context("writing output")?;
            }
            by_lexicon.report()
        }
    };
    if let Some(e) = input.error {
        return Err(e.into());
    }
    write!(stderr, "{report}").context("writing report")?;
    Ok(())
}

fn rank_cmd(
    model_path: &Path,
    rerank_path: Option<&Path>,
    top: Option<usize>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
) -> CmdResult {
    let model = load_model(model_path)?;
    let id = model_id(model_path);
    let mut input = Checked { inner: read_candidates(stdin), error: None };
    let ranked = match (rerank_path, top) {
        (None, Some(k)) => rank_top(input.by_ref(), &id, &model, k),
        _ => rank(input.by_ref(), &id, &model),
    };
    if let Some(e) = input.error {
        return Err(e.into());
    }
    let mut ranked = ranked.context("ranking")?;
    if let Some(path) = rerank_path {
        let second = load_model(path)?;
        let mut second_id = model_id(path);
        if second_id == id {
            second_id.push_str("-rerank");
        }
        ranked = rerank(&ranked, &second_id, &second).context("re-ranking")?;
    }
    if let Some(k) = top {
        ranked.items.truncate(k);
    }
    ranked.write_tsv(stdout).context("writing output")?;
    Ok(())
}

/// Reads a ranking TSV (`rank<TAB>word<TAB>score`) or a plain word list;
/// a word list keeps its line order.
pub fn read_ranking(path: &Path, id: &str) -> anyhow::Result<RankedList> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (word, score) = match fields[..] {
            [w] => (w.trim(), -(items.len() as f64)),
            [_, w, s] => {
                let s: f64 = s.trim().parse().map_err(|_| anyhow!("{}:{}: bad score {s:?}", path.display(), i + 1))?;
                (w.trim(), s)
            }
            _ => bail!("{}:{}: expected a word or rank<TAB>word<TAB>score", path.display(), i + 1),
        };
        if !seen.insert(word.to_string()) {
            bail!("{}:{}: duplicate word {word:?}", path.display(), i + 1);
        }
        let mut c = Candidate::new(word, Provenance::Sampled);
        c.scores.insert(id.to_string(), score);
        items.push(c);
    }
    Ok(RankedList { model_id: id.to_string(), items })
}

#[allow(clippy::too_many_arguments)]
fn study_build(
    design: DesignArg,
    inputs: &[PathBuf],
    fillers: Option<&Path>,
    tags: &[String],
    top: usize,
    intersect: usize,
    seed: u64,
    stdout: &mut dyn Write,
) -> CmdResult {
    if !tags.is_empty() && tags.len() != inputs.len() {
        return Err(Failure::usage(format!("--tags names {} lists but --inputs has {}", tags.len(), inputs.len())));
    }
    let tags: Vec<String> = if tags.is_empty() { inputs.iter().map(|p| model_id(p).to_uppercase()).collect() } else { tags.to_vec() };
    let rankings: Vec<RankedList> = inputs.iter().zip(&tags).map(|(p, t)| read_ranking(p, t)).collect::<anyhow::Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list = match design {
        DesignArg::Perception => match rankings.as_slice() {
            [primary, secondary] => {
                let [g1, g2, g3] = perception_groups(primary, secondary, top, intersect.min(primary.len().min(secondary.len())), &mut rng)
                    .context("selecting perception groups")?;
                build_perception_list(&g1, &g2, &g3).context("building list")?
            }
            [a, b, c] => {
                let head = |l: &RankedList| -> anyhow::Result<Vec<String>> {
                    if l.len() < top {
                        bail!("list {} has {} words, --top is {top}", l.model_id, l.len());
                    }
                    Ok(l.texts().take(top).map(str::to_string).collect())
                };
                build_perception_list(&head(a)?, &head(b)?, &head(c)?).context("building list")?
            }
            _ => return Err(Failure::usage("perception lists take two rankings (primary, secondary) or three groups")),
        },
        DesignArg::Decision => {
            let fillers = fillers.ok_or_else(|| Failure::usage("decision lists need --fillers"))?;
            let selected = select_disjoint_top(&rankings, top).context("selecting non-words")?;
            let chosen: BTreeSet<&str> = selected.iter().flat_map(|r| r.texts()).collect();
            // fillers match the non-words' length when they all share one
            let lengths: BTreeSet<usize> = chosen.iter().map(|w| w.chars().count()).collect();
            let same_length = |w: &str| lengths.len() != 1 || lengths.contains(&w.chars().count());
            let pool: Vec<String> =
                read_ranking(fillers, "FI")?.texts().filter(|w| !chosen.contains(w) && same_length(w)).map(str::to_string).collect();
            let fillers = sample_without_replacement(&pool, top, &mut rng).context("selecting fillers")?;
            let sources: Vec<(String, Vec<String>)> =
                selected.iter().map(|r| (r.model_id.clone(), r.texts().map(str::to_string).collect())).collect();
            build_decision_blocks(&sources, &fillers, &mut rng).context("building blocks")?
        }
    };
    list.seed = Some(seed);
    serde_json::to_writer_pretty(&mut *stdout, &list).context("writing output")?;
    writeln!(stdout).context("writing output")?;
    Ok(())
}

fn study_analyze(path: &Path, proficiency: &[String], json: bool, stdout: &mut dyn Write) -> CmdResult {
    let trials = read_trials(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let trials = if proficiency.is_empty() {
        trials
    } else {
        let allowed: BTreeSet<Proficiency> = proficiency
            .iter()
            .map(|p| p.parse().map_err(|e: String| Failure::usage(format!("--proficiency: {e}"))))
            .collect::<Result<_, _>>()?;
        filter_by_proficiency(&trials, &allowed).context("filtering by proficiency")?
    };
    let analysis = analyze(&trials).context("analyzing trials")?;
    if json {
        serde_json::to_writer_pretty(&mut *stdout, &analysis).context("writing output")?;
        writeln!(stdout).context("writing output")?;
    } else {
        analysis.write_csv(&mut *stdout).context("writing output")?;
    }
    Ok(())
}
