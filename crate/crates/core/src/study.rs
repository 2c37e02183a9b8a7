//! Lexical-decision trial analysis: accuracy, rejection/acceptance/combined
//! reaction times and per-rater normalized averages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("trial log: {0}")]
    Csv(#[from] csv::Error),
    #[error("trial {row}: {message}")]
    InvalidTrial { row: usize, message: String },
    #[error("no mean for rater {rater} in group {group}")]
    MissingCell { rater: String, group: String },
    #[error("no trials remain after filtering")]
    NoRaters,
    #[error("rater {rater} has no positive mean to normalize by")]
    DegenerateRater { rater: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Self-reported proficiency in the target language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Proficiency {
    /// Beginner (A1/A2).
    B,
    /// Intermediate (B1/B2).
    I,
    /// Advanced (C1/C2).
    A,
}

impl FromStr for Proficiency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "B" => Ok(Proficiency::B),
            "I" => Ok(Proficiency::I),
            "A" => Ok(Proficiency::A),
            other => Err(format!("unknown proficiency {other:?} (expected B, I or A)")),
        }
    }
}

impl fmt::Display for Proficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Stimulus source: German-, English- or Swedish-ranked non-words, or fillers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "SV")]
    Sv,
    #[serde(rename = "FI")]
    Fi,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::De, Group::En, Group::Sv, Group::Fi];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::De => "DE",
            Group::En => "EN",
            Group::Sv => "SV",
            Group::Fi => "FI",
        }
    }

    /// Column letter used in the reaction-time table (D, E, S, F).
    pub fn letter(self) -> char {
        match self {
            Group::De => 'D',
            Group::En => 'E',
            Group::Sv => 'S',
            Group::Fi => 'F',
        }
    }

    pub fn is_filler(self) -> bool {
        self == Group::Fi
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DE" => Ok(Group::De),
            "EN" => Ok(Group::En),
            "SV" => Ok(Group::Sv),
            "FI" => Ok(Group::Fi),
            other => Err(format!("unknown group {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Response {
    Accept,
    Reject,
}

/// One lexical-decision response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub rater_id: String,
    pub l1: String,
    pub proficiency: Proficiency,
    pub word: String,
    pub group: Group,
    pub response: Response,
    pub rt_seconds: f64,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rt_seconds.is_finite() && self.rt_seconds > 0.0) {
            return Err(format!("rt_seconds must be positive, got {}", self.rt_seconds));
        }
        if self.rater_id.trim().is_empty() {
            return Err("rater_id is empty".into());
        }
        Ok(())
    }

    /// Correct means rejecting a non-word or accepting a filler.
    pub fn is_correct(&self) -> bool {
        match self.response {
            Response::Accept => self.group.is_filler(),
            Response::Reject => !self.group.is_filler(),
        }
    }
}

/// Reads a `rater_id,l1,proficiency,word,group,response,rt_seconds` CSV.
pub fn read_trials<R: Read>(input: R) -> Result<Vec<TrialRecord>, StudyError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<TrialRecord>().enumerate() {
        let record = row?;
        record.validate().map_err(|message| StudyError::InvalidTrial { row: i + 1, message })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_trials<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), StudyError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

/// Rater ids in order of first appearance.
fn rater_order(records: &[TrialRecord]) -> Vec<&str> {
    let mut seen = BTreeSet::new();
    records.iter().map(|r| r.rater_id.as_str()).filter(|id| seen.insert(*id)).collect()
}

/// Percent correct per rater and group; `None` for cells without trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub rows: Vec<(String, BTreeMap<Group, Option<f64>>)>,
}

impl AccuracyTable {
    pub fn get(&self, rater: &str, group: Group) -> Option<f64> {
        self.rows.iter().find(|(r, _)| r == rater).and_then(|(_, cells)| cells[&group])
    }
}

pub fn accuracy(records: &[TrialRecord]) -> AccuracyTable {
    let mut tally: BTreeMap<(&str, Group), (u64, u64)> = BTreeMap::new();
    for r in records {
        let cell = tally.entry((r.rater_id.as_str(), r.group)).or_default();
        cell.1 += 1;
        if r.is_correct() {
            cell.0 += 1;
        }
    }
    let rows = rater_order(records)
        .into_iter()
        .map(|rater| {
            let cells = Group::ALL.iter().map(|&g| (g, tally.get(&(rater, g)).map(|&(ok, n)| 100.0 * ok as f64 / n as f64))).collect();
            (rater.to_string(), cells)
        })
        .collect();
    AccuracyTable { rows }
}

/// Reaction-time means for one (rater, group) cell, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    /// Mean rejection time (x0); 0 when the rater never rejected.
    pub reject_mean: f64,
    /// Mean acceptance time (x1); 0 when the rater never accepted.
    pub accept_mean: f64,
    /// Mean over all trials in the cell (xC), weighted by counts.
    pub combined_mean: f64,
    pub rejects: u64,
    pub accepts: u64,
}

impl CellStats {
    fn from_sums(reject_sum: f64, rejects: u64, accept_sum: f64, accepts: u64) -> Self {
        let mean = |s: f64, n: u64| if n == 0 { 0.0 } else { s / n as f64 };
        CellStats {
            reject_mean: mean(reject_sum, rejects),
            accept_mean: mean(accept_sum, accepts),
            combined_mean: mean(reject_sum + accept_sum, rejects + accepts),
            rejects,
            accepts,
        }
    }

    /// x0, x1, xC with cells that had no trials as `None`.
    pub fn columns(&self) -> [Option<f64>; 3] {
        [
            (self.rejects > 0).then_some(self.reject_mean),
            (self.accepts > 0).then_some(self.accept_mean),
            (self.rejects + self.accepts > 0).then_some(self.combined_mean),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterGroupStats {
    pub cells: BTreeMap<String, BTreeMap<Group, CellStats>>,
}

impl RaterGroupStats {
    pub fn get(&self, rater: &str, group: Group) -> Option<&CellStats> {
        self.cells.get(rater).and_then(|g| g.get(&group))
    }
}

pub fn group_reaction_times(records: &[TrialRecord]) -> RaterGroupStats {
    let mut sums: BTreeMap<(&str, Group), (f64, u64, f64, u64)> = BTreeMap::new();
    for r in records {
        let s = sums.entry((r.rater_id.as_str(), r.group)).or_default();
        match r.response {
            Response::Reject => {
                s.0 += r.rt_seconds;
                s.1 += 1;
            }
            Response::Accept => {
                s.2 += r.rt_seconds;
                s.3 += 1;
            }
        }
    }
    let mut cells: BTreeMap<String, BTreeMap<Group, CellStats>> = BTreeMap::new();
    for ((rater, group), (rs, rn, as_, an)) in sums {
        cells.entry(rater.to_string()).or_default().insert(group, CellStats::from_sums(rs, rn, as_, an));
    }
    RaterGroupStats { cells }
}

/// Per rater, divides each group mean by the rater's mean of group means;
/// then averages those ratios across raters. Every rater must have a value
/// for every group that any rater has.
pub fn normalized_average<K>(means: &BTreeMap<String, BTreeMap<K, f64>>) -> Result<BTreeMap<K, f64>, StudyError>
where
    K: Ord + Clone + fmt::Display,
{
    if means.is_empty() {
        return Err(StudyError::NoRaters);
    }
    let keys: BTreeSet<&K> = means.values().flat_map(|m| m.keys()).collect();
    let mut sums: BTreeMap<K, f64> = BTreeMap::new();
    for (rater, groups) in means {
        for key in &keys {
            if !groups.contains_key(*key) {
                return Err(StudyError::MissingCell { rater: rater.clone(), group: key.to_string() });
            }
        }
        let rater_mean = groups.values().sum::<f64>() / groups.len() as f64;
        if rater_mean.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(StudyError::DegenerateRater { rater: rater.clone() });
        }
        for (key, value) in groups {
            *sums.entry(key.clone()).or_insert(0.0) += value / rater_mean;
        }
    }
    let n = means.len() as f64;
    Ok(sums.into_iter().map(|(k, s)| (k, s / n)).collect())
}

/// Like [`normalized_average`], for tables where some cells have no
/// trials. Empty cells are left out of each rater's mean and count as 0
/// in the cross-rater average, matching the convention of printing 0 for
/// a response the rater never gave.
pub fn normalized_average_sparse<K>(means: &BTreeMap<String, BTreeMap<K, Option<f64>>>) -> Result<BTreeMap<K, f64>, StudyError>
where
    K: Ord + Clone + fmt::Display,
{
    if means.is_empty() {
        return Err(StudyError::NoRaters);
    }
    let keys: BTreeSet<&K> = means.values().flat_map(|m| m.keys()).collect();
    let mut sums: BTreeMap<K, f64> = keys.iter().map(|k| ((*k).clone(), 0.0)).collect();
    for (rater, groups) in means {
        let present: Vec<f64> = groups.values().flatten().copied().collect();
        let rater_mean = present.iter().sum::<f64>() / present.len() as f64;
        if present.is_empty() || rater_mean.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(StudyError::DegenerateRater { rater: rater.clone() });
        }
        for (key, value) in groups {
            if let Some(v) = value {
                *sums.get_mut(key).expect("key collected above") += v / rater_mean;
            }
        }
    }
    let n = means.len() as f64;
    Ok(sums.into_iter().map(|(k, s)| (k, s / n)).collect())
}

/// Keeps trials whose rater proficiency is in `allowed`.
pub fn filter_by_proficiency(records: &[TrialRecord], allowed: &BTreeSet<Proficiency>) -> Result<Vec<TrialRecord>, StudyError> {
    let out: Vec<TrialRecord> = records.iter().filter(|r| allowed.contains(&r.proficiency)).cloned().collect();
    if out.is_empty() {
        return Err(StudyError::NoRaters);
    }
    Ok(out)
}

/// Reaction-time table column (e.g. `D0`, `SC`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Column {
    pub group: Group,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColumnKind {
    Reject,
    Accept,
    Combined,
}

impl Column {
    pub fn all() -> Vec<Column> {
        Group::ALL
            .iter()
            .flat_map(|&group| [ColumnKind::Reject, ColumnKind::Accept, ColumnKind::Combined].map(|kind| Column { group, kind }))
            .collect()
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.kind {
            ColumnKind::Reject => '0',
            ColumnKind::Accept => '1',
            ColumnKind::Combined => 'C',
        };
        write!(f, "{}{}", self.group.letter(), suffix)
    }
}

impl Serialize for Column {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterSummary {
    pub rater_id: String,
    pub proficiency: Proficiency,
    pub accuracy: BTreeMap<Group, Option<f64>>,
    pub cells: BTreeMap<Group, CellStats>,
}

/// All tables for the raters sharing one L1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Analysis {
    pub l1: String,
    pub raters: Vec<RaterSummary>,
    /// Normalized average of the per-group combined means.
    pub normalized_combined: Option<BTreeMap<Group, f64>>,
    /// Normalized average over all twelve reaction-time columns.
    pub normalized_columns: Option<BTreeMap<Column, f64>>,
    /// The same, excluding beginner raters.
    pub normalized_columns_ia: Option<BTreeMap<Column, f64>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub trial_count: usize,
    pub l1_groups: Vec<L1Analysis>,
}

/// Computes accuracy, reaction-time cells and normalized averages per L1.
pub fn analyze(records: &[TrialRecord]) -> Result<Analysis, StudyError> {
    if records.is_empty() {
        return Err(StudyError::NoRaters);
    }
    let acc = accuracy(records);
    let rts = group_reaction_times(records);

    let mut l1_order: Vec<&str> = Vec::new();
    for r in records {
        if !l1_order.contains(&r.l1.as_str()) {
            l1_order.push(&r.l1);
        }
    }
    let mut l1_groups = Vec::new();
    for l1 in l1_order {
        let mut notes = Vec::new();
        let mut raters = Vec::new();
        for rater in rater_order(records) {
            let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.rater_id == rater).collect();
            if mine[0].l1 != l1 {
                continue;
            }
            if mine.iter().any(|r| r.l1 != l1 || r.proficiency != mine[0].proficiency) {
                notes.push(format!("rater {rater} reports inconsistent l1 or proficiency; first trial wins"));
            }
            let accuracy = acc.rows.iter().find(|(r, _)| r == rater).map(|(_, c)| c.clone()).unwrap_or_default();
            raters.push(RaterSummary {
                rater_id: rater.to_string(),
                proficiency: mine[0].proficiency,
                accuracy,
                cells: rts.cells.get(rater).cloned().unwrap_or_default(),
            });
        }

        let combined: BTreeMap<String, BTreeMap<Group, f64>> =
            raters.iter().map(|r| (r.rater_id.clone(), r.cells.iter().map(|(g, c)| (*g, c.combined_mean)).collect())).collect();
        let normalized_combined = normalized_average(&combined).map_err(|e| notes.push(e.to_string())).ok();

        let columns = |subset: &[&RaterSummary]| -> BTreeMap<String, BTreeMap<Column, Option<f64>>> {
            subset
                .iter()
                .map(|r| {
                    let cells = Column::all()
                        .into_iter()
                        .map(|col| {
                            let v = r.cells.get(&col.group).and_then(|c| c.columns()[col.kind as usize]);
                            (col, v)
                        })
                        .collect();
                    (r.rater_id.clone(), cells)
                })
                .collect()
        };
        let everyone: Vec<&RaterSummary> = raters.iter().collect();
        let normalized_columns = normalized_average_sparse(&columns(&everyone)).map_err(|e| notes.push(e.to_string())).ok();
        let non_beginners: Vec<&RaterSummary> = raters.iter().filter(|r| r.proficiency != Proficiency::B).collect();
        let normalized_columns_ia = if non_beginners.is_empty() {
            None
        } else {
            normalized_average_sparse(&columns(&non_beginners)).map_err(|e| notes.push(e.to_string())).ok()
        };

        l1_groups.push(L1Analysis { l1: l1.to_string(), raters, normalized_combined, normalized_columns, normalized_columns_ia, notes });
    }
    Ok(Analysis { trial_count: records.len(), l1_groups })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

impl Analysis {
    /// CSV tables: per L1, the combined-means table with its normalized
    /// average, the accuracy table, and the twelve-column reaction-time
    /// table with normalized rows. Sections start with a `# ` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, g) in self.l1_groups.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            writeln!(out, "# combined l1={}", g.l1)?;
            let ids: Vec<&str> = g.raters.iter().map(|r| r.rater_id.as_str()).collect();
            writeln!(out, "group,{},nAvg", ids.join(","))?;
            for group in Group::ALL {
                let row: Vec<String> = g.raters.iter().map(|r| cell(r.cells.get(&group).map(|c| c.combined_mean))).collect();
                let n = g.normalized_combined.as_ref().and_then(|m| m.get(&group).copied());
                writeln!(out, "{},{},{}", group, row.join(","), cell(n))?;
            }

            writeln!(out)?;
            writeln!(out, "# accuracy l1={}", g.l1)?;
            writeln!(out, "rater,proficiency,DE,EN,SV,FI")?;
            for r in &g.raters {
                let row: Vec<String> = Group::ALL.iter().map(|gr| cell(r.accuracy.get(gr).copied().flatten())).collect();
                writeln!(out, "{},{},{}", r.rater_id, r.proficiency, row.join(","))?;
            }

            writeln!(out)?;
            writeln!(out, "# reaction_times l1={}", g.l1)?;
            let cols = Column::all();
            let header: Vec<String> = cols.iter().map(Column::to_string).collect();
            writeln!(out, "rater,proficiency,{}", header.join(","))?;
            for r in &g.raters {
                let row: Vec<String> = cols
                    .iter()
                    .map(|col| {
                        let stats = r.cells.get(&col.group);
                        // a response never given prints as 0
                        cell(stats.map(|c| match col.kind {
                            ColumnKind::Reject => c.reject_mean,
                            ColumnKind::Accept => c.accept_mean,
                            ColumnKind::Combined => c.combined_mean,
                        }))
                    })
                    .collect();
                writeln!(out, "{},{},{}", r.rater_id, r.proficiency, row.join(","))?;
            }
            for (label, norm) in [("nA", &g.normalized_columns), ("nA2", &g.normalized_columns_ia)] {
                if let Some(norm) = norm {
                    let row: Vec<String> = cols.iter().map(|c| cell(norm.get(c).copied())).collect();
                    writeln!(out, "{label},,{}", row.join(","))?;
                }
            }
        }
        Ok(())
    }
}
