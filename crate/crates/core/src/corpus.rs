//! Tweet datasets: items, the TSV file format, HQT/NQT pairing and
//! partition checks.
//!
//! File format (one item per line, tab separated, `NONE` for absent fields):
//!
//! ```text
//! id  text  emotion  partition  kind:pair_id  score
//! ```
//!
//! `raw_tsv` files carry the first five columns only.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NONE_FIELD: &str = "NONE";

#[derive(Error, Debug)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Fear,
    Joy,
    Sadness,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [Emotion::Anger, Emotion::Fear, Emotion::Joy, Emotion::Sadness];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
        }
    }

    /// Adjective used in the annotation questionnaire ("MOST fearful").
    pub fn adjective(self) -> &'static str {
        match self {
            Emotion::Anger => "angry",
            Emotion::Fear => "fearful",
            Emotion::Joy => "joyful",
            Emotion::Sadness => "sad",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "anger" => Ok(Emotion::Anger),
            "fear" => Ok(Emotion::Fear),
            "joy" => Ok(Emotion::Joy),
            "sadness" => Ok(Emotion::Sadness),
            other => Err(format!("unknown emotion '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
    Unassigned,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
            Partition::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            "unassigned" | "none" => Ok(Partition::Unassigned),
            other => Err(format!("unknown partition '{other}'")),
        }
    }
}

/// Provenance of a tweet with respect to its query term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    /// Query term appears as a trailing hashtag.
    Hqt,
    /// Copy of an HQT tweet with the query-term hashtag removed.
    Nqt,
    /// Query term appears elsewhere in the tweet.
    Qt,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Hqt => "HQT",
            ItemKind::Nqt => "NQT",
            ItemKind::Qt => "QT",
        }
    }
}

impl FromStr for ItemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HQT" => Ok(ItemKind::Hqt),
            "NQT" => Ok(ItemKind::Nqt),
            "QT" => Ok(ItemKind::Qt),
            other => Err(format!("unknown item kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
    pub emotion: Emotion,
    pub partition: Partition,
    pub kind: ItemKind,
    pub pair_id: Option<String>,
    pub gold_score: Option<f64>,
}

impl Item {
    /// Checks the per-item invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::Validation("empty item id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(CorpusError::Validation(format!("item {} has empty text", self.id)));
        }
        if self.kind == ItemKind::Nqt && self.pair_id.is_none() {
            return Err(CorpusError::Validation(format!(
                "NQT item {} has no pair id",
                self.id
            )));
        }
        if self.kind == ItemKind::Qt && self.pair_id.is_some() {
            return Err(CorpusError::Validation(format!(
                "QT item {} carries a pair id",
                self.id
            )));
        }
        if let Some(score) = self.gold_score {
            if !(0.0..=1.0).contains(&score) {
                return Err(CorpusError::Validation(format!(
                    "item {} score {score} outside [0,1]",
                    self.id
                )));
            }
        }
        if self.text.contains(['\t', '\n', '\r']) {
            return Err(CorpusError::Validation(format!(
                "item {} text contains a tab or line break",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// Six columns including the gold score.
    ScoredTsv,
    /// Five columns, no score.
    RawTsv,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scored_tsv" | "scored" => Ok(DatasetFormat::ScoredTsv),
            "raw_tsv" | "raw" => Ok(DatasetFormat::RawTsv),
            other => Err(format!("unknown dataset format '{other}'")),
        }
    }
}

/// Items of a single emotion. `emotion` is `None` only for an empty dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub items: Vec<Item>,
    pub emotion: Option<Emotion>,
}

impl Dataset {
    pub fn new(items: Vec<Item>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(items.len());
        let mut emotion = None;
        for item in &items {
            item.validate()?;
            if !seen.insert(item.id.as_str()) {
                return Err(CorpusError::Validation(format!("duplicate id {}", item.id)));
            }
            match emotion {
                None => emotion = Some(item.emotion),
                Some(e) if e != item.emotion => {
                    return Err(CorpusError::Validation(format!(
                        "item {} has emotion {} but dataset is {e}",
                        item.id, item.emotion
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Self { items, emotion })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|item| item.id == id)
    }

    pub fn in_partitions<'a>(&'a self, parts: &'a [Partition]) -> impl Iterator<Item = &'a Item> + 'a {
        self.items.iter().filter(move |item| parts.contains(&item.partition))
    }

    pub fn to_tsv(&self, format: DatasetFormat) -> String {
        let mut out = String::new();
        for item in &self.items {
            let pair = item.pair_id.as_deref().unwrap_or(NONE_FIELD);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}:{}",
                item.id,
                item.text,
                item.emotion,
                item.partition,
                item.kind.as_str(),
                pair
            ));
            if format == DatasetFormat::ScoredTsv {
                match item.gold_score {
                    Some(score) => out.push_str(&format!("\t{score}")),
                    None => out.push_str(&format!("\t{NONE_FIELD}")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn parse_optional(field: &str) -> Option<&str> {
    let field = field.trim();
    if field.is_empty() || field == NONE_FIELD {
        None
    } else {
        Some(field)
    }
}

/// Parses dataset TSV text. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn parse_dataset(content: &str, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    let expected = match format {
        DatasetFormat::ScoredTsv => 6,
        DatasetFormat::RawTsv => 5,
    };
    let mut items = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != expected {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("expected {expected} columns, found {}", cols.len()),
            });
        }
        let parse_err = |message: String| CorpusError::Parse { line: line_no, message };
        let emotion = cols[2].parse::<Emotion>().map_err(parse_err)?;
        let partition = cols[3].parse::<Partition>().map_err(parse_err)?;
        let (kind_str, pair_str) = cols[4]
            .split_once(':')
            .ok_or_else(|| parse_err(format!("kind field '{}' is not kind:pair_id", cols[4])))?;
        let kind = kind_str.parse::<ItemKind>().map_err(parse_err)?;
        let gold_score = if format == DatasetFormat::ScoredTsv {
            match parse_optional(cols[5]) {
                None => None,
                Some(s) => Some(
                    s.parse::<f64>()
                        .map_err(|e| parse_err(format!("bad score '{s}': {e}")))?,
                ),
            }
        } else {
            None
        };
        let item = Item {
            id: cols[0].trim().to_string(),
            text: cols[1].to_string(),
            emotion,
            partition,
            kind,
            pair_id: parse_optional(pair_str).map(str::to_string),
            gold_score,
        };
        items.push(item);
    }
    Dataset::new(items)
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&content, format)
}

pub fn write_dataset(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, dataset.to_tsv(format)).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn normalize_hashtag(token: &str) -> Option<String> {
    if !token.starts_with('#') {
        return None;
    }
    let mut tag = token.to_lowercase();
    if let Some(last) = tag.chars().last() {
        if tag.chars().count() > 2 && last.is_ascii_punctuation() {
            tag.pop();
        }
    }
    Some(tag)
}

/// Removes query-term hashtags from the trailing run of hashtag tokens.
///
/// Returns `None` when the tweet does not end in such a run or none of the
/// trailing hashtags is `#<query term>`. Matching is case-insensitive and
/// tolerates one trailing punctuation character on the hashtag token.
pub fn strip_trailing_hashtag(text: &str, query_terms: &BTreeSet<String>) -> Option<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let run_start = tokens
        .iter()
        .rposition(|t| !t.starts_with('#'))
        .map_or(0, |pos| pos + 1);
    if run_start == tokens.len() {
        return None;
    }
    let is_query = |token: &str| {
        normalize_hashtag(token)
            .map(|tag| query_terms.contains(&tag[1..]))
            .unwrap_or(false)
    };
    if !tokens[run_start..].iter().any(|t| is_query(t)) {
        return None;
    }
    let kept: Vec<&str> = tokens[..run_start]
        .iter()
        .copied()
        .chain(tokens[run_start..].iter().copied().filter(|t| !is_query(t)))
        .collect();
    if kept.is_empty() {
        return None;
    }
    Some(kept.join(" "))
}

/// Resolves every HQT/NQT pair, ordered by NQT position in the dataset.
pub fn hqt_nqt_pairs(dataset: &Dataset) -> Result<Vec<(&Item, &Item)>, CorpusError> {
    let by_id: HashMap<&str, &Item> = dataset.items.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut pairs = Vec::new();
    let mut paired_hqt = HashSet::new();
    for item in &dataset.items {
        if item.kind != ItemKind::Nqt {
            continue;
        }
        let pair_id = item.pair_id.as_deref().unwrap_or_default();
        let hqt = by_id
            .get(pair_id)
            .filter(|h| h.kind == ItemKind::Hqt)
            .ok_or_else(|| {
                CorpusError::Validation(format!(
                    "NQT item {} references missing HQT item {pair_id}",
                    item.id
                ))
            })?;
        if let Some(back) = hqt.pair_id.as_deref() {
            if back != item.id {
                return Err(CorpusError::Validation(format!(
                    "HQT item {} pairs with {back}, not {}",
                    hqt.id, item.id
                )));
            }
        }
        paired_hqt.insert(hqt.id.as_str());
        pairs.push((*hqt, item));
    }
    for item in &dataset.items {
        if item.kind == ItemKind::Hqt && item.pair_id.is_some() && !paired_hqt.contains(item.id.as_str()) {
            return Err(CorpusError::Validation(format!(
                "HQT item {} references missing NQT item {}",
                item.id,
                item.pair_id.as_deref().unwrap_or_default()
            )));
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionViolation {
    pub hqt_id: String,
    pub nqt_id: String,
    pub hqt_partition: Partition,
    pub nqt_partition: Partition,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionReport {
    pub counts: BTreeMap<Partition, usize>,
    pub violations: Vec<PartitionViolation>,
}

impl PartitionReport {
    pub fn count(&self, partition: Partition) -> usize {
        self.counts.get(&partition).copied().unwrap_or(0)
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for PartitionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (partition, count) in &self.counts {
            writeln!(f, "{partition}\t{count}")?;
        }
        for v in &self.violations {
            writeln!(
                f,
                "violation\tHQT {} in {}\tNQT {} in {}",
                v.hqt_id, v.hqt_partition, v.nqt_id, v.nqt_partition
            )?;
        }
        Ok(())
    }
}

/// Per-partition counts and HQT/NQT co-partition violations. Dangling pair
/// ids are not violations here; `hqt_nqt_pairs` reports them.
pub fn validate_partitions(dataset: &Dataset) -> PartitionReport {
    let mut report = PartitionReport::default();
    for item in &dataset.items {
        *report.counts.entry(item.partition).or_default() += 1;
    }
    let by_id: HashMap<&str, &Item> = dataset.items.iter().map(|i| (i.id.as_str(), i)).collect();
    for item in dataset.items.iter().filter(|i| i.kind == ItemKind::Nqt) {
        let Some(hqt) = item.pair_id.as_deref().and_then(|p| by_id.get(p)) else {
            continue;
        };
        if hqt.partition != item.partition {
            report.violations.push(PartitionViolation {
                hqt_id: hqt.id.clone(),
                nqt_id: item.id.clone(),
                hqt_partition: hqt.partition,
                nqt_partition: item.partition,
            });
        }
    }
    report
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairReconstruction {
    pub matched: Vec<(String, String)>,
    /// Tweets ending in a query-term hashtag whose stripped text matched no
    /// other tweet.
    pub unmatched_hqt: Vec<String>,
    /// Stripped texts shared by several candidates; left unpaired.
    pub ambiguous: Vec<String>,
}

/// Best-effort pairing for datasets without pair metadata: an item whose
/// stripped text exactly equals another item's text becomes HQT, the other
/// NQT. Items already carrying pair ids are left untouched.
pub fn reconstruct_pairs(
    dataset: &Dataset,
    query_terms: &BTreeSet<String>,
) -> Result<(Dataset, PairReconstruction), CorpusError> {
    let mut text_index: HashMap<String, Vec<usize>> = HashMap::new();
    for (idx, item) in dataset.items.iter().enumerate() {
        if item.pair_id.is_none() {
            let key = item.text.split_whitespace().collect::<Vec<_>>().join(" ");
            text_index.entry(key).or_default().push(idx);
        }
    }
    let mut items = dataset.items.clone();
    let mut report = PairReconstruction::default();
    let mut taken = vec![false; items.len()];
    for idx in 0..dataset.items.len() {
        let item = &dataset.items[idx];
        if item.pair_id.is_some() || taken[idx] {
            continue;
        }
        let Some(stripped) = strip_trailing_hashtag(&item.text, query_terms) else {
            continue;
        };
        let candidates: Vec<usize> = text_index
            .get(&stripped)
            .map(|c| c.iter().copied().filter(|&c| c != idx && !taken[c]).collect())
            .unwrap_or_default();
        match candidates.as_slice() {
            [] => report.unmatched_hqt.push(item.id.clone()),
            [nqt] => {
                let nqt = *nqt;
                taken[idx] = true;
                taken[nqt] = true;
                let hqt_id = items[idx].id.clone();
                let nqt_id = items[nqt].id.clone();
                items[idx].kind = ItemKind::Hqt;
                items[idx].pair_id = Some(nqt_id.clone());
                items[nqt].kind = ItemKind::Nqt;
                items[nqt].pair_id = Some(hqt_id.clone());
                report.matched.push((hqt_id, nqt_id));
            }
            _ => report.ambiguous.push(item.id.clone()),
        }
    }
    Ok((Dataset::new(items)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(ts: &[&str]) -> BTreeSet<String> {
        ts.iter().map(|s| s.to_string()).collect()
    }

    fn item(id: &str, kind: ItemKind, pair: Option<&str>, partition: Partition) -> Item {
        Item {
            id: id.into(),
            text: format!("tweet {id}"),
            emotion: Emotion::Fear,
            partition,
            kind,
            pair_id: pair.map(Into::into),
            gold_score: Some(0.5),
        }
    }

    #[test]
    fn strips_query_hashtag_from_trailing_run() {
        let out = strip_trailing_hashtag(
            "This mindless support of a demagogue needs to stop. #racism #grrr #angry",
            &terms(&["angry"]),
        );
        assert_eq!(
            out.as_deref(),
            Some("This mindless support of a demagogue needs to stop. #racism #grrr")
        );
        assert_eq!(
            strip_trailing_hashtag("feeling low #sad #tired", &terms(&["sad"])).as_deref(),
            Some("feeling low #tired")
        );
    }

    #[test]
    fn leading_hashtag_is_not_trailing() {
        assert_eq!(strip_trailing_hashtag("#angry at the start only", &terms(&["angry"])), None);
    }

    #[test]
    fn hashtag_match_ignores_case_and_trailing_punct() {
        assert_eq!(
            strip_trailing_hashtag("so   scared  #Afraid!", &terms(&["afraid"])).as_deref(),
            Some("so scared")
        );
        assert_eq!(strip_trailing_hashtag("#afraid", &terms(&["afraid"])), None);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "a\thi\tfear\ttrain\tQT:NONE\t0.5\nb\tbad line\n";
        match parse_dataset(text, DatasetFormat::ScoredTsv) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_score_and_duplicates_rejected() {
        let bad = "a\thi\tfear\ttrain\tQT:NONE\t1.5\n";
        assert!(matches!(
            parse_dataset(bad, DatasetFormat::ScoredTsv),
            Err(CorpusError::Validation(_))
        ));
        let dup = "a\thi\tfear\ttrain\tQT:NONE\t0.5\na\tyo\tfear\ttrain\tQT:NONE\t0.5\n";
        assert!(matches!(
            parse_dataset(dup, DatasetFormat::ScoredTsv),
            Err(CorpusError::Validation(_))
        ));
    }

    #[test]
    fn empty_file_gives_empty_dataset() {
        let ds = parse_dataset("", DatasetFormat::ScoredTsv).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.emotion, None);
    }

    #[test]
    fn raw_format_has_no_scores() {
        let ds = parse_dataset("a\thi there\tjoy\tdev\tQT:NONE", DatasetFormat::RawTsv).unwrap();
        assert_eq!(ds.items[0].gold_score, None);
        assert_eq!(ds.items[0].partition, Partition::Dev);
    }

    #[test]
    fn crossed_pairs_match_by_id() {
        let items = vec![
            item("h1", ItemKind::Hqt, Some("n1"), Partition::Train),
            item("h2", ItemKind::Hqt, Some("n2"), Partition::Train),
            item("n2", ItemKind::Nqt, Some("h2"), Partition::Train),
            item("n1", ItemKind::Nqt, Some("h1"), Partition::Train),
        ];
        let ds = Dataset::new(items).unwrap();
        let pairs = hqt_nqt_pairs(&ds).unwrap();
        let ids: Vec<(&str, &str)> = pairs.iter().map(|(h, n)| (h.id.as_str(), n.id.as_str())).collect();
        assert_eq!(ids, vec![("h2", "n2"), ("h1", "n1")]);
    }

    #[test]
    fn dangling_pair_is_an_error() {
        let ds = Dataset::new(vec![item("n1", ItemKind::Nqt, Some("h9"), Partition::Train)]).unwrap();
        assert!(matches!(hqt_nqt_pairs(&ds), Err(CorpusError::Validation(_))));
    }

    #[test]
    fn no_hqt_means_no_pairs() {
        let ds = Dataset::new(vec![item("q", ItemKind::Qt, None, Partition::Test)]).unwrap();
        assert!(hqt_nqt_pairs(&ds).unwrap().is_empty());
    }

    #[test]
    fn partition_violation_names_both_ids() {
        let ds = Dataset::new(vec![
            item("h1", ItemKind::Hqt, Some("n1"), Partition::Train),
            item("n1", ItemKind::Nqt, Some("h1"), Partition::Test),
        ])
        .unwrap();
        let report = validate_partitions(&ds);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].hqt_id, "h1");
        assert_eq!(report.violations[0].nqt_id, "n1");
        assert_eq!(report.count(Partition::Train), 1);
        assert_eq!(report.count(Partition::Test), 1);
    }

    #[test]
    fn single_unassigned_item() {
        let ds = Dataset::new(vec![item("q", ItemKind::Qt, None, Partition::Unassigned)]).unwrap();
        let report = validate_partitions(&ds);
        assert_eq!(report.counts.len(), 1);
        assert_eq!(report.count(Partition::Unassigned), 1);
        assert!(report.is_clean());
    }

    #[test]
    fn reconstruction_pairs_exact_text_matches() {
        let mut a = item("a", ItemKind::Qt, None, Partition::Train);
        a.text = "so nervous about tomorrow #nervous".into();
        let mut b = item("b", ItemKind::Qt, None, Partition::Train);
        b.text = "so nervous about tomorrow".into();
        let mut c = item("c", ItemKind::Qt, None, Partition::Train);
        c.text = "dark alley #scared".into();
        let ds = Dataset::new(vec![a, b, c]).unwrap();
        let (paired, report) = reconstruct_pairs(&ds, &terms(&["nervous", "scared"])).unwrap();
        assert_eq!(report.matched, vec![("a".to_string(), "b".to_string())]);
        assert_eq!(report.unmatched_hqt, vec!["c".to_string()]);
        assert_eq!(hqt_nqt_pairs(&paired).unwrap().len(), 1);
    }
}
