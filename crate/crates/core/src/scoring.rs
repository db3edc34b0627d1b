//! Counting scores, split-half reliability and the hashtag-impact report.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{Response, ResponseSet};
use crate::corpus::Item;
use crate::design::TupleDesign;
use crate::stats::{self, StatsError};

pub const DEFAULT_SHR_REPETITIONS: usize = 100;
/// Redraws allowed for a split-half repetition whose bins are unusable.
pub const SHR_MAX_RETRIES: usize = 20;

pub const SCORE_HEADER: &str = "item_id\traw\tunipolar\tappearances\tbest_count\tworst_count";

#[derive(Error, Debug)]
pub enum ScoringError {
    #[error("no responses to score")]
    Empty,
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("split-half reliability needs at least 2 responses per tuple; tuple {tuple_index} has {count}")]
    TooFewPerTuple { tuple_index: usize, count: usize },
    #[error("split-half repetition {repetition} failed after {retries} redraws: {source}")]
    ShrFailed {
        repetition: usize,
        retries: usize,
        #[source]
        source: StatsError,
    },
    #[error("pair {index} lacks a score for {id}")]
    MissingScore { index: usize, id: String },
    #[error("no pairs to analyse")]
    NoPairs,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub raw: f64,
    pub unipolar: f64,
    pub appearances: u32,
    pub best: u32,
    pub worst: u32,
}

impl ItemScore {
    pub fn from_counts(appearances: u32, best: u32, worst: u32) -> Self {
        // one rounding from the exact rational
        let raw = (best as f64 - worst as f64) / appearances as f64;
        Self {
            raw,
            unipolar: unipolar(raw),
            appearances,
            best,
            worst,
        }
    }
}

pub fn unipolar(raw: f64) -> f64 {
    (raw + 1.0) / 2.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub scores: BTreeMap<String, ItemScore>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ItemScore> {
        self.scores.get(id)
    }

    pub fn unipolar(&self, id: &str) -> Option<f64> {
        self.scores.get(id).map(|s| s.unipolar)
    }

    /// Ids from most to least intense; ties by id.
    pub fn ranking(&self) -> Vec<&str> {
        let mut ids: Vec<(&str, f64)> = self.scores.iter().map(|(k, v)| (k.as_str(), v.raw)).collect();
        ids.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        ids.into_iter().map(|(id, _)| id).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(SCORE_HEADER);
        out.push('\n');
        for (id, s) in &self.scores {
            out.push_str(&format!(
                "{id}\t{}\t{}\t{}\t{}\t{}\n",
                s.raw, s.unipolar, s.appearances, s.best, s.worst
            ));
        }
        out
    }

    /// Counts are authoritative; score columns are recomputed from them.
    pub fn from_tsv(content: &str) -> Result<Self, ScoringError> {
        let mut table = Self::default();
        for (idx, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line == SCORE_HEADER {
                continue;
            }
            let parse_err = |message: String| ScoringError::Parse { line: idx + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 6 {
                return Err(parse_err(format!("expected 6 columns, found {}", cols.len())));
            }
            let count = |s: &str| s.parse::<u32>().map_err(|e| parse_err(format!("bad count '{s}': {e}")));
            let (app, best, worst) = (count(cols[3])?, count(cols[4])?, count(cols[5])?);
            if app == 0 || best + worst > app {
                return Err(parse_err(format!("inconsistent counts {app}/{best}/{worst}")));
            }
            table.scores.insert(cols[0].to_string(), ItemScore::from_counts(app, best, worst));
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScoringError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScoringError> {
        let path = path.as_ref();
        Self::from_tsv(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ScoringError {
    ScoringError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn check_response(design: &TupleDesign, r: &Response) -> Result<[usize; 4], ScoringError> {
    let tuple = *design
        .tuples
        .get(r.tuple_index)
        .ok_or_else(|| ScoringError::InvalidResponse(format!("tuple {} out of range", r.tuple_index)))?;
    r.validate(design).map_err(|e| ScoringError::InvalidResponse(e.to_string()))?;
    Ok(tuple)
}

/// Best-minus-worst counting over every judgment.
pub fn compute_scores(responses: &ResponseSet) -> Result<ScoreTable, ScoringError> {
    score_subset(&responses.design, responses.responses.iter())
}

fn score_subset<'a>(
    design: &TupleDesign,
    responses: impl Iterator<Item = &'a Response>,
) -> Result<ScoreTable, ScoringError> {
    let mut counts: BTreeMap<usize, (u32, u32, u32)> = BTreeMap::new();
    let mut any = false;
    for r in responses {
        any = true;
        let tuple = check_response(design, r)?;
        for idx in tuple {
            let c = counts.entry(idx).or_default();
            c.0 += 1;
            let id = &design.items[idx];
            if *id == r.best {
                c.1 += 1;
            }
            if *id == r.worst {
                c.2 += 1;
            }
        }
    }
    if !any {
        return Err(ScoringError::Empty);
    }
    let scores = counts
        .into_iter()
        .map(|(idx, (a, b, w))| (design.items[idx].clone(), ItemScore::from_counts(a, b, w)))
        .collect();
    Ok(ScoreTable { scores })
}

/// The five orderings implied by one judgment: best above the other three,
/// the two middle items above worst. Returned as (higher, lower).
pub fn pair_orders(design: &TupleDesign, response: &Response) -> Result<Vec<(String, String)>, ScoringError> {
    let tuple = check_response(design, response)?;
    let (best, worst) = (&response.best, &response.worst);
    let mut out = Vec::with_capacity(5);
    for idx in tuple {
        let id = &design.items[idx];
        if id != best {
            out.push((best.clone(), id.clone()));
        }
    }
    for idx in tuple {
        let id = &design.items[idx];
        if id != best && id != worst {
            out.push((id.clone(), worst.clone()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrResult {
    pub repetitions: usize,
    pub mean_pearson: f64,
    pub mean_spearman: f64,
    pub per_repetition: Vec<(f64, f64)>,
}

impl fmt::Display for ShrResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "split-half reliability over {} repetitions: pearson {:.4}, spearman {:.4}",
            self.repetitions, self.mean_pearson, self.mean_spearman
        )
    }
}

/// Bin score of each item: per tuple, the item's best share minus worst
/// share among that tuple's judgments in the bin, averaged over the item's
/// tuples that received any judgment in the bin.
fn bin_scores(design: &TupleDesign, groups: &[Vec<&Response>]) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, u32)> = BTreeMap::new();
    for (t, group) in groups.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let k = group.len() as f64;
        for &idx in &design.tuples[t] {
            let id = &design.items[idx];
            let best = group.iter().filter(|r| r.best == *id).count() as f64;
            let worst = group.iter().filter(|r| r.worst == *id).count() as f64;
            let e = acc.entry(idx).or_default();
            e.0 += (best - worst) / k;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(idx, (sum, n))| (idx, unipolar(sum / n as f64))).collect()
}

fn shr_repetition(
    design: &TupleDesign,
    groups: &[Vec<&Response>],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), StatsError> {
    let mut bin_a = Vec::with_capacity(groups.len());
    let mut bin_b = Vec::with_capacity(groups.len());
    for group in groups {
        let mut shuffled = group.clone();
        shuffled.shuffle(rng);
        let split = if shuffled.len() >= 2 { rng.gen_range(1..shuffled.len()) } else { shuffled.len() };
        let rest = shuffled.split_off(split);
        bin_a.push(shuffled);
        bin_b.push(rest);
    }
    let a = bin_scores(design, &bin_a);
    let b = bin_scores(design, &bin_b);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (idx, va) in &a {
        if let Some(vb) = b.get(idx) {
            xs.push(*va);
            ys.push(*vb);
        }
    }
    Ok((stats::pearson(&xs, &ys)?, stats::spearman(&xs, &ys)?))
}

/// Split-half reliability: each repetition routes a random non-empty proper
/// subset of every tuple's judgments to one bin and the rest to the other.
/// Repetitions run in parallel with seeds derived from `seed`.
pub fn split_half_reliability(
    responses: &ResponseSet,
    repetitions: usize,
    seed: u64,
) -> Result<ShrResult, ScoringError> {
    if responses.is_empty() {
        return Err(ScoringError::Empty);
    }
    let design = &responses.design;
    for r in &responses.responses {
        check_response(design, r)?;
    }
    let groups = responses.by_tuple();
    for (t, g) in groups.iter().enumerate() {
        if g.len() == 1 {
            return Err(ScoringError::TooFewPerTuple { tuple_index: t, count: 1 });
        }
    }
    let per_repetition = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut last = StatsError::ConstantInput;
            for retry in 0..=SHR_MAX_RETRIES {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(retry as u64));
                rng.set_stream(rep as u64);
                match shr_repetition(design, &groups, &mut rng) {
                    Ok(v) => return Ok(v),
                    Err(e) => last = e,
                }
            }
            Err(ScoringError::ShrFailed {
                repetition: rep,
                retries: SHR_MAX_RETRIES,
                source: last,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_repetition.len().max(1) as f64;
    Ok(ShrResult {
        repetitions,
        mean_pearson: per_repetition.iter().map(|p| p.0).sum::<f64>() / n,
        mean_spearman: per_repetition.iter().map(|p| p.1).sum::<f64>() / n,
        per_repetition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagImpactReport {
    pub pair_count: usize,
    pub pct_drop: f64,
    pub pct_rise: f64,
    pub pct_none: f64,
    pub mean_hqt: f64,
    pub mean_nqt: f64,
    pub mean_drop_magnitude: f64,
    pub mean_rise_magnitude: f64,
    /// `None` when every pair is unchanged.
    pub wilcoxon_p: Option<f64>,
}

/// Impact of removing the trailing emotion hashtag, over `(hqt, nqt)` score pairs.
pub fn hashtag_impact_scores(pairs: &[(f64, f64)]) -> Result<HashtagImpactReport, ScoringError> {
    if pairs.is_empty() {
        return Err(ScoringError::NoPairs);
    }
    let n = pairs.len() as f64;
    let drops: Vec<f64> = pairs.iter().filter(|(h, q)| q < h).map(|(h, q)| h - q).collect();
    let rises: Vec<f64> = pairs.iter().filter(|(h, q)| q > h).map(|(h, q)| q - h).collect();
    let none = pairs.len() - drops.len() - rises.len();
    let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { stats::mean(v) };
    let wilcoxon_p = match stats::wilcoxon_signed_rank(pairs) {
        Ok(r) => Some(r.p_value),
        Err(StatsError::Degenerate) => None,
        Err(e) => {
            return Err(ScoringError::InvalidResponse(format!("bad pair scores: {e}")));
        }
    };
    Ok(HashtagImpactReport {
        pair_count: pairs.len(),
        pct_drop: 100.0 * drops.len() as f64 / n,
        pct_rise: 100.0 * rises.len() as f64 / n,
        pct_none: 100.0 * none as f64 / n,
        mean_hqt: pairs.iter().map(|p| p.0).sum::<f64>() / n,
        mean_nqt: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        mean_drop_magnitude: avg(&drops),
        mean_rise_magnitude: avg(&rises),
        wilcoxon_p,
    })
}

pub fn hashtag_impact(pairs: &[(&Item, &Item)]) -> Result<HashtagImpactReport, ScoringError> {
    let scores = pair_scores(pairs)?;
    hashtag_impact_scores(&scores)
}

fn pair_scores(pairs: &[(&Item, &Item)]) -> Result<Vec<(f64, f64)>, ScoringError> {
    pairs
        .iter()
        .enumerate()
        .map(|(index, (h, q))| {
            let get = |it: &Item| {
                it.gold_score.ok_or_else(|| ScoringError::MissingScore {
                    index,
                    id: it.id.clone(),
                })
            };
            Ok((get(h)?, get(q)?))
        })
        .collect()
}

/// Last whitespace-separated token of `text` that starts with `#`, without
/// trailing punctuation.
pub fn trailing_hashtag(text: &str) -> Option<&str> {
    let last = text.split_whitespace().last()?;
    let tag = last.trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '#' && c != '_');
    (tag.starts_with('#') && tag.len() > 1).then_some(tag)
}

/// Scatter rows `hqt_score \t nqt_score \t hashtag` for external plotting.
pub fn hashtag_scatter_tsv(pairs: &[(&Item, &Item)]) -> Result<String, ScoringError> {
    let scores = pair_scores(pairs)?;
    let mut out = String::from("hqt_score\tnqt_score\thashtag\n");
    for ((h, _), (hs, qs)) in pairs.iter().zip(scores) {
        let tag = trailing_hashtag(&h.text).unwrap_or("NONE");
        out.push_str(&format!("{hs}\t{qs}\t{tag}\n"));
    }
    Ok(out)
}

impl HashtagImpactReport {
    pub fn to_key_values(&self) -> String {
        let p = self.wilcoxon_p.map_or("NA".to_string(), |p| p.to_string());
        format!(
            "pair_count={}\npct_drop={:.1}\npct_rise={:.1}\npct_none={:.1}\nmean_hqt={}\nmean_nqt={}\nmean_drop_magnitude={}\nmean_rise_magnitude={}\nwilcoxon_p={p}\n",
            self.pair_count,
            self.pct_drop,
            self.pct_rise,
            self.pct_none,
            self.mean_hqt,
            self.mean_nqt,
            self.mean_drop_magnitude,
            self.mean_rise_magnitude,
        )
    }
}

impl fmt::Display for HashtagImpactReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hashtag removal impact over {} pairs", self.pair_count)?;
        writeln!(
            f,
            "  drop {:.1}%  rise {:.1}%  none {:.1}%",
            self.pct_drop, self.pct_rise, self.pct_none
        )?;
        writeln!(f, "  mean score: HQT {:.2}  NQT {:.2}", self.mean_hqt, self.mean_nqt)?;
        writeln!(
            f,
            "  mean magnitude: drop {:.2}  rise {:.2}",
            self.mean_drop_magnitude, self.mean_rise_magnitude
        )?;
        match self.wilcoxon_p {
            Some(p) => write!(f, "  wilcoxon signed-rank p = {p:.4}{}", if p < 0.05 { " (significant at 0.05)" } else { "" }),
            None => write!(f, "  wilcoxon signed-rank: not applicable (no changed pairs)"),
        }
    }
}
