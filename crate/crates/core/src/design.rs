//! Random maximum-diversity 4-tuple designs.
//!
//! A design over `N` items has `2N` tuples, every item appears in exactly
//! eight of them and no unordered pair of items shares more than one tuple.
//! Construction: concatenate eight shuffled copies of the item list, cut the
//! sequence into 4-tuples, then remove duplicate items and repeated pairs by
//! a focused Metropolis search over slot swaps between tuples. Swaps keep
//! every item's appearance count at eight. A stuck search restarts from a
//! fresh shuffle. At `N = 25` every pair must be covered exactly once and a
//! randomly relabeled algebraic construction is used instead.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TUPLE_SIZE: usize = 4;
pub const APPEARANCES: usize = 8;
/// Each item needs 8 x 3 distinct co-occurring items.
pub const MIN_ITEMS: usize = APPEARANCES * (TUPLE_SIZE - 1) + 1;
pub const DEFAULT_RESTART_BUDGET: usize = 1000;

#[derive(Error, Debug)]
pub enum DesignError {
    #[error(
        "{n} items cannot form a design: every item must co-occur with {} distinct others, so at least {MIN_ITEMS} items are needed",
        APPEARANCES * (TUPLE_SIZE - 1)
    )]
    Infeasible { n: usize },
    #[error("duplicate item id {0}")]
    DuplicateId(String),
    #[error("no valid design found for seed {seed} after {attempts} attempts")]
    Exhausted { seed: u64, attempts: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleDesign {
    pub items: Vec<String>,
    /// Indices into `items`.
    pub tuples: Vec<[usize; TUPLE_SIZE]>,
    pub seed: u64,
}

impl TupleDesign {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_tuples(&self) -> usize {
        self.tuples.len()
    }

    pub fn tuple_ids(&self, index: usize) -> Option<[&str; TUPLE_SIZE]> {
        self.tuples
            .get(index)
            .map(|t| [0, 1, 2, 3].map(|k| self.items[t[k]].as_str()))
    }

    pub fn tuple_contains(&self, index: usize, id: &str) -> bool {
        self.tuple_ids(index).is_some_and(|ids| ids.contains(&id))
    }

    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.items.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// One tuple per line, tab separated, after a `# n=<N> seed=<seed>` header.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# n={} seed={}\n", self.items.len(), self.seed);
        for t in &self.tuples {
            let ids: Vec<&str> = t.iter().map(|&i| self.items[i].as_str()).collect();
            out.push_str(&ids.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Parses the tuple file. Items are listed in order of first appearance.
    pub fn from_tsv(content: &str) -> Result<Self, DesignError> {
        let mut lines = content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DesignError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let mut n = None;
        let mut seed = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = field.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("seed=") {
                seed = v.parse::<u64>().ok();
            }
        }
        let (Some(n), Some(seed)) = (n, seed) else {
            return Err(DesignError::Parse {
                line: 1,
                message: format!("bad header '{header}', expected '# n=<N> seed=<seed>'"),
            });
        };
        let mut items: Vec<String> = Vec::with_capacity(n);
        let mut index: HashMap<String, usize> = HashMap::with_capacity(n);
        let mut tuples = Vec::with_capacity(2 * n);
        for (idx, line) in lines {
            let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if cols.len() != TUPLE_SIZE {
                return Err(DesignError::Parse {
                    line: idx + 1,
                    message: format!("expected {TUPLE_SIZE} ids, found {}", cols.len()),
                });
            }
            let mut tuple = [0usize; TUPLE_SIZE];
            for (slot, id) in cols.iter().enumerate() {
                let next = items.len();
                let i = *index.entry(id.to_string()).or_insert_with(|| {
                    items.push(id.to_string());
                    next
                });
                tuple[slot] = i;
            }
            tuples.push(tuple);
        }
        if items.len() != n {
            return Err(DesignError::Parse {
                line: 1,
                message: format!("header declares {n} items but tuples mention {}", items.len()),
            });
        }
        Ok(Self { items, tuples, seed })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|source| DesignError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv(&content)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DesignError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|source| DesignError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DesignConfig {
    pub restart_budget: usize,
    /// Repair steps allowed per attempt; `None` scales with `N`.
    pub max_repair_steps: Option<usize>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            restart_budget: DEFAULT_RESTART_BUDGET,
            max_repair_steps: None,
        }
    }
}

pub fn generate_design(item_ids: &[String], seed: u64) -> Result<TupleDesign, DesignError> {
    generate_design_with(item_ids, seed, DesignConfig::default())
}

pub fn generate_design_with(
    item_ids: &[String],
    seed: u64,
    config: DesignConfig,
) -> Result<TupleDesign, DesignError> {
    let n = item_ids.len();
    if n < MIN_ITEMS {
        return Err(DesignError::Infeasible { n });
    }
    let mut seen = HashSet::with_capacity(n);
    for id in item_ids {
        if !seen.insert(id.as_str()) {
            return Err(DesignError::DuplicateId(id.clone()));
        }
    }
    if n == MIN_ITEMS {
        // Every pair must be covered exactly once; local search does not find
        // these reliably, so use an algebraic construction with random labels.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(TupleDesign {
            items: item_ids.to_vec(),
            tuples: relabeled_steiner_25(&mut rng),
            seed,
        });
    }
    let max_steps = config.max_repair_steps.unwrap_or(4_000_000 + 20_000 * n);
    for attempt in 0..config.restart_budget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut search = RepairSearch::new(n, &mut rng);
        if search.anneal(&mut rng, max_steps) {
            return Ok(TupleDesign {
                items: item_ids.to_vec(),
                tuples: search
                    .tuples
                    .into_iter()
                    .map(|t| t.map(|i| i as usize))
                    .collect(),
                seed,
            });
        }
    }
    Err(DesignError::Exhausted {
        seed,
        attempts: config.restart_budget,
    })
}

/// Base blocks of a (25, 4, 1) difference family over Z5 x Z5. Their 25
/// translates each form the 50 blocks of a Steiner system S(2, 4, 25).
const STEINER_25_BASE: [[(u8, u8); TUPLE_SIZE]; 2] = [
    [(0, 0), (0, 1), (1, 0), (2, 2)],
    [(0, 0), (0, 2), (1, 3), (3, 2)],
];

fn relabeled_steiner_25(rng: &mut ChaCha8Rng) -> Vec<[usize; TUPLE_SIZE]> {
    let mut label: Vec<usize> = (0..MIN_ITEMS).collect();
    label.shuffle(rng);
    let mut tuples = Vec::with_capacity(2 * MIN_ITEMS);
    for base in &STEINER_25_BASE {
        for dx in 0..5u8 {
            for dy in 0..5u8 {
                let mut tuple = base.map(|(x, y)| {
                    let point = ((x + dx) % 5) as usize * 5 + ((y + dy) % 5) as usize;
                    label[point]
                });
                tuple.shuffle(rng);
                tuples.push(tuple);
            }
        }
    }
    tuples.shuffle(rng);
    tuples
}

fn pair_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

// A repeated item inside a tuple is recorded as a self-pair; each self-pair
// occurrence is one unit of cost, each extra occurrence of a real pair too.
fn penalty(self_pair: bool, count: u32) -> i64 {
    if self_pair {
        count as i64
    } else {
        count.saturating_sub(1) as i64
    }
}

const DENSE_LIMIT: usize = 4096;

enum PairCounts {
    Dense { n: usize, counts: Vec<u16> },
    Sparse(HashMap<u64, u32>),
}

impl PairCounts {
    fn new(n: usize) -> Self {
        if n <= DENSE_LIMIT {
            PairCounts::Dense { n, counts: vec![0; n * n] }
        } else {
            PairCounts::Sparse(HashMap::with_capacity(n * 24))
        }
    }

    fn get(&self, a: u32, b: u32) -> u32 {
        match self {
            PairCounts::Dense { n, counts } => {
                let (lo, hi) = (a.min(b) as usize, a.max(b) as usize);
                counts[lo * n + hi] as u32
            }
            PairCounts::Sparse(map) => map.get(&pair_key(a, b)).copied().unwrap_or(0),
        }
    }

    /// Adds `step` (+1 or -1) and returns the resulting cost change.
    fn bump(&mut self, a: u32, b: u32, step: i32) -> i64 {
        let self_pair = a == b;
        let before = match self {
            PairCounts::Dense { n, counts } => {
                let (lo, hi) = (a.min(b) as usize, a.max(b) as usize);
                let c = &mut counts[lo * *n + hi];
                let before = *c as u32;
                *c = (before as i32 + step) as u16;
                before
            }
            PairCounts::Sparse(map) => {
                let key = pair_key(a, b);
                let c = map.entry(key).or_insert(0);
                let before = *c;
                *c = (before as i32 + step) as u32;
                if *c == 0 {
                    map.remove(&key);
                }
                before
            }
        };
        let after = (before as i32 + step) as u32;
        penalty(self_pair, after) - penalty(self_pair, before)
    }
}

struct RepairSearch {
    tuples: Vec<[u32; TUPLE_SIZE]>,
    pairs: PairCounts,
    cost: i64,
    queued: Vec<bool>,
    queue: Vec<usize>,
}

/// Metropolis temperature; tuned on N in 28..=2000.
const TEMPERATURE: f64 = 0.1;
/// Share of proposals whose first slot is drawn from conflicted tuples.
const FOCUS: f64 = 0.5;

impl RepairSearch {
    fn new(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut slots = Vec::with_capacity(APPEARANCES * n);
        let mut round: Vec<u32> = (0..n as u32).collect();
        for _ in 0..APPEARANCES {
            round.shuffle(rng);
            slots.extend_from_slice(&round);
        }
        let tuples: Vec<[u32; TUPLE_SIZE]> = slots
            .chunks_exact(TUPLE_SIZE)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect();
        let mut search = Self {
            queued: vec![false; tuples.len()],
            queue: Vec::new(),
            pairs: PairCounts::new(n),
            cost: 0,
            tuples,
        };
        for t in 0..search.tuples.len() {
            let tuple = search.tuples[t];
            for a in 0..TUPLE_SIZE {
                for b in a + 1..TUPLE_SIZE {
                    search.cost += search.pairs.bump(tuple[a], tuple[b], 1);
                }
            }
        }
        for t in 0..search.tuples.len() {
            search.enqueue_if_conflicted(t);
        }
        search
    }

    fn slot_conflicted(&self, t: usize, slot: usize) -> bool {
        let tuple = self.tuples[t];
        let x = tuple[slot];
        (0..TUPLE_SIZE)
            .filter(|&k| k != slot)
            .any(|k| tuple[k] == x || self.pairs.get(x, tuple[k]) > 1)
    }

    fn tuple_conflicted(&self, t: usize) -> bool {
        (0..TUPLE_SIZE).any(|s| self.slot_conflicted(t, s))
    }

    fn enqueue_if_conflicted(&mut self, t: usize) {
        if !self.queued[t] && self.tuple_conflicted(t) {
            self.queued[t] = true;
            self.queue.push(t);
        }
    }

    fn set_slot(&mut self, t: usize, slot: usize, item: u32) -> i64 {
        let tuple = self.tuples[t];
        let old = tuple[slot];
        let mut delta = 0;
        for k in (0..TUPLE_SIZE).filter(|&k| k != slot) {
            delta += self.pairs.bump(old, tuple[k], -1);
            delta += self.pairs.bump(item, tuple[k], 1);
        }
        self.tuples[t][slot] = item;
        delta
    }

    fn swap(&mut self, (t, i): (usize, usize), (u, j): (usize, usize)) -> i64 {
        let x = self.tuples[t][i];
        let y = self.tuples[u][j];
        let delta = self.set_slot(t, i, y) + self.set_slot(u, j, x);
        self.cost += delta;
        delta
    }

    /// Metropolis search over slot swaps. Part of the proposals start from a
    /// conflicted slot; the partner slot is always uniform.
    fn anneal(&mut self, rng: &mut ChaCha8Rng, max_steps: usize) -> bool {
        let n_tuples = self.tuples.len();
        let accept_prob: Vec<f64> = (0..8).map(|d| (-(d as f64) / TEMPERATURE).exp()).collect();
        let mut steps = 0;
        while self.cost > 0 {
            if steps >= max_steps {
                return false;
            }
            if self.queue.is_empty() {
                for k in 0..n_tuples {
                    self.enqueue_if_conflicted(k);
                }
            }
            steps += 1;
            let (t, i) = if rng.gen_bool(FOCUS) {
                let qi = rng.gen_range(0..self.queue.len());
                let t = self.queue[qi];
                if !self.tuple_conflicted(t) {
                    self.queue.swap_remove(qi);
                    self.queued[t] = false;
                    continue;
                }
                let i = loop {
                    let s = rng.gen_range(0..TUPLE_SIZE);
                    if self.slot_conflicted(t, s) {
                        break s;
                    }
                };
                (t, i)
            } else {
                (rng.gen_range(0..n_tuples), rng.gen_range(0..TUPLE_SIZE))
            };
            let u = rng.gen_range(0..n_tuples);
            let j = rng.gen_range(0..TUPLE_SIZE);
            if u == t || self.tuples[u][j] == self.tuples[t][i] {
                continue;
            }
            let delta = self.swap((t, i), (u, j));
            let accept = delta <= 0
                || accept_prob
                    .get(delta as usize)
                    .is_some_and(|&p| rng.gen::<f64>() < p);
            if accept {
                self.enqueue_if_conflicted(t);
                self.enqueue_if_conflicted(u);
            } else {
                self.swap((t, i), (u, j));
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicatePair {
    pub a: String,
    pub b: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignReport {
    pub tuple_count_ok: bool,
    pub distinct_within_tuples_ok: bool,
    pub appearances_ok: bool,
    pub pairs_ok: bool,
    /// Item id to number of tuples containing it.
    pub appearance_histogram: BTreeMap<String, usize>,
    /// Items appearing a number of times other than eight.
    pub bad_appearances: Vec<(String, usize)>,
    pub tuples_with_repeats: Vec<usize>,
    pub duplicated_pairs: Vec<DuplicatePair>,
    pub covered_pairs: usize,
}

impl DesignReport {
    pub fn passed(&self) -> bool {
        self.tuple_count_ok && self.distinct_within_tuples_ok && self.appearances_ok && self.pairs_ok
    }
}

impl fmt::Display for DesignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "tuple count (2N)\t{}", mark(self.tuple_count_ok))?;
        writeln!(f, "distinct ids per tuple\t{}", mark(self.distinct_within_tuples_ok))?;
        writeln!(f, "eight appearances\t{}", mark(self.appearances_ok))?;
        writeln!(f, "no repeated pair\t{}", mark(self.pairs_ok))?;
        writeln!(f, "covered pairs\t{}", self.covered_pairs)?;
        for (id, count) in &self.bad_appearances {
            writeln!(f, "appearances\t{id}\t{count}")?;
        }
        for p in &self.duplicated_pairs {
            writeln!(f, "repeated pair\t{}\t{}\t{}", p.a, p.b, p.count)?;
        }
        Ok(())
    }
}

pub fn verify_design(design: &TupleDesign) -> DesignReport {
    let n = design.items.len();
    let mut hist: BTreeMap<String, usize> = design.items.iter().map(|id| (id.clone(), 0)).collect();
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut tuples_with_repeats = Vec::new();
    for (ti, t) in design.tuples.iter().enumerate() {
        let distinct: HashSet<usize> = t.iter().copied().collect();
        if distinct.len() != TUPLE_SIZE {
            tuples_with_repeats.push(ti);
        }
        for &i in &distinct {
            *hist.entry(design.items[i].clone()).or_default() += 1;
        }
        for a in 0..TUPLE_SIZE {
            for b in a + 1..TUPLE_SIZE {
                if t[a] != t[b] {
                    *pairs.entry((t[a].min(t[b]), t[a].max(t[b]))).or_default() += 1;
                }
            }
        }
    }
    let bad_appearances: Vec<(String, usize)> = hist
        .iter()
        .filter(|(_, &c)| c != APPEARANCES)
        .map(|(id, &c)| (id.clone(), c))
        .collect();
    let duplicated_pairs: Vec<DuplicatePair> = pairs
        .iter()
        .filter(|(_, &c)| c > 1)
        .map(|(&(a, b), &count)| DuplicatePair {
            a: design.items[a].clone(),
            b: design.items[b].clone(),
            count,
        })
        .collect();
    DesignReport {
        tuple_count_ok: design.tuples.len() == 2 * n,
        distinct_within_tuples_ok: tuples_with_repeats.is_empty(),
        appearances_ok: bad_appearances.is_empty(),
        pairs_ok: duplicated_pairs.is_empty(),
        appearance_histogram: hist,
        bad_appearances,
        tuples_with_repeats,
        duplicated_pairs,
        covered_pairs: pairs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i:04}")).collect()
    }

    #[test]
    fn n24_is_infeasible() {
        let err = generate_design(&ids(24), 1).unwrap_err();
        assert!(matches!(err, DesignError::Infeasible { n: 24 }));
        assert!(err.to_string().contains("24 distinct others"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut items = ids(30);
        items[3] = items[4].clone();
        assert!(matches!(generate_design(&items, 0), Err(DesignError::DuplicateId(_))));
    }

    #[test]
    fn n100_design_is_valid() {
        let d = generate_design(&ids(100), 3).unwrap();
        assert_eq!(d.n_tuples(), 200);
        let report = verify_design(&d);
        assert!(report.passed(), "{report}");
        assert_eq!(report.covered_pairs, 12 * 100);
    }

    #[test]
    fn n25_covers_every_pair_once() {
        let d = generate_design(&ids(25), 0).unwrap();
        let report = verify_design(&d);
        assert!(report.passed(), "{report}");
        assert_eq!(report.covered_pairs, 300);
    }

    #[test]
    fn n_not_divisible_by_four() {
        for n in [29, 30, 41] {
            let d = generate_design(&ids(n), 11).unwrap();
            assert!(verify_design(&d).passed());
        }
    }

    #[test]
    fn duplicated_tuple_lists_six_pairs() {
        let mut d = generate_design(&ids(40), 5).unwrap();
        d.tuples[1] = d.tuples[0];
        let report = verify_design(&d);
        assert!(!report.pairs_ok);
        assert_eq!(report.duplicated_pairs.len(), 6);
        assert!(report.duplicated_pairs.iter().all(|p| p.count == 2));
    }

    #[test]
    fn moved_occurrence_flags_both_items() {
        let mut d = generate_design(&ids(40), 5).unwrap();
        let (a, b) = (d.tuples[0][0], d.tuples[0][1]);
        // find a tuple without `a` and put `a` in place of one of its items
        let (ti, slot) = d
            .tuples
            .iter()
            .enumerate()
            .find_map(|(ti, t)| (!t.contains(&a) && !t.contains(&b)).then_some((ti, 0)))
            .unwrap();
        let victim = d.tuples[ti][slot];
        d.tuples[ti][slot] = a;
        let report = verify_design(&d);
        assert!(!report.appearances_ok);
        let names: Vec<&str> = report.bad_appearances.iter().map(|(id, _)| id.as_str()).collect();
        assert!(names.contains(&d.items[a].as_str()));
        assert!(names.contains(&d.items[victim].as_str()));
        assert_eq!(report.appearance_histogram[&d.items[a]], 9);
        assert_eq!(report.appearance_histogram[&d.items[victim]], 7);
    }

    #[test]
    fn tsv_round_trip() {
        let d = generate_design(&ids(30), 9).unwrap();
        let text = d.to_tsv();
        assert_eq!(text.lines().count(), 61);
        let back = TupleDesign::from_tsv(&text).unwrap();
        assert_eq!(back.to_tsv(), text);
        assert_eq!(back.seed, 9);
    }

    #[test]
    fn tiny_restart_budget_exhausts() {
        let cfg = DesignConfig {
            restart_budget: 2,
            max_repair_steps: Some(0),
        };
        match generate_design_with(&ids(40), 8, cfg) {
            Err(DesignError::Exhausted { seed: 8, attempts: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
