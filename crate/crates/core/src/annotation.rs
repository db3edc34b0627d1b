//! Annotation protocol: question streams with interleaved gold questions, the
//! gold-accuracy gate, response collection and a simulated annotator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{TupleDesign, TUPLE_SIZE};

pub const DEFAULT_PER_TUPLE: usize = 3;
pub const DEFAULT_ACCURACY_THRESHOLD: f64 = 0.70;
pub const DEFAULT_GRACE_GOLDS: u32 = 3;
pub const MAX_GOLD_FRACTION: f64 = 0.5;

pub const RESPONSE_HEADER: &str = "annotator_id\ttuple_index\tbest_id\tworst_id\tordinal";

#[derive(Error, Debug)]
pub enum AnnotationError {
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error(
        "annotator {annotator} was refused further annotation: gold accuracy {accuracy:.2} fell below {threshold:.2}"
    )]
    AnnotatorRejected {
        annotator: String,
        accuracy: f64,
        threshold: f64,
    },
    #[error("tuple {tuple_index} is not the question assigned to annotator {annotator}")]
    NotAssigned { annotator: String, tuple_index: usize },
    #[error("tuple index {0} out of range")]
    UnknownTuple(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no latent value for item {0}")]
    MissingLatent(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> AnnotationError {
    AnnotationError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A tuple with known acceptable answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldQuestion {
    pub tuple_index: usize,
    pub acceptable_best: BTreeSet<String>,
    pub acceptable_worst: BTreeSet<String>,
}

impl GoldQuestion {
    pub fn validate(&self, design: &TupleDesign) -> Result<(), AnnotationError> {
        let ids = design
            .tuple_ids(self.tuple_index)
            .ok_or(AnnotationError::UnknownTuple(self.tuple_index))?;
        if self.acceptable_best.is_empty() || self.acceptable_worst.is_empty() {
            return Err(AnnotationError::Config(format!(
                "gold question on tuple {} has an empty answer set",
                self.tuple_index
            )));
        }
        for id in self.acceptable_best.iter().chain(&self.acceptable_worst) {
            if !ids.contains(&id.as_str()) {
                return Err(AnnotationError::Config(format!(
                    "gold answer {id} is not in tuple {}",
                    self.tuple_index
                )));
            }
        }
        if !self.acceptable_best.is_disjoint(&self.acceptable_worst) {
            return Err(AnnotationError::Config(format!(
                "gold question on tuple {} shares ids between best and worst",
                self.tuple_index
            )));
        }
        Ok(())
    }

    pub fn is_correct(&self, best: &str, worst: &str) -> bool {
        self.acceptable_best.contains(best) && self.acceptable_worst.contains(worst)
    }

    /// Gold answer derived from known intensities: the unique extremes of the
    /// tuple under the simulation tie-break.
    pub fn from_latent(
        design: &TupleDesign,
        tuple_index: usize,
        latent: &HashMap<String, f64>,
    ) -> Result<Self, AnnotationError> {
        let ids = design
            .tuple_ids(tuple_index)
            .ok_or(AnnotationError::UnknownTuple(tuple_index))?;
        let (best, worst) = true_extremes(&ids, latent)?;
        Ok(Self {
            tuple_index,
            acceptable_best: BTreeSet::from([best.to_string()]),
            acceptable_worst: BTreeSet::from([worst.to_string()]),
        })
    }
}

/// Gold file: `tuple_index \t best_ids \t worst_ids`, ids comma separated.
pub fn parse_gold(content: &str, design: &TupleDesign) -> Result<Vec<GoldQuestion>, AnnotationError> {
    let mut gold = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| AnnotationError::Parse { line: idx + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, found {}", cols.len())));
        }
        let tuple_index = cols[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad tuple index: {e}")))?;
        let set = |s: &str| -> BTreeSet<String> {
            s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
        };
        let q = GoldQuestion {
            tuple_index,
            acceptable_best: set(cols[1]),
            acceptable_worst: set(cols[2]),
        };
        q.validate(design)?;
        gold.push(q);
    }
    Ok(gold)
}

pub fn gold_to_tsv(gold: &[GoldQuestion]) -> String {
    let mut out = String::new();
    for q in gold {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            q.tuple_index,
            join(&q.acceptable_best),
            join(&q.acceptable_worst)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub annotator_id: String,
    pub tuple_index: usize,
    pub best: String,
    pub worst: String,
    pub ordinal: u64,
}

impl Response {
    pub fn validate(&self, design: &TupleDesign) -> Result<(), AnnotationError> {
        if self.best == self.worst {
            return Err(AnnotationError::InvalidResponse(format!(
                "best and worst are both {}",
                self.best
            )));
        }
        let ids = design
            .tuple_ids(self.tuple_index)
            .ok_or(AnnotationError::UnknownTuple(self.tuple_index))?;
        for id in [&self.best, &self.worst] {
            if !ids.contains(&id.as_str()) {
                return Err(AnnotationError::InvalidResponse(format!(
                    "{id} is not in tuple {}",
                    self.tuple_index
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorStatus {
    Active,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorState {
    pub annotator_id: String,
    pub gold_seen: u32,
    pub gold_correct: u32,
    pub status: AnnotatorStatus,
}

impl AnnotatorState {
    pub fn new(annotator_id: impl Into<String>) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            gold_seen: 0,
            gold_correct: 0,
            status: AnnotatorStatus::Active,
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.gold_seen > 0).then(|| self.gold_correct as f64 / self.gold_seen as f64)
    }
}

/// Accepted ordinary judgments over a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub design: Arc<TupleDesign>,
    pub responses: Vec<Response>,
    pub per_tuple: usize,
}

impl ResponseSet {
    pub fn new(design: Arc<TupleDesign>, per_tuple: usize) -> Self {
        Self {
            design,
            responses: Vec::new(),
            per_tuple,
        }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn push(&mut self, response: Response) -> Result<(), AnnotationError> {
        response.validate(&self.design)?;
        self.responses.push(response);
        Ok(())
    }

    /// Responses grouped by tuple index.
    pub fn by_tuple(&self) -> Vec<Vec<&Response>> {
        let mut groups = vec![Vec::new(); self.design.n_tuples()];
        for r in &self.responses {
            groups[r.tuple_index].push(r);
        }
        groups
    }

    /// Every tuple has exactly `per_tuple` responses from distinct annotators.
    pub fn is_complete(&self) -> bool {
        self.by_tuple().iter().all(|group| {
            let annotators: BTreeSet<&str> = group.iter().map(|r| r.annotator_id.as_str()).collect();
            group.len() == self.per_tuple && annotators.len() == group.len()
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(RESPONSE_HEADER);
        out.push('\n');
        for r in &self.responses {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.annotator_id, r.tuple_index, r.best, r.worst, r.ordinal
            ));
        }
        out
    }

    pub fn from_tsv(
        content: &str,
        design: Arc<TupleDesign>,
        per_tuple: usize,
    ) -> Result<Self, AnnotationError> {
        let mut set = Self::new(design, per_tuple);
        for (idx, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line == RESPONSE_HEADER {
                continue;
            }
            let parse_err = |message: String| AnnotationError::Parse { line: idx + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(parse_err(format!("expected 5 columns, found {}", cols.len())));
            }
            let tuple_index = cols[1]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad tuple index '{}': {e}", cols[1])))?;
            let ordinal = cols[4]
                .parse::<u64>()
                .map_err(|e| parse_err(format!("bad ordinal '{}': {e}", cols[4])))?;
            let response = Response {
                annotator_id: cols[0].to_string(),
                tuple_index,
                best: cols[2].to_string(),
                worst: cols[3].to_string(),
                ordinal,
            };
            set.push(response).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(set)
    }

    pub fn load(
        path: impl AsRef<Path>,
        design: Arc<TupleDesign>,
        per_tuple: usize,
    ) -> Result<Self, AnnotationError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_tsv(&content, design, per_tuple)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AnnotationError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| io_err(path, e))
    }
}

/// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub(crate) fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub threshold: f64,
    /// Gold answers required before the gate can reject.
    pub grace: u32,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_ACCURACY_THRESHOLD,
            grace: DEFAULT_GRACE_GOLDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub tuple_index: usize,
    pub item_ids: [String; TUPLE_SIZE],
    /// Never shown to annotators.
    pub is_gold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SubmitOutcome {
    Accepted,
    GoldFeedback { correct: bool },
    RejectedAnnotator { accuracy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Assignment {
    tuple_index: usize,
    gold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stream {
    state: AnnotatorState,
    answered: BTreeSet<usize>,
    current: Option<Assignment>,
    since_gold: usize,
    gold_gap: usize,
    golds_served: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub tuples: usize,
    pub complete_tuples: usize,
    pub ordinary_responses: usize,
    pub expected_responses: usize,
    pub active_annotators: usize,
    pub rejected_annotators: usize,
}

/// A stateful annotation session. Callers must serialize mutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    design: Arc<TupleDesign>,
    gold: Vec<GoldQuestion>,
    per_tuple: usize,
    seed: u64,
    gate: GateConfig,
    /// Ordinary questions between two golds before jitter; `None` without gold.
    gold_stride: Option<usize>,
    streams: BTreeMap<String, Stream>,
    responses: Vec<Response>,
    counts: Vec<usize>,
    reserved: Vec<usize>,
    next_ordinal: u64,
}

pub fn create_session(
    design: Arc<TupleDesign>,
    gold: Vec<GoldQuestion>,
    per_tuple: usize,
) -> Result<Session, AnnotationError> {
    Session::new(design, gold, per_tuple, 0, GateConfig::default())
}

impl Session {
    pub fn new(
        design: Arc<TupleDesign>,
        gold: Vec<GoldQuestion>,
        per_tuple: usize,
        seed: u64,
        gate: GateConfig,
    ) -> Result<Self, AnnotationError> {
        if per_tuple == 0 {
            return Err(AnnotationError::Config("per_tuple must be at least 1".into()));
        }
        let n_tuples = design.n_tuples();
        if n_tuples == 0 {
            return Err(AnnotationError::Config("design has no tuples".into()));
        }
        for q in &gold {
            q.validate(&design)?;
        }
        let fraction = gold.len() as f64 / n_tuples as f64;
        if fraction > MAX_GOLD_FRACTION {
            return Err(AnnotationError::Config(format!(
                "gold fraction {fraction:.2} exceeds {MAX_GOLD_FRACTION}"
            )));
        }
        let gold_stride = (!gold.is_empty())
            .then(|| ((n_tuples as f64 / gold.len() as f64) - 1.0).round().max(1.0) as usize);
        Ok(Self {
            gold,
            per_tuple,
            seed,
            gate,
            gold_stride,
            streams: BTreeMap::new(),
            responses: Vec::new(),
            counts: vec![0; n_tuples],
            reserved: vec![0; n_tuples],
            next_ordinal: 0,
            design,
        })
    }

    pub fn design(&self) -> &Arc<TupleDesign> {
        &self.design
    }

    pub fn gold(&self) -> &[GoldQuestion] {
        &self.gold
    }

    pub fn per_tuple(&self) -> usize {
        self.per_tuple
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gate(&self) -> GateConfig {
        self.gate
    }

    pub fn gold_stride(&self) -> Option<usize> {
        self.gold_stride
    }

    pub fn expected_responses(&self) -> usize {
        self.per_tuple * self.design.n_tuples()
    }

    pub fn annotator(&self, id: &str) -> Option<&AnnotatorState> {
        self.streams.get(id).map(|s| &s.state)
    }

    pub fn annotators(&self) -> impl Iterator<Item = &AnnotatorState> {
        self.streams.values().map(|s| &s.state)
    }

    /// Whether `annotator` holds an unanswered question.
    pub fn has_assignment(&self, annotator: &str) -> bool {
        self.streams.get(annotator).is_some_and(|s| s.current.is_some())
    }

    pub fn is_complete(&self) -> bool {
        self.counts.iter().all(|&c| c >= self.per_tuple)
    }

    pub fn progress(&self) -> Progress {
        let rejected = self
            .streams
            .values()
            .filter(|s| s.state.status == AnnotatorStatus::Rejected)
            .count();
        Progress {
            tuples: self.design.n_tuples(),
            complete_tuples: self.counts.iter().filter(|&&c| c >= self.per_tuple).count(),
            ordinary_responses: self.responses.len(),
            expected_responses: self.expected_responses(),
            active_annotators: self.streams.len() - rejected,
            rejected_annotators: rejected,
        }
    }

    pub fn response_set(&self) -> ResponseSet {
        ResponseSet {
            design: Arc::clone(&self.design),
            responses: self.responses.clone(),
            per_tuple: self.per_tuple,
        }
    }

    fn stream_rng(&self, annotator: &str, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ stable_hash(annotator));
        rng.set_stream(salt);
        rng
    }

    fn gap(&self, annotator: &str, golds_served: usize, first: bool) -> usize {
        let Some(stride) = self.gold_stride else {
            return usize::MAX;
        };
        let mut rng = self.stream_rng(annotator, 1 + golds_served as u64);
        if first {
            return rng.gen_range(0..=stride);
        }
        let jitter = (stride / 4) as i64;
        (stride as i64 + rng.gen_range(-jitter..=jitter)).max(1) as usize
    }

    fn rejection_error(&self, state: &AnnotatorState) -> AnnotationError {
        AnnotationError::AnnotatorRejected {
            annotator: state.annotator_id.clone(),
            accuracy: state.accuracy().unwrap_or(0.0),
            threshold: self.gate.threshold,
        }
    }

    fn question(&self, a: Assignment) -> Question {
        let ids = self.design.tuple_ids(a.tuple_index).expect("assigned tuple exists");
        Question {
            tuple_index: a.tuple_index,
            item_ids: ids.map(String::from),
            is_gold: a.gold.is_some(),
        }
    }

    /// The annotator's current question, assigning a new one if needed.
    /// `Ok(None)` means nothing is left for this annotator.
    pub fn next_question(&mut self, annotator: &str) -> Result<Option<Question>, AnnotationError> {
        if !self.streams.contains_key(annotator) {
            let gap = self.gap(annotator, 0, true);
            self.streams.insert(
                annotator.to_string(),
                Stream {
                    state: AnnotatorState::new(annotator),
                    answered: BTreeSet::new(),
                    current: None,
                    since_gold: 0,
                    gold_gap: gap,
                    golds_served: 0,
                },
            );
        }
        let stream = &self.streams[annotator];
        if stream.state.status == AnnotatorStatus::Rejected {
            return Err(self.rejection_error(&stream.state));
        }
        if let Some(current) = stream.current {
            return Ok(Some(self.question(current)));
        }
        let Some(ordinary) = self.pick_ordinary(annotator) else {
            return Ok(None);
        };
        let stream = &self.streams[annotator];
        let assignment = if !self.gold.is_empty() && stream.since_gold >= stream.gold_gap {
            let served = stream.golds_served;
            let mut order: Vec<usize> = (0..self.gold.len()).collect();
            order.shuffle(&mut self.stream_rng(annotator, 0x901d + (served / self.gold.len()) as u64));
            let gold_idx = order[served % self.gold.len()];
            let next_gap = self.gap(annotator, served + 1, false);
            let stream = self.streams.get_mut(annotator).expect("stream exists");
            stream.golds_served += 1;
            stream.since_gold = 0;
            stream.gold_gap = next_gap;
            Assignment {
                tuple_index: self.gold[gold_idx].tuple_index,
                gold: Some(gold_idx),
            }
        } else {
            self.reserved[ordinary] += 1;
            Assignment {
                tuple_index: ordinary,
                gold: None,
            }
        };
        self.streams.get_mut(annotator).expect("stream exists").current = Some(assignment);
        Ok(Some(self.question(assignment)))
    }

    /// First pending tuple in the annotator's seeded permutation.
    fn pick_ordinary(&self, annotator: &str) -> Option<usize> {
        let stream = &self.streams[annotator];
        let mut order: Vec<usize> = (0..self.design.n_tuples()).collect();
        order.shuffle(&mut self.stream_rng(annotator, 0));
        order.into_iter().find(|&t| {
            self.counts[t] + self.reserved[t] < self.per_tuple && !stream.answered.contains(&t)
        })
    }

    /// Gives up the annotator's outstanding question, if any.
    pub fn release(&mut self, annotator: &str) {
        if let Some(stream) = self.streams.get_mut(annotator) {
            if let Some(Assignment { tuple_index, gold: None }) = stream.current.take() {
                self.reserved[tuple_index] -= 1;
            }
        }
    }

    pub fn submit(
        &mut self,
        annotator: &str,
        tuple_index: usize,
        best: &str,
        worst: &str,
    ) -> Result<SubmitOutcome, AnnotationError> {
        let stream = self
            .streams
            .get(annotator)
            .ok_or_else(|| AnnotationError::UnknownAnnotator(annotator.to_string()))?;
        if stream.state.status == AnnotatorStatus::Rejected {
            return Err(self.rejection_error(&stream.state));
        }
        let response = Response {
            annotator_id: annotator.to_string(),
            tuple_index,
            best: best.to_string(),
            worst: worst.to_string(),
            ordinal: self.next_ordinal,
        };
        response.validate(&self.design)?;
        let assignment = match stream.current {
            Some(a) if a.tuple_index == tuple_index => a,
            _ => {
                return Err(AnnotationError::NotAssigned {
                    annotator: annotator.to_string(),
                    tuple_index,
                })
            }
        };
        let threshold = self.gate.threshold;
        let grace = self.gate.grace;
        let stream = self.streams.get_mut(annotator).expect("stream exists");
        stream.current = None;
        match assignment.gold {
            Some(gold_idx) => {
                let correct = self.gold[gold_idx].is_correct(best, worst);
                stream.state.gold_seen += 1;
                if correct {
                    stream.state.gold_correct += 1;
                }
                let accuracy = stream.state.accuracy().unwrap_or(1.0);
                if stream.state.gold_seen >= grace && accuracy < threshold {
                    stream.state.status = AnnotatorStatus::Rejected;
                    self.expunge(annotator);
                    return Ok(SubmitOutcome::RejectedAnnotator { accuracy });
                }
                Ok(SubmitOutcome::GoldFeedback { correct })
            }
            None => {
                stream.answered.insert(tuple_index);
                stream.since_gold += 1;
                self.reserved[tuple_index] -= 1;
                self.counts[tuple_index] += 1;
                self.next_ordinal += 1;
                self.responses.push(response);
                Ok(SubmitOutcome::Accepted)
            }
        }
    }

    /// Drops every ordinary response of `annotator`; their tuples become
    /// pending again.
    fn expunge(&mut self, annotator: &str) {
        self.responses.retain(|r| r.annotator_id != annotator);
        self.counts.iter_mut().for_each(|c| *c = 0);
        for r in &self.responses {
            self.counts[r.tuple_index] += 1;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl fmt::Display for Progress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} responses, {}/{} tuples complete, {} active / {} rejected annotators",
            self.ordinary_responses,
            self.expected_responses,
            self.complete_tuples,
            self.tuples,
            self.active_annotators,
            self.rejected_annotators
        )
    }
}

/// True (best, worst) of a tuple: highest latent wins best with the lowest id
/// breaking ties, lowest latent wins worst with the highest id breaking ties.
pub fn true_extremes<'a>(
    ids: &[&'a str],
    latent: &HashMap<String, f64>,
) -> Result<(&'a str, &'a str), AnnotationError> {
    let value = |id: &str| {
        latent
            .get(id)
            .copied()
            .ok_or_else(|| AnnotationError::MissingLatent(id.to_string()))
    };
    let mut best = ids[0];
    let mut worst = ids[0];
    let (mut best_v, mut worst_v) = (value(best)?, value(worst)?);
    for &id in &ids[1..] {
        let v = value(id)?;
        if v > best_v || (v == best_v && id < best) {
            best = id;
            best_v = v;
        }
        if v < worst_v || (v == worst_v && id > worst) {
            worst = id;
            worst_v = v;
        }
    }
    Ok((best, worst))
}

/// An annotator that answers correctly with probability `accuracy` and
/// otherwise picks a uniformly random ordered (best, worst) pair.
#[derive(Debug, Clone)]
pub struct SimulatedAnnotator<'a> {
    latent: &'a HashMap<String, f64>,
    accuracy: f64,
    rng: ChaCha8Rng,
}

impl<'a> SimulatedAnnotator<'a> {
    pub fn new(latent: &'a HashMap<String, f64>, accuracy: f64, seed: u64) -> Self {
        Self {
            latent,
            accuracy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn answer<'b>(&mut self, ids: &[&'b str]) -> Result<(&'b str, &'b str), AnnotationError> {
        let truth = true_extremes(ids, self.latent)?;
        if self.rng.gen_bool(self.accuracy.clamp(0.0, 1.0)) {
            return Ok(truth);
        }
        let b = self.rng.gen_range(0..ids.len());
        let mut w = self.rng.gen_range(0..ids.len() - 1);
        if w >= b {
            w += 1;
        }
        Ok((ids[b], ids[w]))
    }
}

/// Generates `per_tuple` judgments per tuple from simulated annotators
/// `sim-0 .. sim-{per_tuple-1}`; deterministic under `seed`.
pub fn simulate_annotators(
    design: Arc<TupleDesign>,
    latent: &HashMap<String, f64>,
    accuracy_p: f64,
    per_tuple: usize,
    seed: u64,
) -> Result<ResponseSet, AnnotationError> {
    if !(0.0..=1.0).contains(&accuracy_p) {
        return Err(AnnotationError::Config(format!(
            "accuracy {accuracy_p} outside [0, 1]"
        )));
    }
    if let Some(missing) = design.items.iter().find(|id| !latent.contains_key(*id)) {
        return Err(AnnotationError::MissingLatent(missing.clone()));
    }
    let mut annotator = SimulatedAnnotator::new(latent, accuracy_p, seed);
    let mut set = ResponseSet::new(Arc::clone(&design), per_tuple);
    let mut ordinal = 0;
    for t in 0..design.n_tuples() {
        let ids = design.tuple_ids(t).expect("tuple in range");
        for a in 0..per_tuple {
            let (best, worst) = annotator.answer(&ids)?;
            set.responses.push(Response {
                annotator_id: format!("sim-{a}"),
                tuple_index: t,
                best: best.to_string(),
                worst: worst.to_string(),
                ordinal,
            });
            ordinal += 1;
        }
    }
    Ok(set)
}
