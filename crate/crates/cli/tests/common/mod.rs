#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use bwskit::annotation::{GateConfig, GoldQuestion, Response, ResponseSet, SimulatedAnnotator};
use bwskit::corpus::Emotion;
use bwskit::design::{generate_design, TupleDesign};
use bwskit_cli::service::{router, AppState, SessionTemplate};
use bwskit_cli::store::SessionStore;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn item_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i:02}")).collect()
}

pub fn latent(design: &TupleDesign) -> HashMap<String, f64> {
    design
        .items
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as f64 / design.items.len() as f64))
        .collect()
}

pub fn template(n: usize, n_gold: usize) -> SessionTemplate {
    let design = Arc::new(generate_design(&item_ids(n), 3).unwrap());
    let lat = latent(&design);
    let gold = (0..n_gold)
        .map(|k| GoldQuestion::from_latent(&design, k * 7 % design.n_tuples(), &lat).unwrap())
        .collect();
    let texts: BTreeMap<String, String> = design.items.iter().map(|id| (id.clone(), format!("speaker text {id}"))).collect();
    SessionTemplate {
        design,
        gold,
        texts,
        emotion: Emotion::Fear,
        gate: GateConfig::default(),
    }
}

pub fn app(store_dir: &Path, template: &SessionTemplate) -> Router {
    router(AppState {
        store: Arc::new(SessionStore::open(store_dir).unwrap()),
        template: Arc::new(template.clone()),
    })
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body.map(|b| b.to_string())).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

pub async fn create(app: &Router, per_tuple: usize) -> String {
    let (status, body) = call_json(app, "POST", "/sessions", Some(json!({"protocol_version": 1, "per_tuple": per_tuple}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

/// Simulated annotators driving a session over HTTP, recording every
/// accepted ordinary response in submission order.
pub struct Client {
    pub names: Vec<String>,
    pub annotators: Vec<SimulatedAnnotator<'static>>,
    pub done: Vec<bool>,
    pub rejected: Vec<String>,
    pub stream: Vec<Response>,
    turn: usize,
}

impl Client {
    pub fn new(latent: &'static HashMap<String, f64>, accuracies: &[f64], seed: u64) -> Self {
        Self {
            names: (0..accuracies.len()).map(|a| format!("ann-{a}")).collect(),
            annotators: accuracies
                .iter()
                .enumerate()
                .map(|(a, &p)| SimulatedAnnotator::new(latent, p, seed * 1000 + a as u64))
                .collect(),
            done: vec![false; accuracies.len()],
            rejected: Vec::new(),
            stream: Vec::new(),
            turn: 0,
        }
    }

    pub fn finished(&self) -> bool {
        self.done.iter().all(|d| *d)
    }

    /// One fetch + submit by the next annotator in round-robin order.
    /// Returns false once every annotator is done.
    pub async fn step(&mut self, app: &Router, sid: &str) -> bool {
        while !self.finished() {
            let a = self.turn % self.names.len();
            self.turn += 1;
            if self.done[a] {
                continue;
            }
            let name = self.names[a].clone();
            let (status, q) = call_json(app, "GET", &format!("/sessions/{sid}/next?annotator={name}"), None).await;
            if status == StatusCode::FORBIDDEN || q["status"] == "complete" {
                self.done[a] = true;
                continue;
            }
            assert_eq!(status, StatusCode::OK, "{q}");
            let ids: Vec<String> = q["speakers"].as_array().unwrap().iter().map(|s| s["item_id"].as_str().unwrap().to_string()).collect();
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let (best, worst) = self.annotators[a].answer(&refs).unwrap();
            let tuple_index = q["tuple_index"].as_u64().unwrap() as usize;
            let body = json!({"annotator": name, "tuple_index": tuple_index, "best": best, "worst": worst});
            let (status, out) = call_json(app, "POST", &format!("/sessions/{sid}/responses"), Some(body)).await;
            assert_eq!(status, StatusCode::OK, "{out}");
            match out["outcome"].as_str().unwrap() {
                "accepted" => self.stream.push(Response {
                    annotator_id: name,
                    tuple_index,
                    best: best.to_string(),
                    worst: worst.to_string(),
                    ordinal: 0,
                }),
                "gold_feedback" => {}
                "rejected_annotator" => {
                    self.stream.retain(|r| r.annotator_id != name);
                    self.rejected.push(name);
                    self.done[a] = true;
                }
                other => panic!("unexpected outcome {other}"),
            }
            return true;
        }
        false
    }

    /// The recorded stream as a file-path ResponseSet.
    pub fn direct_set(&self, design: Arc<TupleDesign>, per_tuple: usize) -> ResponseSet {
        let mut set = ResponseSet::new(design, per_tuple);
        for (k, r) in self.stream.iter().enumerate() {
            set.push(Response { ordinal: k as u64, ..r.clone() }).unwrap();
        }
        set
    }
}

pub fn leak_latent(design: &TupleDesign) -> &'static HashMap<String, f64> {
    Box::leak(Box::new(latent(design)))
}

/// Small synthetic scored corpus: one dataset per emotion whose scores are
/// driven by a handful of cue words, plus a matching lexicon and embeddings.
pub fn write_corpus(dir: &Path, per_emotion: usize, seed: u64) {
    use bwskit::corpus::{Dataset, Item, ItemKind, Partition};
    use rand::{Rng, SeedableRng};
    let cues = [("dread", 0.9), ("panic", 0.7), ("uneasy", 0.4), ("calm", -0.5), ("cozy", -0.8)];
    let filler = ["the", "day", "went", "on", "and", "we", "saw", "it", "again", "today"];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for emotion in Emotion::ALL {
        let items = (0..per_emotion)
            .map(|i| {
                let mut words: Vec<String> = (0..6).map(|_| filler[rng.gen_range(0..filler.len())].to_string()).collect();
                let mut score: f64 = 0.5;
                for _ in 0..rng.gen_range(1..4) {
                    let (w, v) = cues[rng.gen_range(0..cues.len())];
                    words.insert(rng.gen_range(0..words.len()), w.to_string());
                    score += 0.15 * v;
                }
                score = (score + rng.gen_range(-0.03..0.03)).clamp(0.0, 1.0);
                let partition = match i * 10 / per_emotion {
                    0..=4 => Partition::Train,
                    5 => Partition::Dev,
                    _ => Partition::Test,
                };
                Item {
                    id: format!("{}-{i:04}", emotion.as_str()),
                    text: words.join(" "),
                    emotion,
                    partition,
                    kind: ItemKind::Qt,
                    pair_id: None,
                    gold_score: Some((score * 1000.0).round() / 1000.0),
                }
            })
            .collect();
        let dataset = Dataset::new(items).unwrap();
        bwskit::corpus::write_dataset(&dataset, dir.join(format!("{emotion}.tsv")), bwskit::corpus::DatasetFormat::ScoredTsv).unwrap();
    }
    let mut lex = String::from("mode=numeric\n");
    for (w, v) in cues {
        lex.push_str(&format!("{w}\tintensity\t{v}\n"));
    }
    std::fs::write(dir.join("cues.tsv"), lex).unwrap();
    let mut emb = String::from("3\n");
    for (k, (w, v)) in cues.iter().enumerate() {
        emb.push_str(&format!("{w} {v} {} 0.5\n", k as f64 / 10.0));
    }
    for w in filler {
        emb.push_str(&format!("{w} 0 0 -0.5\n"));
    }
    std::fs::write(dir.join("emb.txt"), emb).unwrap();
}
