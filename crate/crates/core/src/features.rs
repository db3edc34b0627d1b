//! Tweet features: tokenization, negation scope, word and character
//! n-grams, averaged embeddings and lexicon aggregates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NEG_PREFIX: &str = "NEG-";
pub const DEFAULT_NEGATORS: &str = include_str!("../data/negators.txt");

#[derive(Error, Debug)]
pub enum FeatureError {
    #[error("{path}, line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("missing resource: {0}")]
    MissingResource(String),
    #[error("bad feature configuration '{0}'")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> FeatureError {
    FeatureError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Url,
    Mention,
    Hashtag,
    Emoticon,
    Number,
    Word,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub negated: bool,
    pub kind: TokenKind,
}

impl Token {
    /// Surface as seen by n-gram and lexicon features.
    pub fn rendered(&self) -> String {
        if self.negated {
            format!("{NEG_PREFIX}{}", self.surface)
        } else {
            self.surface.clone()
        }
    }
}

// Alternation is leftmost-first, so order encodes priority.
const TOKEN_PATTERN: &str = r#"(?x)
    (?P<url>(?:https?://|www\.)\S+)
  | (?P<mention>@\w+)
  | (?P<hashtag>\#\w+)
  | (?P<emoticon>[<>]?[:;=][-o*']?[)\](\[dp/\\|}{@]+ | <3+ | [)\](\[][-o*']?[:;=])
  | (?P<number>\d+(?:[.,]\d+)*(?:'\w+)?)
  | (?P<word>[\w\p{M}]+(?:'[\w\p{M}]+)*)
  | (?P<punct>[^\s\w]+)
"#;

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(TOKEN_PATTERN).expect("token pattern compiles"))
}

/// Lowercased tokens; URLs, mentions, hashtags and emoticons stay whole,
/// punctuation runs become their own tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let text = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let kinds = [
        ("url", TokenKind::Url),
        ("mention", TokenKind::Mention),
        ("hashtag", TokenKind::Hashtag),
        ("emoticon", TokenKind::Emoticon),
        ("number", TokenKind::Number),
        ("word", TokenKind::Word),
        ("punct", TokenKind::Punct),
    ];
    token_regex()
        .captures_iter(&text)
        .map(|caps| {
            let (name, kind) = kinds
                .iter()
                .find(|(name, _)| caps.name(name).is_some())
                .expect("one group matches");
            Token {
                surface: caps[*name].to_string(),
                negated: false,
                kind: *kind,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negators(HashSet<String>);

impl Negators {
    pub fn parse(content: &str) -> Self {
        Self(
            content
                .lines()
                .map(|l| l.trim().to_lowercase().replace('\u{2019}', "'"))
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        Ok(Self::parse(&fs::read_to_string(path).map_err(|e| io_err(path, e))?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Negators {
    fn default() -> Self {
        Self::parse(DEFAULT_NEGATORS)
    }
}

/// Marks tokens after a negator, up to the next punctuation token.
pub fn mark_negation(mut tokens: Vec<Token>, negators: &Negators) -> Vec<Token> {
    let mut in_scope = false;
    for t in &mut tokens {
        if t.kind == TokenKind::Punct {
            in_scope = false;
            continue;
        }
        if in_scope {
            t.negated = true;
        }
        if negators.contains(&t.surface) {
            in_scope = true;
        }
    }
    tokens
}

/// Sparse vector; zero values are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: BTreeMap<String, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        if value == 0.0 {
            self.entries.remove(&name);
        } else {
            self.entries.insert(name, value);
        }
    }

    pub fn add(&mut self, name: &str, value: f64) {
        let v = self.entries.get(name).copied().unwrap_or(0.0) + value;
        self.set(name, v);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.entries.get(name).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Union with `other`; shared names keep `other`'s value.
    pub fn extend(&mut self, other: FeatureVector) {
        self.entries.extend(other.entries);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = Self::new();
        for (k, v) in self.iter() {
            out.set(k, v * alpha);
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        self.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
    }
}

impl FromIterator<(String, f64)> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        let mut v = Self::new();
        for (k, x) in iter {
            v.set(k, x);
        }
        v
    }
}

/// Binary presence of word n-grams over rendered surfaces.
pub fn word_ngrams(tokens: &[Token], n_min: usize, n_max: usize) -> FeatureVector {
    let rendered: Vec<String> = tokens.iter().map(Token::rendered).collect();
    let mut out = FeatureVector::new();
    for n in n_min.max(1)..=n_max {
        for gram in rendered.windows(n) {
            out.set(format!("wn:{}", gram.join(" ")), 1.0);
        }
    }
    out
}

/// Binary presence of character n-grams over the lowercased text with
/// whitespace collapsed.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> FeatureVector {
    let normalized = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = normalized.chars().collect();
    let mut out = FeatureVector::new();
    for n in n_min.max(1)..=n_max {
        for gram in chars.windows(n) {
            out.set(format!("cn:{}", gram.iter().collect::<String>()), 1.0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize, vectors: HashMap<String, Vec<f32>>) -> Result<Self, FeatureError> {
        if dimension == 0 {
            return Err(FeatureError::Config("embedding dimension must be positive".into()));
        }
        if let Some((w, v)) = vectors.iter().find(|(_, v)| v.len() != dimension) {
            return Err(FeatureError::Config(format!(
                "vector for '{w}' has {} values, expected {dimension}",
                v.len()
            )));
        }
        Ok(Self { dimension, vectors })
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Text format: a header holding `d` (or `count d`), then `word v1 .. vd`.
    pub fn parse(content: &str, origin: &str) -> Result<Self, FeatureError> {
        let err = |line: usize, message: String| FeatureError::Format {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = content.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty embedding file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let dimension = match fields.as_slice() {
            [d] | [_, d] => d.parse::<usize>().map_err(|e| err(1, format!("bad dimension header: {e}")))?,
            _ => return Err(err(1, format!("expected 'd' or 'count d' header, got '{header}'"))),
        };
        let mut vectors = HashMap::new();
        for (idx, line) in lines {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values = parts
                .map(str::parse::<f32>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(idx + 1, format!("bad value: {e}")))?;
            if values.len() != dimension {
                return Err(err(idx + 1, format!("{} values, expected {dimension}", values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(err(idx + 1, "non-finite value".into()));
            }
            vectors.insert(word.to_string(), values);
        }
        Self::new(dimension, vectors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }
}

/// Mean embedding of in-vocabulary tokens, looked up by bare surface.
pub fn embedding_average(tokens: &[Token], table: &EmbeddingTable) -> FeatureVector {
    let mut sum = vec![0.0f64; table.dimension];
    let mut hits = 0usize;
    for t in tokens {
        if let Some(v) = table.get(&t.surface) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += *x as f64;
            }
            hits += 1;
        }
    }
    let mut out = FeatureVector::new();
    if hits > 0 {
        for (i, s) in sum.into_iter().enumerate() {
            out.set(format!("we:{i}"), s / hits as f64);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconMode {
    Nominal,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub mode: LexiconMode,
    pub classes: BTreeSet<String>,
    entries: HashMap<String, BTreeMap<String, f64>>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, mode: LexiconMode) -> Self {
        Self {
            name: name.into(),
            mode,
            classes: BTreeSet::new(),
            entries: HashMap::new(),
        }
    }

    /// Nominal entries with value 0 are non-members and are not stored.
    pub fn insert(&mut self, word: &str, class: &str, value: f64) {
        if self.mode == LexiconMode::Nominal && value == 0.0 {
            return;
        }
        let value = match self.mode {
            LexiconMode::Nominal => 1.0,
            LexiconMode::Numeric => value,
        };
        self.classes.insert(class.to_string());
        self.entries.entry(word.to_string()).or_default().insert(class.to_string(), value);
    }

    pub fn lookup(&self, word: &str) -> Option<&BTreeMap<String, f64>> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First line `mode=nominal` or `mode=numeric`, then `word \t class \t value`.
    pub fn parse(name: &str, content: &str) -> Result<Self, FeatureError> {
        let err = |line: usize, message: String| FeatureError::Format {
            path: name.to_string(),
            line,
            message,
        };
        let mut lines = content.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty lexicon".into()))?;
        let mode = match header.trim() {
            "mode=nominal" => LexiconMode::Nominal,
            "mode=numeric" => LexiconMode::Numeric,
            other => return Err(err(1, format!("expected mode header, got '{other}'"))),
        };
        let mut lex = Self::new(name, mode);
        for (idx, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(idx + 1, format!("expected 3 columns, found {}", cols.len())));
            }
            let value: f64 = cols[2]
                .trim()
                .parse()
                .map_err(|e| err(idx + 1, format!("bad value '{}': {e}", cols[2])))?;
            if !value.is_finite() {
                return Err(err(idx + 1, "non-finite value".into()));
            }
            let word = match cols[0].strip_prefix(NEG_PREFIX) {
                Some(rest) => format!("{NEG_PREFIX}{}", rest.to_lowercase()),
                None => cols[0].to_lowercase(),
            };
            lex.insert(&word, cols[1], value);
        }
        Ok(lex)
    }

    /// The lexicon is named after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "lexicon".into());
        Self::parse(&name, &content)
    }
}

/// Per-class occurrence counts (nominal) or value sums (numeric). Negated
/// tokens are looked up under their `NEG-` rendering.
pub fn lexicon_features(tokens: &[Token], lexicon: &Lexicon) -> FeatureVector {
    let mut out = FeatureVector::new();
    for t in tokens {
        if let Some(classes) = lexicon.lookup(&t.rendered()) {
            for (class, value) in classes {
                out.add(&format!("lex:{}:{class}", lexicon.name), *value);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LexiconSelection {
    None,
    All,
    Named(Vec<String>),
}

/// Which extractors feed a vector; parsed from labels like `WN+WE+L` or
/// `L:NRC-Hash-Emo`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub word_ngrams: bool,
    pub char_ngrams: bool,
    pub embeddings: bool,
    pub lexicons: LexiconSelection,
}

impl FromStr for FeatureConfig {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cfg = FeatureConfig {
            word_ngrams: false,
            char_ngrams: false,
            embeddings: false,
            lexicons: LexiconSelection::None,
        };
        for part in s.split('+').map(str::trim) {
            match part.to_ascii_uppercase().as_str() {
                "WN" => cfg.word_ngrams = true,
                "CN" => cfg.char_ngrams = true,
                "WE" => cfg.embeddings = true,
                "L" => cfg.lexicons = LexiconSelection::All,
                _ => {
                    let name = part
                        .strip_prefix("L:")
                        .or_else(|| part.strip_prefix("l:"))
                        .filter(|n| !n.is_empty())
                        .ok_or_else(|| FeatureError::Config(s.to_string()))?;
                    match &mut cfg.lexicons {
                        LexiconSelection::Named(names) => names.push(name.to_string()),
                        LexiconSelection::None => cfg.lexicons = LexiconSelection::Named(vec![name.to_string()]),
                        LexiconSelection::All => {}
                    }
                }
            }
        }
        if !cfg.word_ngrams && !cfg.char_ngrams && !cfg.embeddings && cfg.lexicons == LexiconSelection::None {
            return Err(FeatureError::Config(s.to_string()));
        }
        Ok(cfg)
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.word_ngrams {
            parts.push("WN".to_string());
        }
        if self.char_ngrams {
            parts.push("CN".to_string());
        }
        if self.embeddings {
            parts.push("WE".to_string());
        }
        match &self.lexicons {
            LexiconSelection::None => {}
            LexiconSelection::All => parts.push("L".to_string()),
            LexiconSelection::Named(names) => parts.extend(names.iter().map(|n| format!("L:{n}"))),
        }
        f.write_str(&parts.join("+"))
    }
}

/// Shared, immutable extraction resources.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub lexicons: Vec<Arc<Lexicon>>,
    pub negators: Negators,
}

impl Resources {
    pub fn lexicon(&self, name: &str) -> Option<&Arc<Lexicon>> {
        self.lexicons.iter().find(|l| l.name == name)
    }

    fn selected<'a>(&'a self, sel: &LexiconSelection) -> Result<Vec<&'a Lexicon>, FeatureError> {
        match sel {
            LexiconSelection::None => Ok(Vec::new()),
            LexiconSelection::All => {
                if self.lexicons.is_empty() {
                    return Err(FeatureError::MissingResource("no lexicons loaded".into()));
                }
                Ok(self.lexicons.iter().map(|l| l.as_ref()).collect())
            }
            LexiconSelection::Named(names) => names
                .iter()
                .map(|n| {
                    self.lexicon(n)
                        .map(|l| l.as_ref())
                        .ok_or_else(|| FeatureError::MissingResource(format!("lexicon {n}")))
                })
                .collect(),
        }
    }

    /// Fails early if `config` asks for anything not loaded.
    pub fn check(&self, config: &FeatureConfig) -> Result<(), FeatureError> {
        if config.embeddings && self.embeddings.is_none() {
            return Err(FeatureError::MissingResource("word embeddings".into()));
        }
        self.selected(&config.lexicons).map(|_| ())
    }
}

pub fn assemble(text: &str, config: &FeatureConfig, resources: &Resources) -> Result<FeatureVector, FeatureError> {
    resources.check(config)?;
    let tokens = mark_negation(tokenize(text), &resources.negators);
    let mut out = FeatureVector::new();
    if config.word_ngrams {
        out.extend(word_ngrams(&tokens, 1, 4));
    }
    if config.char_ngrams {
        out.extend(char_ngrams(text, 3, 5));
    }
    if config.embeddings {
        let table = resources.embeddings.as_ref().expect("checked above");
        out.extend(embedding_average(&tokens, table));
    }
    for lex in resources.selected(&config.lexicons)? {
        out.extend(lexicon_features(&tokens, lex));
    }
    Ok(out)
}
