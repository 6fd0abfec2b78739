//! Corpus ingestion: tokenization, vocabulary construction, seed-word sets
//! and the raw seed occurrence counts everything downstream is built from.
//!
//! Corpus files hold one document per line as `label TAB split TAB text`,
//! where `label` is a label id or `-` for unlabeled documents and `split` is
//! `train` or `test`. Seed files hold `label_id TAB word[,word...]`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowercases and splits on any non-alphanumeric character.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// SHA-256 over the ordered word list; ties checkpoints to a corpus.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<u32>,
    /// Sparse term frequencies as `(word id, count)`, sorted by word id.
    pub tf: Vec<(u32, u32)>,
    /// Evaluation only. Training code never reads it.
    pub gold_label: Option<usize>,
    pub split: Split,
}

impl Document {
    pub fn new(id: usize, tokens: Vec<u32>, gold_label: Option<usize>, split: Split) -> Self {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for &t in &tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        Self { id, tokens, tf: counts.into_iter().collect(), gold_label, split }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    vocabulary: Vocabulary,
    documents: Vec<Document>,
    num_labels: usize,
}

impl Corpus {
    pub fn new(vocabulary: Vocabulary, documents: Vec<Document>, num_labels: usize) -> Result<Self> {
        if vocabulary.is_empty() || documents.is_empty() {
            return Err(Error::InvalidInput("corpus is empty".into()));
        }
        let v = vocabulary.len() as u32;
        for (i, doc) in documents.iter().enumerate() {
            if doc.id != i {
                return Err(Error::InvalidInput(format!("document id {} at position {i}", doc.id)));
            }
            if doc.is_empty() {
                return Err(Error::InvalidInput(format!("document {i} has no tokens")));
            }
            if doc.tokens.iter().any(|&t| t >= v) {
                return Err(Error::InvalidInput(format!("document {i} has out-of-range word ids")));
            }
            if let Some(g) = doc.gold_label {
                if g >= num_labels {
                    return Err(Error::InvalidInput(format!(
                        "document {i} has label {g} but only {num_labels} labels exist"
                    )));
                }
            }
        }
        Ok(Self { vocabulary, documents, num_labels })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    /// Corpus-wide count of every vocabulary word.
    pub fn term_frequencies(&self) -> Array1<f64> {
        let mut tf = Array1::zeros(self.vocab_size());
        for doc in &self.documents {
            for &(v, c) in &doc.tf {
                tf[v as usize] += c as f64;
            }
        }
        tf
    }

    pub fn gold_labels(&self) -> Vec<Option<usize>> {
        self.documents.iter().map(|d| d.gold_label).collect()
    }

    pub fn ids_in_split(&self, split: Split) -> Vec<usize> {
        self.documents.iter().filter(|d| d.split == split).map(|d| d.id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub min_doc_freq: usize,
    pub min_word_len: usize,
    pub stopwords: Option<PathBuf>,
    /// Defaults to one past the largest gold label.
    pub num_labels: Option<usize>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { min_doc_freq: 5, min_word_len: 2, stopwords: None, num_labels: None }
    }
}

struct RawDocument {
    label: Option<usize>,
    split: Split,
    words: Vec<String>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    Ok(read_to_string(path)?.split_whitespace().map(str::to_lowercase).collect())
}

fn parse_line<'a>(path: &Path, lineno: usize, line: &'a str) -> Result<(Option<usize>, Split, &'a str)> {
    let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: lineno, message };
    let mut fields = line.splitn(3, '\t');
    let (Some(label), Some(split), Some(text)) = (fields.next(), fields.next(), fields.next()) else {
        return Err(parse_err("expected `label TAB split TAB text`".into()));
    };
    let label = match label.trim() {
        "-" => None,
        l => Some(l.parse::<usize>().map_err(|_| parse_err(format!("bad label {l:?}")))?),
    };
    let split = match split.trim() {
        "train" => Split::Train,
        "test" => Split::Test,
        s => return Err(parse_err(format!("bad split {s:?}, expected train or test"))),
    };
    Ok((label, split, text))
}

pub fn load_corpus(path: &Path, options: &CorpusOptions) -> Result<Corpus> {
    let text = read_to_string(path)?;
    let stopwords = match &options.stopwords {
        Some(p) => load_stopwords(p)?,
        None => HashSet::new(),
    };
    parse_corpus(&text, path, options, &stopwords)
}

/// Builds a corpus from in-memory file contents; `path` is only used in errors.
pub fn parse_corpus(text: &str, path: &Path, options: &CorpusOptions, stopwords: &HashSet<String>) -> Result<Corpus> {
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, split, body) = parse_line(path, i + 1, line)?;
        let words =
            tokenize(body).filter(|w| w.chars().count() >= options.min_word_len && !stopwords.contains(w)).collect();
        raw.push(RawDocument { label, split, words });
    }

    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for doc in &raw {
        let distinct: HashSet<&str> = doc.words.iter().map(String::as_str).collect();
        for w in distinct {
            *doc_freq.entry(w).or_insert(0) += 1;
        }
    }

    let mut words = Vec::new();
    let mut index: HashMap<&str, u32> = HashMap::new();
    for doc in &raw {
        for w in &doc.words {
            if doc_freq[w.as_str()] >= options.min_doc_freq && !index.contains_key(w.as_str()) {
                index.insert(w.as_str(), words.len() as u32);
                words.push(w.clone());
            }
        }
    }

    let mut documents = Vec::with_capacity(raw.len());
    let mut dropped = 0usize;
    for doc in &raw {
        let tokens: Vec<u32> = doc.words.iter().filter_map(|w| index.get(w.as_str()).copied()).collect();
        if tokens.is_empty() {
            dropped += 1;
            continue;
        }
        documents.push(Document::new(documents.len(), tokens, doc.label, doc.split));
    }
    if dropped > 0 {
        info!("dropped {dropped} documents that were empty after filtering");
    }
    if documents.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no documents left after filtering", path.display())));
    }

    let inferred = documents.iter().filter_map(|d| d.gold_label).max().map_or(0, |m| m + 1);
    let num_labels = options.num_labels.unwrap_or(inferred);
    let vocabulary = Vocabulary::from_words(words)?;
    Corpus::new(vocabulary, documents, num_labels)
}

/// Tokenizes documents against an existing vocabulary, dropping unknown
/// words. Documents left empty are skipped.
pub fn load_heldout(path: &Path, vocabulary: &Vocabulary, stopwords: &HashSet<String>) -> Result<Vec<Document>> {
    let text = read_to_string(path)?;
    let mut docs = Vec::new();
    let mut dropped = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, split, body) = parse_line(path, i + 1, line)?;
        let tokens: Vec<u32> =
            tokenize(body).filter(|w| !stopwords.contains(w)).filter_map(|w| vocabulary.id(&w)).collect();
        if tokens.is_empty() {
            dropped += 1;
            continue;
        }
        docs.push(Document::new(docs.len(), tokens, label, split));
    }
    if dropped > 0 {
        info!("skipped {dropped} held-out documents with no in-vocabulary tokens");
    }
    Ok(docs)
}

/// Seed word ids per label, each list sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedWordSet {
    sets: Vec<Vec<u32>>,
}

impl SeedWordSet {
    pub fn new(mut sets: Vec<Vec<u32>>) -> Result<Self> {
        for (k, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::EmptySeedLabel { label: k });
            }
        }
        Ok(Self { sets })
    }

    pub fn num_labels(&self) -> usize {
        self.sets.len()
    }

    pub fn label(&self, k: usize) -> &[u32] {
        &self.sets[k]
    }

    pub fn sets(&self) -> &[Vec<u32>] {
        &self.sets
    }

    /// Labels whose seed list contains each word, indexed by word id.
    pub fn labels_by_word(&self, vocab_size: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); vocab_size];
        for (k, set) in self.sets.iter().enumerate() {
            for &v in set {
                out[v as usize].push(k);
            }
        }
        out
    }

    pub fn mean_set_size(&self) -> f64 {
        self.sets.iter().map(Vec::len).sum::<usize>() as f64 / self.sets.len() as f64
    }
}

pub fn load_seed_words(path: &Path, corpus: &Corpus, purify: bool, rng_seed: u64) -> Result<SeedWordSet> {
    let text = read_to_string(path)?;
    parse_seed_words(&text, path, corpus, purify, rng_seed)
}

pub fn parse_seed_words(text: &str, path: &Path, corpus: &Corpus, purify: bool, rng_seed: u64) -> Result<SeedWordSet> {
    let k_total = corpus.num_labels();
    let mut sets: Vec<Vec<u32>> = vec![Vec::new(); k_total];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
        let Some((label, words)) = line.split_once('\t') else {
            return Err(parse_err("expected `label_id TAB word[,word...]`".into()));
        };
        let label: usize = label.trim().parse().map_err(|_| parse_err(format!("bad label {label:?}")))?;
        if label >= k_total {
            return Err(parse_err(format!("label {label} out of range for {k_total} labels")));
        }
        for piece in words.split(',') {
            for w in tokenize(piece) {
                match corpus.vocabulary().id(&w) {
                    Some(id) => sets[label].push(id),
                    None => warn!("seed word {w:?} for label {label} is not in the vocabulary; dropped"),
                }
            }
        }
    }
    for set in &mut sets {
        set.sort_unstable();
        set.dedup();
    }
    if purify {
        purify_seed_sets(&mut sets, rng_seed);
    }
    SeedWordSet::new(sets)
}

/// Keeps each word that appears under several labels in exactly one of
/// them, chosen uniformly at random. Words are visited in id order so the
/// outcome depends only on `rng_seed`.
pub fn purify_seed_sets(sets: &mut [Vec<u32>], rng_seed: u64) {
    let mut owners: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, set) in sets.iter().enumerate() {
        for &v in set {
            owners.entry(v).or_default().push(k);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for (v, labels) in owners {
        if labels.len() < 2 {
            continue;
        }
        let keep = labels[rng.random_range(0..labels.len())];
        for &k in &labels {
            if k != keep {
                sets[k].retain(|&w| w != v);
            }
        }
    }
}

/// Seed occurrence counts: `df[d][k]` is the number of seed tokens of
/// label `k` in document `d`, `tf[v]` the corpus count of word `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedCounts {
    pub df: Array2<f64>,
    pub tf: Array1<f64>,
}

impl SeedCounts {
    /// Total seed-token count per label.
    pub fn label_totals(&self) -> Array1<f64> {
        self.df.sum_axis(ndarray::Axis(0))
    }
}

pub fn count_seed_occurrences(corpus: &Corpus, seeds: &SeedWordSet) -> SeedCounts {
    let k_total = seeds.num_labels();
    let by_word = seeds.labels_by_word(corpus.vocab_size());
    let mut df = Array2::zeros((corpus.num_docs(), k_total));
    for doc in corpus.documents() {
        for &(v, c) in &doc.tf {
            for &k in &by_word[v as usize] {
                df[[doc.id, k]] += c as f64;
            }
        }
    }
    SeedCounts { df, tf: corpus.term_frequencies() }
}
