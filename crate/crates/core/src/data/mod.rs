//! Tokenization, vocabulary, documents and sliding windows.

mod synth;
mod tsv;

use std::collections::HashMap;

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub use synth::{synth_majority, SynthDataset};
pub use tsv::{load_tsv, write_tsv, Record};

pub const PAD: usize = 0;
pub const UNK: usize = 1;

/// Lowercases, splits on whitespace, and emits every character that is
/// neither alphanumeric nor whitespace as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Dense token ids with `PAD = 0` and `UNK = 1` reserved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Keeps tokens seen at least `min_freq` times, most frequent first with
    /// ties broken lexicographically, truncated to `max_size` ids in total.
    pub fn build<'a, I>(docs: I, min_freq: usize, max_size: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for tok in doc {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(
            ranked
                .into_iter()
                .take(max_size.saturating_sub(2))
                .map(|(t, _)| t.to_string()),
        );
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&id) if id != PAD => id,
            _ => UNK,
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
}

/// Fixed-length windows starting at `0, stride, 2·stride, …` while the start
/// lies inside the sequence; the tail is PAD-filled.
pub fn make_windows(ids: &[usize], n: usize, stride: usize) -> Vec<Window> {
    assert!(n >= 1 && stride >= 1, "window length and stride must be positive");
    let mut out = Vec::new();
    let mut start = 0;
    while start < ids.len() {
        let end = (start + n).min(ids.len());
        let mut w = ids[start..end].to_vec();
        w.resize(n, PAD);
        let mask = w.iter().map(|&id| id != PAD).collect();
        out.push(Window { ids: w, mask });
        start += stride;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub ids: Vec<usize>,
    pub label: usize,
    pub windows: Vec<Window>,
}

impl Document {
    pub fn new(ids: Vec<usize>, label: usize, n: usize, stride: usize) -> Self {
        let windows = make_windows(&ids, n, stride);
        Self { ids, label, windows }
    }

    pub fn from_text(text: &str, label: usize, vocab: &Vocab, n: usize, stride: usize) -> Self {
        Self::new(vocab.encode(&tokenize(text)), label, n, stride)
    }
}

/// Tokenized train/validation/test documents with the training vocabulary.
#[derive(Clone, Debug)]
pub struct Splits {
    pub vocab: Vocab,
    pub train: Vec<Document>,
    pub val: Vec<Document>,
    pub test: Vec<Document>,
}

/// Loads (or generates) the configured data and windows every document.
/// The vocabulary is built from the training split only.
pub fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    load_splits_with(cfg, None)
}

/// As [`load_splits`], but encodes with `vocab` when given (e.g. the
/// vocabulary stored in a checkpoint).
pub fn load_splits_with(cfg: &RunConfig, vocab: Option<Vocab>) -> Result<Splits> {
    let (train, val, test) = match &cfg.data.synthetic {
        Some(s) => {
            let d = synth_majority(s.seed, s.size, s.length, s.vocab_size)?;
            (d.train, d.val, d.test)
        }
        None => {
            let need = |p: &Option<std::path::PathBuf>, field: &str| {
                p.clone()
                    .ok_or_else(|| Error::Config(vec![format!("{field}: missing path (or set data.synthetic)")]))
            };
            let train = load_tsv(need(&cfg.data.train, "data.train")?)?;
            let val = load_tsv(need(&cfg.data.val, "data.val")?)?;
            let test = match &cfg.data.test {
                Some(p) => load_tsv(p)?,
                None => Vec::new(),
            };
            (train, val, test)
        }
    };
    let vocab = vocab.unwrap_or_else(|| {
        let tokenized: Vec<Vec<String>> = train.iter().map(|(_, t)| tokenize(t)).collect();
        Vocab::build(tokenized.iter().map(Vec::as_slice), cfg.data.min_freq(), cfg.data.max_vocab())
    });
    let m = &cfg.model;
    let docs = |records: &[Record], split: &str| -> Result<Vec<Document>> {
        records
            .iter()
            .enumerate()
            .map(|(i, (label, text))| {
                if *label >= m.classes {
                    return Err(Error::Label {
                        label: *label,
                        classes: m.classes,
                    });
                }
                let doc = Document::from_text(text, *label, &vocab, m.window, m.stride());
                if doc.windows.is_empty() {
                    return Err(Error::Input(format!("{split} record {} has no tokens", i + 1)));
                }
                Ok(doc)
            })
            .collect()
    };
    let (train, val, test) = (docs(&train, "train")?, docs(&val, "val")?, docs(&test, "test")?);
    if train.is_empty() || val.is_empty() {
        return Err(Error::Input("train and validation splits must be non-empty".into()));
    }
    Ok(Splits { vocab, train, val, test })
}
