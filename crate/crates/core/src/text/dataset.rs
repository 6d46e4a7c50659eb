//! The prepare pipeline and the on-disk prepared dataset: `train.csv` and
//! `test.csv` (`label,word_ids,char_ids`, ids space-separated) next to a
//! `dataset.json` sidecar.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layers::TokenIds;
use crate::model::{Batch, ModelKind};
use crate::text::{
    build_vocab, clean_text, deduplicate, encode_words, quantize_chars, split_train_test,
    strip_noise, tokenize, LabelEncoder, LabelMap, RawRecord, StopWords, Vocab,
};

pub const PIPELINE_VERSION: u32 = 1;
pub const SIDECAR: &str = "dataset.json";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";

/// Model-ready sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<usize>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub word_length: usize,
    pub char_length: usize,
    pub min_freq: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            word_length: crate::model::spec::DEFAULT_WORD_LENGTH,
            char_length: crate::model::spec::CHAR_LENGTH,
            min_freq: 1,
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepareStats {
    pub records: usize,
    pub unmapped_label: usize,
    pub empty_after_cleaning: usize,
    pub duplicates: usize,
    pub train: usize,
    pub test: usize,
}

/// Everything needed to encode new text the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub pipeline_version: u32,
    pub config: PrepareConfig,
    pub classes: LabelEncoder,
    pub vocab: Vocab,
    pub stopwords: Vec<String>,
    pub stopwords_sha256: String,
    pub stats: PrepareStats,
}

impl DatasetMeta {
    pub fn stopword_set(&self) -> StopWords {
        StopWords::from_words(&self.stopwords)
    }

    /// Encodes free text; `None` when nothing survives cleaning.
    pub fn encode_text(
        &self,
        text: &str,
        stopwords: &StopWords,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let cleaned = clean_text(text, stopwords);
        if cleaned.is_empty() {
            return None;
        }
        Some((
            encode_words(&tokenize(&cleaned), &self.vocab, self.config.word_length),
            quantize_chars(&strip_noise(text), self.config.char_length),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub meta: DatasetMeta,
    pub train: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// First occurrence of each key wins; returns the survivors and the
/// number removed.
pub fn deduplicate_by<T>(items: Vec<T>, key: impl Fn(&T) -> &str) -> (Vec<T>, usize) {
    let mut seen = HashSet::new();
    let before = items.len();
    let kept: Vec<T> = items
        .into_iter()
        .filter(|x| seen.insert(key(x).to_string()))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

struct Cleaned {
    label: usize,
    words: String,
    chars: String,
}

/// Label mapping, cleaning, deduplication, stratified split, then a
/// vocabulary built from the training part only.
pub fn prepare(
    records: &[RawRecord],
    labels: &LabelMap,
    stopwords: &StopWords,
    cfg: &PrepareConfig,
) -> Result<PreparedDataset> {
    let mut stats = PrepareStats {
        records: records.len(),
        ..Default::default()
    };
    let cleaned: Vec<Option<Cleaned>> = records
        .par_iter()
        .map(|r| {
            labels.code(&r.label).map(|label| Cleaned {
                label,
                words: clean_text(&r.text, stopwords),
                chars: strip_noise(&r.text),
            })
        })
        .collect();
    stats.unmapped_label = cleaned.iter().filter(|c| c.is_none()).count();
    let kept: Vec<Cleaned> = cleaned.into_iter().flatten().collect();
    let before = kept.len();
    let kept: Vec<Cleaned> = kept.into_iter().filter(|c| !c.words.is_empty()).collect();
    stats.empty_after_cleaning = before - kept.len();
    let (kept, dups) = deduplicate(kept, |c| &c.words);
    stats.duplicates = dups;
    if kept.is_empty() {
        return Err(Error::Data("no usable records after cleaning".into()));
    }

    let (train, test) = split_train_test(kept, |c| c.label, cfg.train_fraction, cfg.seed)?;
    let train_tokens: Vec<Vec<String>> = train.iter().map(|c| tokenize(&c.words)).collect();
    let vocab = build_vocab(&train_tokens, cfg.min_freq);
    let encode = |c: &Cleaned| EncodedSample {
        word_ids: encode_words(&tokenize(&c.words), &vocab, cfg.word_length),
        char_ids: quantize_chars(&c.chars, cfg.char_length),
        label: c.label,
    };
    let train: Vec<EncodedSample> = train.par_iter().map(encode).collect();
    let test: Vec<EncodedSample> = test.par_iter().map(encode).collect();
    stats.train = train.len();
    stats.test = test.len();
    Ok(PreparedDataset {
        meta: DatasetMeta {
            pipeline_version: PIPELINE_VERSION,
            config: cfg.clone(),
            classes: labels.encoder().clone(),
            vocab,
            stopwords: stopwords.words(),
            stopwords_sha256: sha256_hex(stopwords.source()),
            stats,
        },
        train,
        test,
    })
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_samples(path: &Path, samples: &[EncodedSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "word_ids", "char_ids"])?;
    for s in samples {
        w.write_record([
            s.label.to_string(),
            join_ids(&s.word_ids),
            join_ids(&s.char_ids),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_samples(path: &Path, meta: &DatasetMeta) -> Result<Vec<EncodedSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let ids = |field: usize, len: usize, bound: usize| -> Result<Vec<usize>> {
            let raw = rec.get(field).ok_or_else(|| bad("missing field".into()))?;
            let ids = raw
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(e.to_string()))?;
            if ids.len() != len {
                return Err(bad(format!("expected {len} ids, found {}", ids.len())));
            }
            if let Some(x) = ids.iter().find(|&&x| x >= bound) {
                return Err(bad(format!("id {x} out of range [0, {bound})")));
            }
            Ok(ids)
        };
        let label: usize = rec
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        if label >= meta.classes.len() {
            return Err(bad(format!("label {label} out of range")));
        }
        out.push(EncodedSample {
            word_ids: ids(1, meta.config.word_length, meta.vocab.len())?,
            char_ids: ids(
                2,
                meta.config.char_length,
                crate::model::spec::ALPHABET_SIZE + 1,
            )?,
            label,
        });
    }
    Ok(out)
}

impl PreparedDataset {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_samples(&dir.join(TRAIN_FILE), &self.train)?;
        write_samples(&dir.join(TEST_FILE), &self.test)?;
        let sidecar = dir.join(SIDECAR);
        let json = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = load_meta(dir)?;
        let train = read_samples(&dir.join(TRAIN_FILE), &meta)?;
        let test = read_samples(&dir.join(TEST_FILE), &meta)?;
        Ok(Self { meta, train, test })
    }
}

pub fn load_meta(dir: impl AsRef<Path>) -> Result<DatasetMeta> {
    let path = dir.as_ref().join(SIDECAR);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text)?;
    if meta.pipeline_version != PIPELINE_VERSION {
        return Err(Error::Data(format!(
            "dataset pipeline version {} is not supported (expected {PIPELINE_VERSION})",
            meta.pipeline_version
        )));
    }
    Ok(meta)
}

/// Batch holding whichever inputs `kind` consumes.
pub fn make_batch(samples: &[&EncodedSample], kind: ModelKind) -> Result<Batch> {
    let words = match kind {
        ModelKind::Char => None,
        _ => Some(TokenIds::from_sequences(
            &samples.iter().map(|s| &s.word_ids[..]).collect::<Vec<_>>(),
        )?),
    };
    let chars = match kind {
        ModelKind::Word => None,
        _ => Some(TokenIds::from_sequences(
            &samples.iter().map(|s| &s.char_ids[..]).collect::<Vec<_>>(),
        )?),
    };
    Ok(Batch { words, chars })
}
