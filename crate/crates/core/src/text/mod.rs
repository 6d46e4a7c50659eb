//! From raw tweets to encoded samples.

pub mod chars;
pub mod clean;
pub mod dataset;
pub mod glove;
pub mod ingest;
pub mod labels;
pub mod split;
pub mod vocab;

pub use chars::{quantize_chars, ALPHABET};
pub use clean::{clean_text, is_emoticon, strip_noise, tokenize, StopWords};
pub use dataset::{
    deduplicate_by as deduplicate, load_meta, make_batch, prepare, sha256_hex, DatasetMeta,
    EncodedSample, PrepareConfig, PrepareStats, PreparedDataset,
};
pub use glove::{load_glove, GloveTable};
pub use ingest::{ingest_csv, ingest_reader, IngestReport, RawRecord};
pub use labels::{LabelEncoder, LabelMap};
pub use split::split_train_test;
pub use vocab::{build_vocab, encode_words, Vocab, OOV, PAD};
