use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<unk>";

/// Token ↔ index map. Index 0 is padding, index 1 is out-of-vocabulary,
/// corpus tokens start at 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    counts: Vec<usize>,
}

impl From<Vocab> for VocabFile {
    fn from(v: Vocab) -> Self {
        VocabFile {
            tokens: v.tokens,
            counts: v.counts,
        }
    }
}

impl TryFrom<VocabFile> for Vocab {
    type Error = Error;

    fn try_from(f: VocabFile) -> Result<Self> {
        Vocab::from_parts(f.tokens, f.counts)
    }
}

impl Vocab {
    /// Rebuilds a vocabulary from its token list (including the two
    /// reserved entries) and per-token counts.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<usize>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[OOV] != OOV_TOKEN {
            return Err(Error::Data(
                "vocabulary must start with <pad>, <unk>".into(),
            ));
        }
        if counts.len() != tokens.len() {
            return Err(Error::Data(format!(
                "vocabulary has {} tokens but {} counts",
                tokens.len(),
                counts.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(2) {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self {
            tokens,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Index of a corpus token; never 0 or 1.
    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(OOV)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> usize {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Counts tokens and keeps those seen at least `min_freq` times,
/// most frequent first, ties broken alphabetically.
pub fn build_vocab<I, T>(token_lists: I, min_freq: usize) -> Vocab
where
    I: IntoIterator<Item = T>,
    T: AsRef<[String]>,
{
    let mut freq: HashMap<String, usize> = HashMap::new();
    for list in token_lists {
        for t in list.as_ref() {
            *freq.entry(t.clone()).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|(_, c)| *c >= min_freq.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
    let mut counts = vec![0, 0];
    for (t, c) in entries {
        tokens.push(t);
        counts.push(c);
    }
    Vocab::from_parts(tokens, counts).expect("freshly built vocabulary is valid")
}

/// Maps tokens to ids (unknown → 1), right-padding with 0 or truncating
/// to `length`.
pub fn encode_words(tokens: &[String], vocab: &Vocab, length: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = tokens.iter().take(length).map(|t| vocab.id(t)).collect();
    ids.resize(length, PAD);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn ordering_and_min_freq() {
        let v = build_vocab([toks("a a b")], 1);
        assert_eq!(v.get("a"), Some(2));
        assert_eq!(v.get("b"), Some(3));
        let v = build_vocab([toks("a a b")], 2);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get("b"), None);
        let v = build_vocab([toks("c b"), toks("a")], 1);
        assert_eq!(&v.tokens()[2..], &toks("a b c")[..]);
    }

    #[test]
    fn encoding() {
        let v = build_vocab([toks("a")], 1);
        assert_eq!(encode_words(&toks("a"), &v, 3), vec![2, 0, 0]);
        assert_eq!(encode_words(&toks("zz a"), &v, 3), vec![1, 2, 0]);
        let long: Vec<String> = (0..200).map(|_| "a".to_string()).collect();
        assert_eq!(encode_words(&long, &v, 100), vec![2; 100]);
    }

    #[test]
    fn json_round_trip() {
        let v = build_vocab([toks("x y y z")], 1);
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocab>(r#"{"tokens":["a"],"counts":[0]}"#).is_err());
    }
}
