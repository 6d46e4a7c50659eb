use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_LABEL_MAP: &str = include_str!("../../data/labels.txt");

/// Ordered class names with their integer codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelEncoder {
    classes: Vec<String>,
    codes: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for LabelEncoder {
    type Error = Error;

    fn try_from(classes: Vec<String>) -> Result<Self> {
        LabelEncoder::new(classes)
    }
}

impl From<LabelEncoder> for Vec<String> {
    fn from(e: LabelEncoder) -> Self {
        e.classes
    }
}

impl LabelEncoder {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        let mut codes = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            if codes.insert(c.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate class `{c}`")));
            }
        }
        if classes.is_empty() {
            return Err(Error::Config("no classes".into()));
        }
        Ok(Self { classes, codes })
    }

    pub fn encode(&self, class: &str) -> Option<usize> {
        self.codes.get(class).copied()
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.classes.get(code).map(String::as_str)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Maps source-dataset labels onto model classes. Unlisted labels are
/// dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    map: HashMap<String, String>,
    encoder: LabelEncoder,
}

impl LabelMap {
    /// `source = class` per line; `#` starts a comment. Classes are
    /// numbered in order of first appearance.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        let mut classes: Vec<String> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (src, dst) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "label map line {}: expected `source = class`",
                    n + 1
                ))
            })?;
            let (src, dst) = (src.trim(), dst.trim());
            if src.is_empty() || dst.is_empty() {
                return Err(Error::Config(format!(
                    "label map line {}: empty name",
                    n + 1
                )));
            }
            if map.insert(src.to_string(), dst.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "label map line {}: `{src}` mapped twice",
                    n + 1
                )));
            }
            if !classes.iter().any(|c| c == dst) {
                classes.push(dst.to_string());
            }
        }
        Ok(Self {
            map,
            encoder: LabelEncoder::new(classes)?,
        })
    }

    /// age, ethnicity, gender, religion, other; `not_cyberbullying` dropped.
    pub fn default_map() -> Self {
        Self::parse(DEFAULT_LABEL_MAP).expect("shipped label map parses")
    }

    pub fn encoder(&self) -> &LabelEncoder {
        &self.encoder
    }

    /// The class code for a source label, or `None` if it is dropped.
    pub fn code(&self, source: &str) -> Option<usize> {
        self.map.get(source).and_then(|c| self.encoder.encode(c))
    }
}
