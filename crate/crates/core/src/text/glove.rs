use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};
use crate::text::vocab::{Vocab, PAD};

/// Half-width of the uniform range used for tokens missing from the file.
pub const OOV_SCALE: f64 = 0.5 / 100.0;

/// Pretrained word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GloveTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
    /// Vector for tokens the file does not contain.
    pub oov: Vec<f64>,
}

impl GloveTable {
    /// Parses `token v1 … v_dim` lines. With `keep`, only those tokens are
    /// stored (the full file has 400k entries).
    pub fn read(
        path: impl AsRef<Path>,
        dim: usize,
        keep: Option<&HashSet<&str>>,
        rng: &mut RngState,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), path, dim, keep, rng)
    }

    pub fn from_reader<R: BufRead>(
        reader: R,
        path: &Path,
        dim: usize,
        keep: Option<&HashSet<&str>>,
        rng: &mut RngState,
    ) -> Result<Self> {
        let oov = (0..dim)
            .map(|_| rng.uniform(-OOV_SCALE, OOV_SCALE))
            .collect();
        let mut vectors = HashMap::new();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: PathBuf::from(path),
            line,
            msg,
        };
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|p| !p.is_empty());
            let token = parts.next().unwrap_or_default();
            let values: Vec<&str> = parts.collect();
            if values.len() != dim {
                return Err(parse_err(
                    lineno,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            if keep.is_some_and(|k| !k.contains(token)) {
                continue;
            }
            let v = values
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(lineno, format!("bad number: {e}")))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(parse_err(lineno, "non-finite value".into()));
            }
            vectors.insert(token.to_string(), v);
        }
        Ok(Self { dim, vectors, oov })
    }
}

/// Embedding table for `vocab`: rows from the file where present, seeded
/// uniform(−0.5, 0.5)/100 draws otherwise (in index order, one draw per
/// row whether or not it is found), and a zero padding row.
pub fn load_glove(
    path: impl AsRef<Path>,
    vocab: &Vocab,
    dim: usize,
    rng: &mut RngState,
) -> Result<Tensor> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    glove_from_reader(std::io::BufReader::new(file), path, vocab, dim, rng)
}

pub fn glove_from_reader<R: BufRead>(
    reader: R,
    path: &Path,
    vocab: &Vocab,
    dim: usize,
    rng: &mut RngState,
) -> Result<Tensor> {
    let mut table = Tensor::zeros(&[vocab.len(), dim]);
    for id in 0..vocab.len() {
        if id == PAD {
            continue;
        }
        for j in 0..dim {
            table.data_mut()[id * dim + j] = rng.uniform(-OOV_SCALE, OOV_SCALE);
        }
    }
    let keep: HashSet<&str> = vocab.tokens().iter().skip(2).map(String::as_str).collect();
    let glove = GloveTable::from_reader(reader, path, dim, Some(&keep), rng)?;
    for (token, v) in &glove.vectors {
        if let Some(id) = vocab.get(token) {
            table.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(v);
        }
    }
    Ok(table)
}

/// Number of vocabulary tokens found in the table.
pub fn coverage(vocab: &Vocab, glove: &GloveTable) -> usize {
    vocab
        .tokens()
        .iter()
        .skip(2)
        .filter(|t| glove.vectors.contains_key(t.as_str()))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::vocab::build_vocab;

    fn vocab() -> Vocab {
        build_vocab([vec!["hello".to_string(), "world".to_string()]], 1)
    }

    #[test]
    fn rows_pad_and_oov() {
        let text = "hello 0.1 0.2 -0.3\nother 1 1 1\n";
        let v = vocab();
        let t = glove_from_reader(
            text.as_bytes(),
            Path::new("g"),
            &v,
            3,
            &mut RngState::new(1),
        )
        .unwrap();
        assert_eq!(t.shape(), &[4, 3]);
        let hello = v.get("hello").unwrap();
        assert_eq!(&t.data()[hello * 3..hello * 3 + 3], &[0.1, 0.2, -0.3]);
        assert_eq!(&t.data()[..3], &[0.0; 3]);
        let world = v.get("world").unwrap();
        assert!(t.data()[world * 3..world * 3 + 3]
            .iter()
            .all(|x| x.abs() <= OOV_SCALE && *x != 0.0));
        let again = glove_from_reader(
            text.as_bytes(),
            Path::new("g"),
            &v,
            3,
            &mut RngState::new(1),
        )
        .unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let v = vocab();
        let err = glove_from_reader(
            "hello 1 2 3\nworld 1 2\n".as_bytes(),
            Path::new("g"),
            &v,
            3,
            &mut RngState::new(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = glove_from_reader(
            "hello 1 x 3\n".as_bytes(),
            Path::new("g"),
            &v,
            3,
            &mut RngState::new(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }
}
