//! Declarative descriptions of the three classifier architectures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{conv_output_len, BiLstmMode, BiLstmParams, ConvParams, DenseParams};
use crate::tensor::Activation;

pub const CLASS_COUNT: usize = 5;
pub const EMBED_DIM: usize = 100;
pub const ALPHABET_SIZE: usize = 69;
pub const CHAR_LENGTH: usize = 1014;
pub const DEFAULT_WORD_LENGTH: usize = 100;
/// Embedding rows implied by a 2,706,400-parameter, 100-d embedding layer.
pub const REFERENCE_VOCAB: usize = 27_064;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Word,
    Char,
    Combined,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Word => "word",
            ModelKind::Char => "char",
            ModelKind::Combined => "combined",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(ModelKind::Word),
            "char" => Ok(ModelKind::Char),
            "combined" => Ok(ModelKind::Combined),
            other => Err(Error::Config(format!(
                "unknown model kind `{other}` (expected word, char or combined)"
            ))),
        }
    }
}

/// GloVe embedding → BiLSTM → dense ReLU → softmax output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordConfig {
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub dense: usize,
    pub classes: usize,
    /// Token sequence length fed to the network. No parameter depends on it.
    pub seq_len: usize,
}

impl Default for WordConfig {
    fn default() -> Self {
        Self {
            vocab: REFERENCE_VOCAB,
            embed_dim: EMBED_DIM,
            hidden: 512,
            dense: 32,
            classes: CLASS_COUNT,
            seq_len: DEFAULT_WORD_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub kernel: usize,
    /// Max-pool window applied after the convolution, if any.
    pub pool: Option<usize>,
}

/// One-hot characters → conv/pool stack → dense layers → softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharConfig {
    pub alphabet: usize,
    pub length: usize,
    pub filters: usize,
    pub stride: usize,
    pub stages: Vec<ConvStage>,
    /// Widths of the ReLU dense layers following the flatten, each
    /// followed by dropout.
    pub dense: Vec<usize>,
    pub dropout: f64,
    /// Width of the last hidden dense layer before the output.
    pub bottleneck: usize,
    pub classes: usize,
}

impl Default for CharConfig {
    fn default() -> Self {
        let stage = |kernel, pool| ConvStage { kernel, pool };
        Self {
            alphabet: ALPHABET_SIZE,
            length: CHAR_LENGTH,
            filters: 256,
            stride: 1,
            stages: vec![
                stage(7, Some(3)),
                stage(7, Some(3)),
                stage(3, None),
                stage(3, None),
                stage(3, None),
                stage(3, Some(3)),
            ],
            dense: vec![1024, 1024],
            dropout: 0.5,
            bottleneck: 32,
            classes: CLASS_COUNT,
        }
    }
}

impl CharConfig {
    /// `(length, channels)` after the conv/pool stack.
    pub fn feature_shape(&self) -> Result<(usize, usize)> {
        let mut len = self.length;
        for (i, s) in self.stages.iter().enumerate() {
            len = conv_output_len(len, s.kernel, self.stride).ok_or_else(|| {
                Error::Config(format!(
                    "conv stage {} with kernel {} does not fit length {len}",
                    i + 1,
                    s.kernel
                ))
            })?;
            if let Some(w) = s.pool {
                if w == 0 || len < w {
                    return Err(Error::Config(format!(
                        "pool window {w} after stage {} does not fit length {len}",
                        i + 1
                    )));
                }
                len /= w;
            }
        }
        Ok((len, self.filters))
    }
}

/// Word branch (embedding, BiLSTM stack with residual skips, BiLSTM head)
/// and char branch (conv stack, optional dense layers, BiLSTM head),
/// concatenated into a small dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedConfig {
    pub word: WordConfig,
    pub char: CharConfig,
    /// Number of residual BiLSTM blocks in the word branch.
    pub residual_blocks: usize,
    /// When true the word model's own BiLSTM (input `embed_dim`, output
    /// `2·hidden`) feeds the residual stack and every block uses an
    /// identity skip. When false the first block reads the embeddings
    /// directly and uses a dense projection shortcut.
    pub entry_bilstm: bool,
    /// Keep the char model's 1024-wide dense layers in the char branch;
    /// their output is fed to the branch BiLSTM as a length-1 sequence.
    pub char_dense: bool,
    /// Hidden units of the BiLSTM closing each branch.
    pub branch_hidden: usize,
    pub head: usize,
    pub classes: usize,
}

impl Default for CombinedConfig {
    fn default() -> Self {
        Self {
            word: WordConfig::default(),
            char: CharConfig::default(),
            residual_blocks: 4,
            entry_bilstm: true,
            char_dense: true,
            branch_hidden: 64,
            head: 32,
            classes: CLASS_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Word(WordConfig),
    Char(CharConfig),
    Combined(CombinedConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Word(_) => ModelKind::Word,
            ModelConfig::Char(_) => ModelKind::Char,
            ModelConfig::Combined(_) => ModelKind::Combined,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Word => ModelConfig::Word(WordConfig::default()),
            ModelKind::Char => ModelConfig::Char(CharConfig::default()),
            ModelKind::Combined => ModelConfig::Combined(CombinedConfig::default()),
        }
    }

    /// Word sequence length, when the model reads words.
    pub fn word_length(&self) -> Option<usize> {
        match self {
            ModelConfig::Word(w) => Some(w.seq_len),
            ModelConfig::Combined(c) => Some(c.word.seq_len),
            ModelConfig::Char(_) => None,
        }
    }

    /// Character sequence length, when the model reads characters.
    pub fn char_length(&self) -> Option<usize> {
        match self {
            ModelConfig::Char(c) => Some(c.length),
            ModelConfig::Combined(c) => Some(c.char.length),
            ModelConfig::Word(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Embedding {
        vocab: usize,
        dim: usize,
    },
    OneHot {
        depth: usize,
    },
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    },
    MaxPool1d {
        window: usize,
    },
    Flatten,
    /// `batch × d` → `batch × 1 × d`.
    AsSequence,
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
    BiLstm {
        input: usize,
        hidden: usize,
        mode: BiLstmMode,
    },
    /// Sequence-mode BiLSTM plus a skip connection from its input.
    ResidualBiLstm {
        input: usize,
        hidden: usize,
        projection: bool,
    },
}

impl Layer {
    pub fn parameter_count(&self) -> usize {
        match *self {
            Layer::Embedding { vocab, dim } => vocab * dim,
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => ConvParams::parameter_count(in_ch, out_ch, kernel),
            Layer::Dense { input, output, .. } => DenseParams::parameter_count(input, output),
            Layer::BiLstm { input, hidden, .. } => BiLstmParams::parameter_count(input, hidden),
            Layer::ResidualBiLstm {
                input,
                hidden,
                projection,
            } => {
                BiLstmParams::parameter_count(input, hidden)
                    + if projection {
                        DenseParams::parameter_count(input, 2 * hidden)
                    } else {
                        0
                    }
            }
            Layer::OneHot { .. }
            | Layer::MaxPool1d { .. }
            | Layer::Flatten
            | Layer::AsSequence
            | Layer::Dropout { .. } => 0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Layer::Embedding { vocab, dim } => format!("Embedding({vocab}x{dim})"),
            Layer::OneHot { depth } => format!("OneHot({depth})"),
            Layer::Conv1d {
                out_ch,
                kernel,
                stride,
                ..
            } => format!("Conv1d({out_ch}, k{kernel}, s{stride}) + ReLU"),
            Layer::MaxPool1d { window } => format!("MaxPool1d({window})"),
            Layer::Flatten => "Flatten".into(),
            Layer::AsSequence => "AsSequence".into(),
            Layer::Dense {
                input,
                output,
                activation,
            } => format!("Dense({input}->{output}, {activation:?})"),
            Layer::Dropout { rate } => format!("Dropout({rate})"),
            Layer::BiLstm { hidden, mode, .. } => format!("BiLSTM({hidden}, {mode:?})"),
            Layer::ResidualBiLstm {
                hidden, projection, ..
            } => {
                if *projection {
                    format!("Residual BiLSTM({hidden}) + projection")
                } else {
                    format!("Residual BiLSTM({hidden})")
                }
            }
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: &str| {
            Err(Error::Shape {
                op: "ModelSpec",
                msg: format!("{} cannot take input {input:?}: {why}", self.label()),
            })
        };
        match (self, input) {
            (Layer::Embedding { dim, .. }, [len]) => Ok(vec![*len, *dim]),
            (Layer::OneHot { depth }, [len]) => Ok(vec![*len, *depth]),
            (
                Layer::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    ..
                },
                [len, ch],
            ) if ch == in_ch => match conv_output_len(*len, *kernel, *stride) {
                Some(l) => Ok(vec![l, *out_ch]),
                None => bad("sequence shorter than kernel"),
            },
            (Layer::MaxPool1d { window }, [len, ch]) if *len >= *window && *window > 0 => {
                Ok(vec![len / window, *ch])
            }
            (Layer::Flatten, [len, ch]) => Ok(vec![len * ch]),
            (Layer::AsSequence, [d]) => Ok(vec![1, *d]),
            (
                Layer::Dense {
                    input: i, output, ..
                },
                [.., last],
            ) if last == i => {
                let mut s = input.to_vec();
                *s.last_mut().unwrap() = *output;
                Ok(s)
            }
            (Layer::Dropout { .. }, s) => Ok(s.to_vec()),
            (
                Layer::BiLstm {
                    input: i,
                    hidden,
                    mode,
                },
                [len, d],
            ) if d == i && *len > 0 => Ok(match mode {
                BiLstmMode::Sequence => vec![*len, 2 * hidden],
                BiLstmMode::Final => vec![2 * hidden],
            }),
            (
                Layer::ResidualBiLstm {
                    input: i,
                    hidden,
                    projection,
                },
                [len, d],
            ) if d == i && (*projection || *i == 2 * hidden) => Ok(vec![*len, 2 * hidden]),
            _ => bad("shape mismatch"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub name: String,
    pub layer: Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Words,
    Chars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub name: String,
    pub source: Source,
    /// Fixed input length, or `None` when the branch is length-agnostic.
    pub input_len: Option<usize>,
    pub layers: Vec<LayerDesc>,
}

/// A model is one or more branches whose (flat) outputs are concatenated
/// and fed to the head. The head's last layer is the softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub config: ModelConfig,
    pub branches: Vec<Branch>,
    pub head: Vec<LayerDesc>,
}

fn desc(name: impl Into<String>, layer: Layer) -> LayerDesc {
    LayerDesc {
        name: name.into(),
        layer,
    }
}

fn relu_dense(input: usize, output: usize) -> Layer {
    Layer::Dense {
        input,
        output,
        activation: Activation::Relu,
    }
}

fn softmax_dense(input: usize, output: usize) -> Layer {
    Layer::Dense {
        input,
        output,
        activation: Activation::Softmax,
    }
}

fn conv_stack(cfg: &CharConfig, prefix: &str) -> Vec<LayerDesc> {
    let mut layers = vec![desc(
        format!("{prefix}.onehot"),
        Layer::OneHot {
            depth: cfg.alphabet,
        },
    )];
    let mut in_ch = cfg.alphabet;
    let mut pools = 0;
    for (i, stage) in cfg.stages.iter().enumerate() {
        layers.push(desc(
            format!("{prefix}.conv{}", i + 1),
            Layer::Conv1d {
                in_ch,
                out_ch: cfg.filters,
                kernel: stage.kernel,
                stride: cfg.stride,
                activation: Activation::Relu,
            },
        ));
        in_ch = cfg.filters;
        if let Some(window) = stage.pool {
            pools += 1;
            layers.push(desc(
                format!("{prefix}.pool{pools}"),
                Layer::MaxPool1d { window },
            ));
        }
    }
    layers
}

/// Flatten followed by the ReLU dense + dropout pairs.
fn char_dense_stack(cfg: &CharConfig, prefix: &str, flat: usize) -> (Vec<LayerDesc>, usize) {
    let mut layers = vec![desc(format!("{prefix}.flatten"), Layer::Flatten)];
    let mut width = flat;
    for (i, &out) in cfg.dense.iter().enumerate() {
        layers.push(desc(
            format!("{prefix}.dense{}", i + 1),
            relu_dense(width, out),
        ));
        layers.push(desc(
            format!("{prefix}.dropout{}", i + 1),
            Layer::Dropout { rate: cfg.dropout },
        ));
        width = out;
    }
    (layers, width)
}

impl ModelSpec {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let spec = match &config {
            ModelConfig::Word(w) => Self::word_layout(w, config.clone()),
            ModelConfig::Char(c) => Self::char_layout(c, config.clone())?,
            ModelConfig::Combined(c) => Self::combined_layout(c, config.clone())?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn word(cfg: WordConfig) -> Result<Self> {
        Self::new(ModelConfig::Word(cfg))
    }

    pub fn char(cfg: CharConfig) -> Result<Self> {
        Self::new(ModelConfig::Char(cfg))
    }

    pub fn combined(cfg: CombinedConfig) -> Result<Self> {
        Self::new(ModelConfig::Combined(cfg))
    }

    fn word_layout(w: &WordConfig, config: ModelConfig) -> Self {
        let branch = Branch {
            name: "word".into(),
            source: Source::Words,
            input_len: None,
            layers: vec![
                desc(
                    "word.embedding",
                    Layer::Embedding {
                        vocab: w.vocab,
                        dim: w.embed_dim,
                    },
                ),
                desc(
                    "word.bilstm",
                    Layer::BiLstm {
                        input: w.embed_dim,
                        hidden: w.hidden,
                        mode: BiLstmMode::Final,
                    },
                ),
            ],
        };
        Self {
            config,
            branches: vec![branch],
            head: vec![
                desc("head.dense", relu_dense(2 * w.hidden, w.dense)),
                desc("head.output", softmax_dense(w.dense, w.classes)),
            ],
        }
    }

    fn char_layout(c: &CharConfig, config: ModelConfig) -> Result<Self> {
        let (len, ch) = c.feature_shape()?;
        let mut layers = conv_stack(c, "char");
        let (dense, width) = char_dense_stack(c, "char", len * ch);
        layers.extend(dense);
        Ok(Self {
            config,
            branches: vec![Branch {
                name: "char".into(),
                source: Source::Chars,
                input_len: Some(c.length),
                layers,
            }],
            head: vec![
                desc("head.dense", relu_dense(width, c.bottleneck)),
                desc("head.output", softmax_dense(c.bottleneck, c.classes)),
            ],
        })
    }

    fn combined_layout(c: &CombinedConfig, config: ModelConfig) -> Result<Self> {
        let w = &c.word;
        let seq_width = 2 * w.hidden;
        let mut word = vec![desc(
            "word.embedding",
            Layer::Embedding {
                vocab: w.vocab,
                dim: w.embed_dim,
            },
        )];
        let mut width = w.embed_dim;
        if c.entry_bilstm {
            word.push(desc(
                "word.bilstm",
                Layer::BiLstm {
                    input: width,
                    hidden: w.hidden,
                    mode: BiLstmMode::Sequence,
                },
            ));
            width = seq_width;
        }
        for i in 0..c.residual_blocks {
            word.push(desc(
                format!("word.res{}", i + 1),
                Layer::ResidualBiLstm {
                    input: width,
                    hidden: w.hidden,
                    projection: width != seq_width,
                },
            ));
            width = seq_width;
        }
        word.push(desc(
            "word.bilstm_out",
            Layer::BiLstm {
                input: width,
                hidden: c.branch_hidden,
                mode: BiLstmMode::Final,
            },
        ));

        let (len, ch) = c.char.feature_shape()?;
        let mut chars = conv_stack(&c.char, "char");
        let char_input = if c.char_dense {
            let (dense, width) = char_dense_stack(&c.char, "char", len * ch);
            chars.extend(dense);
            chars.push(desc("char.as_sequence", Layer::AsSequence));
            width
        } else {
            ch
        };
        chars.push(desc(
            "char.bilstm_out",
            Layer::BiLstm {
                input: char_input,
                hidden: c.branch_hidden,
                mode: BiLstmMode::Final,
            },
        ));

        Ok(Self {
            config,
            branches: vec![
                Branch {
                    name: "word".into(),
                    source: Source::Words,
                    input_len: None,
                    layers: word,
                },
                Branch {
                    name: "char".into(),
                    source: Source::Chars,
                    input_len: Some(c.char.length),
                    layers: chars,
                },
            ],
            head: vec![
                desc("head.dense", relu_dense(4 * c.branch_hidden, c.head)),
                desc("head.output", softmax_dense(c.head, c.classes)),
            ],
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    pub fn classes(&self) -> usize {
        match self.head.last().map(|d| &d.layer) {
            Some(Layer::Dense { output, .. }) => *output,
            _ => 0,
        }
    }

    /// All layers, branches first (in order) then the head.
    pub fn layers(&self) -> impl Iterator<Item = &LayerDesc> {
        self.branches
            .iter()
            .flat_map(|b| b.layers.iter())
            .chain(self.head.iter())
    }

    /// Checks that per-sample shapes chain through every branch and the
    /// head, and that softmax appears only on the final layer.
    pub fn validate(&self) -> Result<()> {
        let mut merged = 0;
        for b in &self.branches {
            let probe_len = b.input_len.unwrap_or(3);
            let mut shape = vec![probe_len];
            for (i, d) in b.layers.iter().enumerate() {
                let first = i == 0;
                let reads_ids = matches!(d.layer, Layer::Embedding { .. } | Layer::OneHot { .. });
                if first != reads_ids {
                    return Err(Error::Config(format!(
                        "branch `{}`: only the first layer may read ids ({})",
                        b.name, d.name
                    )));
                }
                shape = d.layer.output_shape(&shape)?;
            }
            match shape[..] {
                [d] => merged += d,
                _ => {
                    return Err(Error::Config(format!(
                        "branch `{}` must end in a flat vector, got {shape:?}",
                        b.name
                    )))
                }
            }
        }
        let mut shape = vec![merged];
        for (i, d) in self.head.iter().enumerate() {
            shape = d.layer.output_shape(&shape)?;
            let is_softmax = matches!(
                d.layer,
                Layer::Dense {
                    activation: Activation::Softmax,
                    ..
                }
            );
            if is_softmax != (i + 1 == self.head.len()) {
                return Err(Error::Config(
                    "the head must end in exactly one softmax dense layer".into(),
                ));
            }
        }
        Ok(())
    }

    /// Per-sample shape after each layer, for one input length per source.
    pub fn trace_shapes(&self, word_len: usize) -> Result<Vec<(String, Vec<usize>)>> {
        let mut out = Vec::new();
        let mut merged = 0;
        for b in &self.branches {
            let mut shape = vec![b.input_len.unwrap_or(word_len)];
            out.push((format!("{}.input", b.name), shape.clone()));
            for d in &b.layers {
                shape = d.layer.output_shape(&shape)?;
                out.push((d.name.clone(), shape.clone()));
            }
            merged += shape.iter().product::<usize>();
        }
        let mut shape = vec![merged];
        for d in &self.head {
            shape = d.layer.output_shape(&shape)?;
            out.push((d.name.clone(), shape.clone()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamRow {
    pub layer: String,
    pub kind: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamTable {
    pub rows: Vec<ParamRow>,
    pub total: usize,
}

impl ParamTable {
    /// Counts of the layers that own parameters, in order.
    pub fn trainable_counts(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.count)
            .filter(|&c| c > 0)
            .collect()
    }

    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.layer.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let kind_width = self
            .rows
            .iter()
            .map(|r| r.kind.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut s = format!(
            "{:<width$}  {:<kind_width$}  {:>12}\n",
            "layer", "kind", "params"
        );
        for r in &self.rows {
            s += &format!(
                "{:<width$}  {:<kind_width$}  {:>12}\n",
                r.layer,
                r.kind,
                group_thousands(r.count)
            );
        }
        s += &format!(
            "{:<width$}  {:<kind_width$}  {:>12}\n",
            "total",
            "",
            group_thousands(self.total)
        );
        s
    }
}

pub fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Exact per-layer and total trainable parameter counts.
pub fn count_parameters(spec: &ModelSpec) -> ParamTable {
    let rows: Vec<ParamRow> = spec
        .layers()
        .map(|d| ParamRow {
            layer: d.name.clone(),
            kind: d.layer.label(),
            count: d.layer.parameter_count(),
        })
        .collect();
    let total = rows.iter().map(|r| r.count).sum();
    ParamTable { rows, total }
}
