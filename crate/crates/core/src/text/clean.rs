//! Tweet normalisation.
//!
//! `strip_noise` removes URLs, @mentions, emoticons, emoji and control
//! characters, lowercases, and collapses whitespace; it is what the
//! character model sees. `clean_text` additionally drops apostrophes,
//! replaces every other non-alphanumeric character with a space (so `#tag`
//! keeps `tag`) and removes stop-words; it feeds the word model.
//!
//! ASCII emoticons are recognised only as whole whitespace-delimited
//! tokens, case-insensitively:
//!
//! | pattern | examples |
//! |---|---|
//! | eyes, optional nose, mouth | `:)` `:-(` `;p` `=D` `:'(` `8)` `:/` `:3` `:*` `:o` |
//! | mirrored | `(:` `):` `(-:` |
//! | hearts | `<3` `<33` `</3` |
//! | laughing | `xd` `xddd` |
//! | kaomoji | `^_^` `^^` `-_-` `o_o` `t_t` |
//!
//! Emoji are removed by Unicode property: `Extended_Pictographic`, other
//! symbols (`So`), skin-tone modifiers, regional indicators, variation
//! selectors, the zero-width joiner and the keycap combiner.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static EMOTICON: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)^(?:
            [:;=8]['\-^o]?[)(\]\[dpo/\\|3*$@s]+
          | [)(\]\[][\-'^]?[:;=]
          | <\/?3+
          | x+d+
          | \^_*\^ | -_+- | o_o | t_t
        )$",
    )
    .unwrap()
});
static EMOJI: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{Extended_Pictographic}\p{So}\p{Emoji_Modifier}\p{Regional_Indicator}\u{FE0E}\u{FE0F}\u{200D}\u{20E3}]")
        .unwrap()
});

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// True for a whole token that is an ASCII emoticon.
pub fn is_emoticon(token: &str) -> bool {
    EMOTICON.is_match(token)
}

/// Lowercased text with URLs, mentions, emoticons, emoji and control
/// characters removed and whitespace collapsed. Punctuation survives.
pub fn strip_noise(s: &str) -> String {
    let s = EMOJI.replace_all(s, " ");
    let s: String = s
        .chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect();
    let s = URL.replace_all(&s, " ");
    let s = MENTION.replace_all(&s, " ");
    let kept: Vec<&str> = s.split_whitespace().filter(|t| !is_emoticon(t)).collect();
    kept.join(" ").to_lowercase()
}

/// Word-model normalisation; see the module docs.
pub fn clean_text(s: &str, stopwords: &StopWords) -> String {
    let s = strip_noise(s);
    let s: String = s
        .chars()
        .filter(|&c| c != '\'' && c != '\u{2019}')
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    s.split_whitespace()
        .filter(|t| !stopwords.contains(t) && !is_emoticon(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whitespace split of an already cleaned string.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// A stop-word set. Entries are normalised the same way tokens are, so a
/// list containing `don't` also matches the cleaned token `dont`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
    source: String,
}

impl StopWords {
    /// Parses one word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase().replace(['\'', '\u{2019}'], ""))
            .collect();
        Self {
            words,
            source: text.to_string(),
        }
    }

    /// The shipped English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        let text: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        Self::parse(&text.join("\n"))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sorted word list.
    pub fn words(&self) -> Vec<String> {
        let mut w: Vec<String> = self.words.iter().cloned().collect();
        w.sort();
        w
    }

    /// The text the set was parsed from, for hashing.
    pub fn source(&self) -> &str {
        &self.source
    }
}
