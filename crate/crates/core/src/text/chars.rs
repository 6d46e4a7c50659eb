/// The classic 70-symbol quantisation alphabet without the newline. `-`
/// appears twice, as in the original list, so slot 60 is never produced.
/// `a` has index 1; unknown characters and padding are 0.
pub const ALPHABET: &str =
    "abcdefghijklmnopqrstuvwxyz0123456789-,;.!?:'\"/\\|_@#$%^&*~`+-=<>()[]{}";

fn index_of(c: char) -> usize {
    let c = c.to_lowercase().next().unwrap_or(c);
    ALPHABET.chars().position(|a| a == c).map_or(0, |i| i + 1)
}

/// One alphabet index per character, padded with 0 or truncated to
/// `length`.
pub fn quantize_chars(s: &str, length: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = s.chars().take(length).map(index_of).collect();
    ids.resize(length, 0);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_has_69_slots() {
        let mut seen: Vec<char> = ALPHABET.chars().collect();
        assert_eq!(seen.len(), 69);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 68);
        assert_eq!(quantize_chars("-", 1), vec![37]);
    }

    #[test]
    fn quantization() {
        let q = quantize_chars("ab", 1014);
        assert_eq!(q.len(), 1014);
        assert_eq!(&q[..3], &[1, 2, 0]);
        assert_eq!(quantize_chars("Ab", 5), quantize_chars("ab", 5));
        assert_eq!(quantize_chars("é}", 2), vec![0, 69]);
        assert_eq!(quantize_chars(&"z".repeat(2000), 1014), vec![26; 1014]);
    }
}
