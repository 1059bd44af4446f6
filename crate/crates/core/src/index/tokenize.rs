use serde::{Deserialize, Serialize};

/// A token and its character (not byte) offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub text: String,
    pub start_offset: usize,
    pub end_offset: usize,
}

pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<TokenSpan>;
}

/// Splits on Unicode whitespace, then at every boundary between
/// alphanumeric and non-alphanumeric characters. Adjacent punctuation stays
/// together, so `"..."` is one token.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunctTokenizer;

impl Tokenizer for WordPunctTokenizer {
    fn tokenize(&self, text: &str) -> Vec<TokenSpan> {
        tokenize(text)
    }
}

pub fn tokenize(text: &str) -> Vec<TokenSpan> {
    let mut tokens = Vec::new();
    // (class, start char, start byte)
    let mut current: Option<(bool, usize, usize)> = None;
    let mut char_pos = 0;
    for (byte_pos, c) in text.char_indices() {
        let class = if c.is_whitespace() {
            None
        } else {
            Some(c.is_alphanumeric())
        };
        match (current, class) {
            (Some((cls, _, _)), Some(next)) if cls == next => {}
            (open, next) => {
                if let Some((_, start, start_byte)) = open {
                    tokens.push(TokenSpan {
                        text: text[start_byte..byte_pos].to_string(),
                        start_offset: start,
                        end_offset: char_pos,
                    });
                }
                current = next.map(|cls| (cls, char_pos, byte_pos));
            }
        }
        char_pos += 1;
    }
    if let Some((_, start, start_byte)) = current {
        tokens.push(TokenSpan {
            text: text[start_byte..].to_string(),
            start_offset: start,
            end_offset: char_pos,
        });
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[TokenSpan]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(
            texts(&tokenize("CT-guided biopsy.")),
            ["CT", "-", "guided", "biopsy", "."]
        );
        assert_eq!(
            texts(&tokenize("18G needle, (T2)...")),
            ["18G", "needle", ",", "(", "T2", ")..."]
        );
    }

    #[test]
    fn empty_and_blank_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \n\t ").is_empty());
    }

    #[test]
    fn offsets_count_characters() {
        let toks = tokenize("Kienböck disease");
        assert_eq!(toks[0].start_offset, 0);
        assert_eq!(toks[0].end_offset, 8);
        assert_eq!(toks[1].start_offset, 9);
    }

    proptest! {
        #[test]
        fn offsets_increase_and_reconstruct(text in "\\PC{0,80}") {
            let chars: Vec<char> = text.chars().collect();
            let tokens = tokenize(&text);
            let mut prev_end = 0;
            for t in &tokens {
                prop_assert!(t.start_offset < t.end_offset);
                prop_assert!(t.start_offset >= prev_end);
                prop_assert!(t.end_offset <= chars.len());
                let slice: String = chars[t.start_offset..t.end_offset].iter().collect();
                prop_assert_eq!(&slice, &t.text);
                // only whitespace between consecutive tokens
                prop_assert!(chars[prev_end..t.start_offset].iter().all(|c| c.is_whitespace()));
                prev_end = t.end_offset;
            }
            prop_assert!(chars[prev_end..].iter().all(|c| c.is_whitespace()));
        }
    }
}
