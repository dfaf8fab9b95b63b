use serde::{Deserialize, Serialize};

/// A window of whitespace tokens, addressed by byte offsets into the node text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkedText {
    pub source_node: usize,
    pub chunks: Vec<ChunkSpan>,
}

/// Byte spans of the whitespace-separated tokens of `text`.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Consecutive non-overlapping windows of `window` tokens; the last one may be
/// shorter. Whitespace-only text yields no chunks.
pub fn chunk_text(text: &str, window: usize) -> Vec<ChunkSpan> {
    assert!(window >= 1, "chunk window must be positive");
    token_spans(text)
        .chunks(window)
        .map(|toks| ChunkSpan {
            start: toks[0].0,
            end: toks[toks.len() - 1].1,
            tokens: toks.len(),
        })
        .collect()
}

impl ChunkedText {
    pub fn from_text(source_node: usize, text: &str, window: usize) -> Self {
        Self {
            source_node,
            chunks: chunk_text(text, window),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventy_tokens_into_three_chunks() {
        let text = (0..70).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let c = chunk_text(&text, 32);
        assert_eq!(c.iter().map(|c| c.tokens).collect::<Vec<_>>(), vec![32, 32, 6]);
    }

    #[test]
    fn single_token_and_padding() {
        let c = chunk_text("  hello  ", 32);
        assert_eq!(c, vec![ChunkSpan { start: 2, end: 7, tokens: 1 }]);
        assert!(chunk_text(" \t\n ", 4).is_empty());
    }

    proptest! {
        #[test]
        fn spans_are_ordered_and_cover_tokens(words in proptest::collection::vec("[a-zé]{1,6}", 0..60), gaps in proptest::collection::vec(" {1,3}|\t|\n", 60), window in 1usize..10) {
            let mut text = String::from(" ");
            for (w, g) in words.iter().zip(gaps.iter()) {
                text.push_str(w);
                text.push_str(g);
            }
            let chunks = chunk_text(&text, window);
            let mut covered = Vec::new();
            let mut prev_end = 0;
            for c in &chunks {
                prop_assert!(c.start >= prev_end && c.start < c.end);
                prop_assert!(c.tokens >= 1 && c.tokens <= window);
                prev_end = c.end;
                covered.extend(text[c.start..c.end].split_whitespace().map(str::to_string));
            }
            let all: Vec<String> = text.split_whitespace().map(str::to_string).collect();
            prop_assert_eq!(covered, all);
        }
    }
}
