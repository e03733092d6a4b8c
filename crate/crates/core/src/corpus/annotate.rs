use std::collections::BTreeSet;

use super::{Snippet, SpanRef};

/// Length-preserving case folding: each character maps to the first
/// character of its lowercase form.
pub fn fold_case(text: &str) -> Vec<char> {
    text.chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect()
}

/// Finds every token-aligned, case-insensitive occurrence of any synonym.
///
/// A span `(i, j)` is reported when some synonym matches the snippet text
/// starting exactly at token `i` and ending exactly at the end of token
/// `j`. Results are ordered by snippet, then start, then end; a span found
/// by several synonyms is reported once.
pub fn annotate_spans(snippets: &[Snippet], synonyms: &[String]) -> Vec<SpanRef> {
    let needles: Vec<Vec<char>> = synonyms
        .iter()
        .map(|s| fold_case(s.trim()))
        .filter(|s| !s.is_empty())
        .collect();
    let mut out = Vec::new();
    for snippet in snippets {
        let hay = fold_case(&snippet.text);
        let mut found = BTreeSet::new();
        for (i, start_tok) in snippet.tokens.iter().enumerate() {
            let begin = start_tok.char_begin;
            for needle in &needles {
                let end = begin + needle.len();
                if end > hay.len() || hay[begin..end] != needle[..] {
                    continue;
                }
                if let Some(j) = snippet.tokens[i..]
                    .iter()
                    .position(|t| t.char_end == end)
                    .map(|offset| i + offset)
                {
                    found.insert((i, j));
                }
            }
        }
        out.extend(found.into_iter().map(|(i, j)| SpanRef {
            snippet_id: snippet.id.clone(),
            token_start: i,
            token_end: j,
        }));
    }
    out
}
