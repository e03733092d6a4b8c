use super::Token;

const PEELED: &[char] = &[
    '.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}', '"', '\'', '/',
];

fn is_peeled(c: char) -> bool {
    PEELED.contains(&c)
}

/// Splits on whitespace, then peels leading and trailing punctuation off
/// each chunk as single-character tokens. Offsets are character offsets
/// into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        if chars[pos].is_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        while pos < chars.len() && !chars[pos].is_whitespace() {
            pos += 1;
        }
        split_chunk(&chars, start, pos, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], mut begin: usize, mut end: usize, out: &mut Vec<Token>) {
    while begin < end && is_peeled(chars[begin]) {
        out.push(make_token(chars, begin, begin + 1));
        begin += 1;
    }
    let mut trailing = Vec::new();
    while end > begin && is_peeled(chars[end - 1]) {
        trailing.push(make_token(chars, end - 1, end));
        end -= 1;
    }
    if begin < end {
        out.push(make_token(chars, begin, end));
    }
    out.extend(trailing.into_iter().rev());
}

fn make_token(chars: &[char], begin: usize, end: usize) -> Token {
    Token {
        text: chars[begin..end].iter().collect(),
        char_begin: begin,
        char_end: end,
    }
}
