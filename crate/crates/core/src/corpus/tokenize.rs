use super::Token;

/// Characters split off the edges of whitespace-delimited chunks.
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{00ab}' | '\u{00bb}'
                | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00bf}' | '\u{00a1}'
        )
}

/// Whitespace tokenizer that detaches leading and trailing punctuation.
///
/// Each leading or trailing punctuation character becomes its own token;
/// punctuation inside a chunk (`don't`, `U.S.A`) stays attached. Offsets
/// are character offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    while lo < end && is_punctuation(chars[lo]) {
        out.push(token(chars, lo, lo + 1));
        lo += 1;
    }
    if lo == end {
        return;
    }
    let mut hi = end;
    while hi > lo && is_punctuation(chars[hi - 1]) {
        hi -= 1;
    }
    out.push(token(chars, lo, hi));
    for p in hi..end {
        out.push(token(chars, p, p + 1));
    }
}

fn token(chars: &[char], start: usize, end: usize) -> Token {
    Token {
        text: chars[start..end].iter().collect(),
        char_start: start,
        char_end: end,
    }
}
