//! Tweet cleaning and tokenization.
//!
//! URLs, @-mentions and emoji are removed, then the text is split on
//! whitespace with punctuation runs and clitics (`'m`, `n't`, ...) as
//! separate tokens. Tokenizing the space-joined output of [`tokenize`]
//! reproduces the same tokens.

use std::sync::LazyLock;

use regex::Regex;

/// Tweets with fewer tokens are dropped.
pub const MIN_TOKENS: usize = 4;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b[a-z][a-z0-9+.\-]*://\S*|\bwww\.\S*").expect("url regex"));
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|[^\w@])@\w+").expect("mention regex"));

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF   // symbols, pictographs, emoticons, transport, flags
        | 0x2600..=0x27BF   // misc symbols, dingbats
        | 0x2300..=0x23FF   // misc technical (watch, hourglass, ...)
        | 0x2B00..=0x2BFF   // arrows, stars
        | 0xFE00..=0xFE0F   // variation selectors
        | 0x200D            // zero-width joiner
        | 0x20E3            // combining keycap
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0xE0020..=0xE007F // tag sequences
    )
}

/// Removes URLs, mentions and emoji, leaving spaces in their place.
pub fn strip_noise(text: &str) -> String {
    let no_url = URL.replace_all(text, " ");
    let no_mention = MENTION.replace_all(&no_url, "$1 ");
    no_mention.chars().map(|c| if is_emoji(c) { ' ' } else { c }).collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn word_starts(chars: &[char], i: usize) -> bool {
    let next_alnum = chars.get(i + 1).is_some_and(|c| c.is_alphanumeric());
    match chars[i] {
        '\'' | '#' => next_alnum,
        c => is_word_char(c),
    }
}

/// Splits a word at internal apostrophes: `I'm` → `I`, `'m`; `don't` → `do`, `n't`.
fn split_clitics(word: &str, out: &mut Vec<String>) {
    let mut pieces: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, c) in word.chars().enumerate() {
        if c == '\'' && i > 0 {
            pieces.push(std::mem::take(&mut cur));
        }
        cur.push(c);
    }
    pieces.push(cur);
    for i in 0..pieces.len().saturating_sub(1) {
        if pieces[i + 1].eq_ignore_ascii_case("'t") && pieces[i].to_ascii_lowercase().ends_with('n') {
            let n = pieces[i].pop().expect("ends with n");
            pieces[i + 1].insert(0, n);
        }
    }
    out.extend(pieces.into_iter().filter(|p| !p.is_empty()));
}

/// Whitespace tokenization with punctuation runs split off.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c }).collect();
        let mut i = 0;
        while i < chars.len() {
            let start = i;
            if word_starts(&chars, i) {
                i += 1;
                while i < chars.len() {
                    let c = chars[i];
                    let joins = (c == '\'' || c == '-') && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                    if is_word_char(c) || joins {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word: String = chars[start..i].iter().collect();
                split_clitics(&word, &mut tokens);
            } else {
                while i < chars.len() && !word_starts(&chars, i) {
                    i += 1;
                }
                tokens.push(chars[start..i].iter().collect());
            }
        }
    }
    tokens
}

/// Cleans and tokenizes a tweet; `None` when fewer than [`MIN_TOKENS`] remain.
pub fn preprocess_tweet(text: &str) -> Option<Vec<String>> {
    let tokens = tokenize(&strip_noise(text));
    (tokens.len() >= MIN_TOKENS).then_some(tokens)
}
