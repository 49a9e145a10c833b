//! Normalization and word-level tokenization for mixed Latin/Devanagari text.

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

const ZWNJ: char = '\u{200C}';
const ZWJ: char = '\u{200D}';

/// Script class assigned to a token by majority codepoint class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    Latin,
    Devanagari,
    Digit,
    Other,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptHistogram {
    pub latin: usize,
    pub devanagari: usize,
    pub digit: usize,
    pub other: usize,
}

impl ScriptHistogram {
    fn add(&mut self, script: Script) {
        match script {
            Script::Latin => self.latin += 1,
            Script::Devanagari => self.devanagari += 1,
            Script::Digit => self.digit += 1,
            Script::Other => self.other += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub script_histogram: ScriptHistogram,
}

pub fn is_devanagari(c: char) -> bool {
    matches!(c, '\u{0900}'..='\u{097F}' | '\u{A8E0}'..='\u{A8FF}')
}

fn is_latin_letter(c: char) -> bool {
    c.is_alphabetic()
        && matches!(c,
            'A'..='Z' | 'a'..='z'
            | '\u{00C0}'..='\u{024F}'
            | '\u{1E00}'..='\u{1EFF}'
            | '\u{2C60}'..='\u{2C7F}'
            | '\u{A720}'..='\u{A7FF}')
}

fn char_script(c: char) -> Script {
    if is_devanagari(c) {
        // Devanagari digits count as Devanagari, which keeps Hindi numerals
        // with the script they are written in.
        Script::Devanagari
    } else if c.is_numeric() {
        Script::Digit
    } else if is_latin_letter(c) {
        Script::Latin
    } else {
        Script::Other
    }
}

/// Majority class of the token's codepoints; ties resolve in declaration
/// order (latin, devanagari, digit, other).
pub fn token_script(token: &str) -> Script {
    let mut counts = [0usize; 4];
    for c in token.chars() {
        counts[char_script(c) as usize] += 1;
    }
    let order = [Script::Latin, Script::Devanagari, Script::Digit, Script::Other];
    let mut best = Script::Other;
    let mut best_count = 0;
    for s in order {
        if counts[s as usize] > best_count {
            best = s;
            best_count = counts[s as usize];
        }
    }
    best
}

pub fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    ) || c == '\u{0964}'
        || c == '\u{0965}'
}

/// NFC, lowercase, and drop zero-width (non-)joiners that are not inside a
/// Devanagari run. A joiner is inside a run when the nearest non-joiner
/// characters on both sides are Devanagari.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let is_joiner = |c: char| c == ZWJ || c == ZWNJ;
    let mut kept = String::with_capacity(lowered.len());
    for (i, &c) in chars.iter().enumerate() {
        if is_joiner(c) {
            let before = chars[..i].iter().rev().find(|&&p| !is_joiner(p));
            let after = chars[i + 1..].iter().find(|&&n| !is_joiner(n));
            let inside = matches!((before, after), (Some(&b), Some(&a)) if is_devanagari(b) && is_devanagari(a));
            if !inside {
                continue;
            }
        }
        kept.push(c);
    }
    let mut out: String = kept.nfc().collect();
    // Re-lowercasing after composition keeps the function idempotent for the
    // rare compositions that produce a cased letter.
    if out.chars().any(char::is_uppercase) {
        out = out.to_lowercase().nfc().collect();
    }
    out
}

fn strip_punctuation(word: &str) -> &str {
    word.trim_matches(is_punctuation)
}

/// Split normalized text into word tokens.
///
/// Whitespace separates words; Latin-majority words are further split on
/// hyphens; leading and trailing punctuation is stripped and tokens that
/// are only punctuation disappear.
pub fn tokenize(text: &str) -> TokenStream {
    let normalized = normalize(text);
    let mut stream = TokenStream::default();
    for word in normalized.split_whitespace() {
        let pieces: Vec<&str> = if token_script(word) == Script::Latin {
            word.split(['-', '\u{2010}']).collect()
        } else {
            vec![word]
        };
        for piece in pieces {
            let token = strip_punctuation(piece);
            if token.is_empty() {
                continue;
            }
            stream.script_histogram.add(token_script(token));
            stream.tokens.push(token.to_string());
        }
    }
    stream
}
