//! Word-level text matching shared by synthesis and the mock planner.
//!
//! Utterances and object phrases are normalized the same way: punctuation
//! becomes a word break and everything is lowercased. A phrase matches when
//! its words appear contiguously in the utterance.

use crate::dsl::ObjectRef;

/// Words that never name a behavior on their own.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "my", "your", "our", "their", "his", "her", "its", "this", "that", "these", "those", "some",
    "to", "in", "into", "on", "onto", "of", "for", "with", "at", "by", "from", "up", "down", "and", "or", "it",
    "them", "me", "you", "i", "we", "please", "can", "could", "would", "will", "should", "next", "now", "then",
    "again", "also", "too", "all", "both", "each", "every", "is", "are", "be", "do", "just", "while", "so",
    "how", "about", "what", "there", "here", "make", "kids", "s",
];

const DETERMINERS: &[&str] = &["the", "a", "an", "my", "your", "our", "their", "his", "her", "this", "that", "some"];

/// Splits on anything that is not alphanumeric, keeping the original case.
pub fn raw_words(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect()
}

pub fn words(text: &str) -> Vec<String> {
    raw_words(text).into_iter().map(str::to_lowercase).collect()
}

/// Crude suffix stripper, enough to equate `packing`/`pack` and `releases`/`release`.
pub fn stem(word: &str) -> String {
    let mut w = word.to_lowercase();
    for suffix in ["ing", "ed", "es", "s"] {
        if w.len() > suffix.len() + 2 && w.ends_with(suffix) {
            w.truncate(w.len() - suffix.len());
            break;
        }
    }
    if w.len() > 3 && w.ends_with('e') {
        w.pop();
    }
    let b = w.as_bytes();
    if b.len() > 3 && b[b.len() - 1] == b[b.len() - 2] && !b"aeiou".contains(&b[b.len() - 1]) {
        w.pop();
    }
    w
}

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

pub fn is_determiner(word: &str) -> bool {
    DETERMINERS.contains(&word.to_lowercase().as_str())
}

/// An object mention spanning `len` words starting at word `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub id: String,
    pub start: usize,
    pub len: usize,
}

fn phrases(object: &ObjectRef) -> impl Iterator<Item = Vec<String>> + '_ {
    std::iter::once(object.display_name.as_str())
        .chain(object.aliases.iter().map(String::as_str))
        .map(words)
        .filter(|w| !w.is_empty())
}

/// Left-to-right, longest-first, non-overlapping object mentions.
pub fn find_mentions<'a>(words: &[String], objects: impl IntoIterator<Item = &'a ObjectRef>) -> Vec<Mention> {
    let table: Vec<(&str, Vec<String>)> =
        objects.into_iter().flat_map(|o| phrases(o).map(move |p| (o.id.as_str(), p))).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let best = table
            .iter()
            .filter(|(_, p)| words[i..].starts_with(p))
            .max_by_key(|(_, p)| p.len());
        match best {
            Some((id, p)) => {
                out.push(Mention { id: id.to_string(), start: i, len: p.len() });
                i += p.len();
            }
            None => i += 1,
        }
    }
    out
}

/// Distinct mentioned ids in order of first mention.
pub fn mentioned_ids<'a>(text: &str, objects: impl IntoIterator<Item = &'a ObjectRef>) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for m in find_mentions(&words(text), objects) {
        if !ids.contains(&m.id) {
            ids.push(m.id);
        }
    }
    ids
}

/// Content words of `text` outside any object mention, stemmed.
pub fn content_stems<'a>(text: &str, objects: impl IntoIterator<Item = &'a ObjectRef>) -> Vec<String> {
    let ws = words(text);
    let mentions = find_mentions(&ws, objects);
    let in_mention = |i: usize| mentions.iter().any(|m| i >= m.start && i < m.start + m.len);
    let mut out: Vec<String> = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        if in_mention(i) || is_stopword(w) || w.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        let s = stem(w);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}
