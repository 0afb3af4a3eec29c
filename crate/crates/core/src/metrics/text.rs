//! Description statistics: length, Gunning Fog complexity, vocabulary size.
//!
//! Syllables are counted as contiguous vowel groups (`y` counts as a vowel),
//! minus one for a trailing silent `e` (but not `-le`), with a minimum of one.
//! Words of three or more syllables are complex.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grounding::tokenize;

pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut prev = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = letters.len();
    let silent_e = letters[n - 1] == 'e' && !(n >= 2 && letters[n - 2] == 'l');
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?'])
        .filter(|s| !tokenize(s).is_empty())
        .count()
        .max(1)
}

/// `0.4 * (words / sentences + 100 * complex_words / words)`; 0 for no words.
pub fn gunning_fog(text: &str) -> f64 {
    let words = tokenize(text);
    if words.is_empty() {
        return 0.0;
    }
    let complex = words.iter().filter(|w| count_syllables(w) >= 3).count();
    let n = words.len() as f64;
    0.4 * (n / sentence_count(text) as f64 + 100.0 * complex as f64 / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TextStats {
    pub samples: usize,
    pub avg_length: f64,
    pub gunning_fog: f64,
    pub unique_words_per_sample: f64,
}

/// Averages over labels, one label per sample.
pub fn text_stats<S: AsRef<str>>(labels: &[S]) -> TextStats {
    if labels.is_empty() {
        return TextStats::default();
    }
    let n = labels.len() as f64;
    let mut length = 0.0;
    let mut fog = 0.0;
    let mut unique = 0.0;
    for label in labels {
        let toks = tokenize(label.as_ref());
        length += toks.len() as f64;
        fog += gunning_fog(label.as_ref());
        unique += toks.iter().collect::<BTreeSet<_>>().len() as f64;
    }
    TextStats {
        samples: labels.len(),
        avg_length: length / n,
        gunning_fog: fog / n,
        unique_words_per_sample: unique / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Easy,
    Medium,
    Hard,
}

impl Complexity {
    pub const ALL: [Complexity; 3] = [Complexity::Easy, Complexity::Medium, Complexity::Hard];

    /// Fog up to 4 is easy, up to 8 medium, above 8 hard.
    pub fn from_fog(fog: f64) -> Self {
        if fog <= 4.0 {
            Complexity::Easy
        } else if fog <= 8.0 {
            Complexity::Medium
        } else {
            Complexity::Hard
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Complexity::Easy => "easy",
            Complexity::Medium => "medium",
            Complexity::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthBucket {
    Phrase,
    ShortSentence,
    LongSentence,
}

impl LengthBucket {
    pub const ALL: [LengthBucket; 3] = [
        LengthBucket::Phrase,
        LengthBucket::ShortSentence,
        LengthBucket::LongSentence,
    ];

    /// Up to 8 words is a phrase, up to 15 a short sentence.
    pub fn from_words(words: usize) -> Self {
        match words {
            0..=8 => LengthBucket::Phrase,
            9..=15 => LengthBucket::ShortSentence,
            _ => LengthBucket::LongSentence,
        }
    }
}

impl fmt::Display for LengthBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LengthBucket::Phrase => "phrase",
            LengthBucket::ShortSentence => "short_sentence",
            LengthBucket::LongSentence => "long_sentence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionBuckets {
    pub words: usize,
    pub fog: f64,
    pub complexity: Complexity,
    pub length: LengthBucket,
}

pub fn bucket_descriptions<S: AsRef<str>>(labels: &[S]) -> Vec<DescriptionBuckets> {
    labels
        .iter()
        .map(|l| {
            let words = tokenize(l.as_ref()).len();
            let fog = gunning_fog(l.as_ref());
            DescriptionBuckets {
                words,
                fog,
                complexity: Complexity::from_fog(fog),
                length: LengthBucket::from_words(words),
            }
        })
        .collect()
}

/// Counts per (complexity, length) cell, all nine cells present.
pub fn bucket_histogram(buckets: &[DescriptionBuckets]) -> BTreeMap<(Complexity, LengthBucket), usize> {
    let mut out = BTreeMap::new();
    for c in Complexity::ALL {
        for l in LengthBucket::ALL {
            out.insert((c, l), 0);
        }
    }
    for b in buckets {
        *out.entry((b.complexity, b.length)).or_default() += 1;
    }
    out
}
