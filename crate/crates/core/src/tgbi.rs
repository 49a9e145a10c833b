//! Translation Gender Bias Index.
//!
//! Translations of gender-neutral source sentences are classified as he,
//! she or neutral. Per set of sentences:
//!
//! ```text
//! P_i   = sqrt(p_he · p_she + p_neutral)
//! index = mean_i P_i
//! ```
//!
//! Both lie in `[0, 1]`. A set scores 1 when every translation stays
//! neutral, 0.5 when he and she split evenly with nothing neutral, and 0 when
//! one gender takes everything. The formula follows Cho et al. (2019), who
//! introduced the index.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lexicon::WordSetSpec;
use crate::numeric::fsum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderClass {
    He,
    She,
    Neutral,
}

/// Disjoint he/she lexicons.
#[derive(Debug, Clone)]
pub struct GenderLexicon {
    he: HashSet<String>,
    she: HashSet<String>,
}

impl GenderLexicon {
    pub fn new(he: &WordSetSpec, she: &WordSetSpec) -> Result<Self> {
        let he: HashSet<String> = he.tokens().iter().cloned().collect();
        let she: HashSet<String> = she.tokens().iter().cloned().collect();
        let mut overlap: Vec<String> = he.intersection(&she).cloned().collect();
        if !overlap.is_empty() {
            overlap.sort();
            return Err(Error::OverlappingLexicons(overlap));
        }
        Ok(GenderLexicon { he, she })
    }

    /// First lexicon hit decides; `both_present` reports sentences that
    /// also contain a token from the other lexicon.
    pub fn classify<S: AsRef<str>>(&self, tokens: &[S]) -> Classification {
        let mut class = GenderClass::Neutral;
        let mut saw_he = false;
        let mut saw_she = false;
        for t in tokens {
            let t = t.as_ref();
            if self.he.contains(t) {
                saw_he = true;
                if class == GenderClass::Neutral {
                    class = GenderClass::He;
                }
            } else if self.she.contains(t) {
                saw_she = true;
                if class == GenderClass::Neutral {
                    class = GenderClass::She;
                }
            }
        }
        Classification {
            class,
            both_present: saw_he && saw_she,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub class: GenderClass,
    pub both_present: bool,
}

pub fn classify_sentence<S: AsRef<str>>(tokens: &[S], lexicon: &GenderLexicon) -> GenderClass {
    lexicon.classify(tokens).class
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderClassCounts {
    pub set_id: String,
    pub n_he: u64,
    pub n_she: u64,
    pub n_neutral: u64,
    /// Sentences containing both he and she lexicon tokens (diagnostic).
    #[serde(default)]
    pub both_present: u64,
}

impl GenderClassCounts {
    pub fn new(set_id: impl Into<String>, n_he: u64, n_she: u64, n_neutral: u64) -> Self {
        GenderClassCounts {
            set_id: set_id.into(),
            n_he,
            n_she,
            n_neutral,
            both_present: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_he + self.n_she + self.n_neutral
    }

    /// `(p_he, p_she, p_neutral)`.
    pub fn proportions(&self) -> Result<(f64, f64, f64)> {
        let total = self.total();
        if total == 0 {
            return Err(Error::ZeroTotal(self.set_id.clone()));
        }
        let t = total as f64;
        Ok((self.n_he as f64 / t, self.n_she as f64 / t, self.n_neutral as f64 / t))
    }

    pub fn record(&mut self, c: Classification) {
        match c.class {
            GenderClass::He => self.n_he += 1,
            GenderClass::She => self.n_she += 1,
            GenderClass::Neutral => self.n_neutral += 1,
        }
        self.both_present += u64::from(c.both_present);
    }
}

pub fn set_score(counts: &GenderClassCounts) -> Result<f64> {
    let (he, she, neutral) = counts.proportions()?;
    Ok((he * she + neutral).sqrt().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    pub set_id: String,
    pub p_he: f64,
    pub p_she: f64,
    pub p_neutral: f64,
    pub score: f64,
    pub both_present: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgbiResult {
    pub per_set: Vec<SetScore>,
    pub index: f64,
}

pub fn tgbi(sets: &[GenderClassCounts]) -> Result<TgbiResult> {
    if sets.is_empty() {
        return Err(Error::NoSets);
    }
    let per_set = sets
        .iter()
        .map(|c| {
            let (p_he, p_she, p_neutral) = c.proportions()?;
            Ok(SetScore {
                set_id: c.set_id.clone(),
                p_he,
                p_she,
                p_neutral,
                score: set_score(c)?,
                both_present: c.both_present,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = fsum(per_set.iter().map(|s| s.score)) / per_set.len() as f64;
    Ok(TgbiResult {
        per_set,
        index: index.clamp(0.0, 1.0),
    })
}

/// Read counts from CSV with header `set_id,n_he,n_she,n_neutral`.
pub fn load_counts(path: impl AsRef<Path>) -> Result<Vec<GenderClassCounts>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["set_id", "n_he", "n_she", "n_neutral"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<(String, u64, u64, u64)>().enumerate() {
        let (set_id, he, she, neutral) = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(GenderClassCounts::new(set_id, he, she, neutral));
    }
    Ok(out)
}

/// Sentence-set manifest: set id → 1-based inclusive line ranges into the
/// sentence file, e.g. `{"occupations": [[1, 50]], "adjectives": [[51, 80]]}`.
pub type Manifest = BTreeMap<String, Vec<[usize; 2]>>;

/// Classify each sentence (one per element of `sentences`) and tally by set.
/// Sets come out in manifest key order.
pub fn count_sentences<S: AsRef<str>>(
    sentences: &[S],
    manifest: &Manifest,
    lexicon: &GenderLexicon,
) -> Result<Vec<GenderClassCounts>> {
    let mut out = Vec::with_capacity(manifest.len());
    for (set_id, ranges) in manifest {
        let mut counts = GenderClassCounts::new(set_id.clone(), 0, 0, 0);
        for &[start, end] in ranges {
            if start == 0 || start > end || end > sentences.len() {
                return Err(Error::InvalidConfig(format!(
                    "set {set_id:?}: range [{start}, {end}] outside 1..={}",
                    sentences.len()
                )));
            }
            for s in &sentences[start - 1..end] {
                let tokens = crate::tokenize::tokenize(s.as_ref()).tokens;
                counts.record(lexicon.classify(&tokens));
            }
        }
        out.push(counts);
    }
    Ok(out)
}
