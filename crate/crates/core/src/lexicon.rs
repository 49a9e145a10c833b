//! Word sets that parameterize the metrics.
//!
//! Word-set files are UTF-8, one token per line, `#` starts a comment line.
//! Pair lists hold `masculine,feminine` per line. Defaults for English and
//! (provisional) Hindi are compiled in; a data directory laid out as
//! `<dir>/<language>/<name>.txt` (or `.csv` for pair lists) overrides them.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingSpace;
use crate::rng::SplitMix64;
use crate::tokenize::normalize;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSetSpec {
    pub name: String,
    pub language: String,
    tokens: Vec<String>,
}

impl WordSetSpec {
    /// Normalizes and deduplicates (first occurrence wins).
    pub fn new<I, S>(name: impl Into<String>, language: impl Into<String>, tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in tokens {
            let t = normalize(t.as_ref().trim());
            if t.is_empty() {
                continue;
            }
            if t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidWordSet {
                    name,
                    message: format!("token {t:?} contains whitespace"),
                });
            }
            if seen.insert(t.clone()) {
                out.push(t);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidWordSet {
                name,
                message: "no tokens".into(),
            });
        }
        Ok(WordSetSpec {
            name,
            language: language.into(),
            tokens: out,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parse the word-set file format from a string.
pub fn parse_wordset(text: &str, name: &str, language: &str) -> Result<WordSetSpec> {
    let mut tokens = Vec::new();
    for (line, content) in content_lines(text) {
        if content.chars().any(char::is_whitespace) {
            return Err(Error::InvalidWordSet {
                name: name.to_string(),
                message: format!("line {line}: {content:?} is not a single token"),
            });
        }
        tokens.push(content);
    }
    WordSetSpec::new(name, language, tokens)
}

pub fn load_wordset(path: impl AsRef<Path>, name: &str, language: &str) -> Result<WordSetSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_wordset(&text, name, language)
}

/// A word set after lookup against one embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedWordSet {
    pub spec: WordSetSpec,
    pub found: Vec<String>,
    pub dropped: Vec<String>,
    #[serde(skip)]
    rows: Vec<usize>,
}

impl ResolvedWordSet {
    /// Row indices in the space the set was resolved against, parallel to
    /// `found`.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.found.len()
    }

    pub fn is_empty(&self) -> bool {
        self.found.is_empty()
    }
}

/// Partition `spec` into in-vocabulary and dropped tokens.
pub fn resolve(space: &EmbeddingSpace, spec: &WordSetSpec, min_size: usize) -> Result<ResolvedWordSet> {
    if min_size < 2 {
        return Err(Error::InvalidConfig(format!("min_size must be at least 2, got {min_size}")));
    }
    if spec.tokens.len() < min_size {
        return Err(Error::UnderResolved {
            name: spec.name.clone(),
            found: spec.tokens.len(),
            min_size,
            dropped: Vec::new(),
        });
    }
    let mut found = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for t in &spec.tokens {
        match space.row_of(t) {
            Some(r) => {
                found.push(t.clone());
                rows.push(r);
            }
            None => dropped.push(t.clone()),
        }
    }
    if !dropped.is_empty() {
        log::warn!(
            "word set {:?}: {} of {} tokens out of vocabulary: {}",
            spec.name,
            dropped.len(),
            spec.tokens.len(),
            dropped.join(", ")
        );
    }
    if found.len() < min_size {
        return Err(Error::UnderResolved {
            name: spec.name.clone(),
            found: found.len(),
            min_size,
            dropped,
        });
    }
    Ok(ResolvedWordSet {
        spec: spec.clone(),
        found,
        dropped,
        rows,
    })
}

/// Equalize the sizes of two resolved sets by sampling the larger one down
/// without replacement. Sampled tokens keep their original order.
pub fn balance(x: &ResolvedWordSet, y: &ResolvedWordSet, seed: u64) -> (ResolvedWordSet, ResolvedWordSet) {
    use std::cmp::Ordering::*;
    match x.len().cmp(&y.len()) {
        Equal => (x.clone(), y.clone()),
        Greater => (subsample(x, y.len(), seed), y.clone()),
        Less => (x.clone(), subsample(y, x.len(), seed)),
    }
}

fn subsample(set: &ResolvedWordSet, size: usize, seed: u64) -> ResolvedWordSet {
    let mut idx: Vec<usize> = (0..set.len()).collect();
    SplitMix64::new(seed).shuffle(&mut idx);
    let mut keep = idx[..size].to_vec();
    keep.sort_unstable();
    ResolvedWordSet {
        spec: set.spec.clone(),
        found: keep.iter().map(|&i| set.found[i].clone()).collect(),
        dropped: set.dropped.clone(),
        rows: keep.iter().map(|&i| set.rows[i]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderPairList {
    pub language: String,
    pairs: Vec<(String, String)>,
}

impl GenderPairList {
    pub fn new(language: impl Into<String>, pairs: Vec<(String, String)>) -> Result<Self> {
        let invalid = |message: String| Error::InvalidWordSet {
            name: "gender pairs".into(),
            message,
        };
        if pairs.is_empty() {
            return Err(invalid("no pairs".into()));
        }
        let pairs: Vec<(String, String)> = pairs
            .into_iter()
            .map(|(m, f)| (normalize(m.trim()), normalize(f.trim())))
            .collect();
        let masculine: HashSet<&str> = pairs.iter().map(|(m, _)| m.as_str()).collect();
        if let Some((_, f)) = pairs.iter().find(|(_, f)| masculine.contains(f.as_str())) {
            return Err(invalid(format!("{f:?} appears in both columns")));
        }
        if let Some((m, f)) = pairs.iter().find(|(m, f)| m.is_empty() || f.is_empty()) {
            return Err(invalid(format!("empty token in pair ({m:?}, {f:?})")));
        }
        Ok(GenderPairList {
            language: language.into(),
            pairs,
        })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }
}

pub fn parse_pairs(text: &str, language: &str) -> Result<GenderPairList> {
    let mut pairs = Vec::new();
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::InvalidWordSet {
                name: "gender pairs".into(),
                message: format!("line {line}: expected `masculine,feminine`, got {content:?}"),
            });
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    GenderPairList::new(language, pairs)
}

pub fn load_pairs(path: impl AsRef<Path>, language: &str) -> Result<GenderPairList> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text, language)
}

/// Compiled-in default data files, keyed by `(language, file name)`.
pub mod defaults {
    macro_rules! data {
        ($($lang:literal / $file:literal),* $(,)?) => {
            pub const FILES: &[(&str, &str, &str)] = &[
                $(($lang, $file, include_str!(concat!("../data/", $lang, "/", $file))),)*
            ];
        };
    }

    data!(
        "en" / "male.txt",
        "en" / "female.txt",
        "en" / "career.txt",
        "en" / "family.txt",
        "en" / "science.txt",
        "en" / "arts.txt",
        "en" / "strength.txt",
        "en" / "weakness.txt",
        "en" / "professions.txt",
        "en" / "tgbi_he.txt",
        "en" / "tgbi_she.txt",
        "en" / "gender_pairs.csv",
        "hi" / "male.txt",
        "hi" / "female.txt",
        "hi" / "career.txt",
        "hi" / "family.txt",
        "hi" / "tgbi_he.txt",
        "hi" / "tgbi_she.txt",
        "hi" / "gender_pairs.csv",
    );

    pub fn file(language: &str, file: &str) -> Option<&'static str> {
        FILES
            .iter()
            .find(|(l, f, _)| *l == language && *f == file)
            .map(|(_, _, text)| *text)
    }
}

/// Where named word sets come from.
#[derive(Debug, Clone, Default)]
pub struct DataSource {
    /// Directory overriding the compiled-in defaults, if any.
    pub dir: Option<std::path::PathBuf>,
}

impl DataSource {
    pub fn new(dir: Option<std::path::PathBuf>) -> Self {
        DataSource { dir }
    }

    fn read(&self, language: &str, file: &str) -> Result<String> {
        if let Some(dir) = &self.dir {
            let path = dir.join(language).join(file);
            if path.exists() {
                return fs::read_to_string(&path).map_err(|e| Error::io(&path, e));
            }
        }
        defaults::file(language, file)
            .map(str::to_string)
            .ok_or_else(|| Error::InvalidWordSet {
                name: file.to_string(),
                message: format!("no data file {file:?} for language {language:?}"),
            })
    }

    /// A word set by name, or by path when `name_or_path` names a file.
    pub fn wordset(&self, name_or_path: &str, language: &str) -> Result<WordSetSpec> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            let name = path.file_stem().map_or(name_or_path.into(), |s| s.to_string_lossy().into_owned());
            return load_wordset(path, &name, language);
        }
        let text = self.read(language, &format!("{name_or_path}.txt"))?;
        parse_wordset(&text, name_or_path, language)
    }

    pub fn pairs(&self, name_or_path: &str, language: &str) -> Result<GenderPairList> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            return load_pairs(path, language);
        }
        let text = self.read(language, &format!("{name_or_path}.csv"))?;
        parse_pairs(&text, language)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ZeroNormPolicy;

    fn space(tokens: &[&str]) -> EmbeddingSpace {
        EmbeddingSpace::from_rows(
            2,
            tokens.iter().enumerate().map(|(i, t)| (t.to_string(), vec![1.0, i as f64])),
            ZeroNormPolicy::Error,
        )
        .unwrap()
    }

    fn spec(tokens: &[&str]) -> WordSetSpec {
        WordSetSpec::new("s", "en", tokens).unwrap()
    }

    #[test]
    fn comments_and_dedup() {
        assert_eq!(parse_wordset("he\nhim\n# comment\nhis", "m", "en").unwrap().tokens(), ["he", "him", "his"]);
        assert_eq!(parse_wordset("He\nhe", "m", "en").unwrap().tokens(), ["he"]);
        assert_eq!(parse_wordset("\n  \nshe\n", "f", "en").unwrap().tokens(), ["she"]);
    }

    #[test]
    fn wordset_errors() {
        let err = parse_wordset("two words", "x", "en").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(parse_wordset("# only\n\n", "x", "en").is_err());
    }

    #[test]
    fn resolve_partitions() {
        let r = resolve(&space(&["a", "c"]), &spec(&["a", "b", "c"]), 2).unwrap();
        assert_eq!(r.found, ["a", "c"]);
        assert_eq!(r.dropped, ["b"]);
        assert_eq!(r.rows(), [0, 1]);
    }

    #[test]
    fn resolve_errors() {
        let err = resolve(&space(&["a"]), &spec(&["a", "b", "c"]), 2).unwrap_err();
        assert!(err.to_string().contains("resolved to 1 < 2"), "{err}");
        assert!(err.to_string().contains("b, c"), "{err}");
        assert!(matches!(
            resolve(&space(&["a"]), &spec(&["a"]), 2),
            Err(Error::UnderResolved { found: 1, .. })
        ));
        assert!(matches!(resolve(&space(&["a"]), &spec(&["a", "b"]), 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn balance_truncates_larger() {
        let s = space(&["x1", "x2", "x3", "x4", "x5", "y1", "y2", "y3"]);
        let x = resolve(&s, &spec(&["x1", "x2", "x3", "x4", "x5"]), 2).unwrap();
        let y = resolve(&s, &spec(&["y1", "y2", "y3"]), 2).unwrap();
        let (bx, by) = balance(&x, &y, 5);
        assert_eq!((bx.len(), by.len()), (3, 3));
        assert_eq!(by, y);
        assert!(bx.found.iter().all(|t| x.found.contains(t)));
        for (t, r) in bx.found.iter().zip(bx.rows()) {
            assert_eq!(s.row_of(t), Some(*r));
        }
        assert_eq!(balance(&x, &y, 5), (bx.clone(), by.clone()));
        let (by2, bx2) = balance(&y, &x, 5);
        assert_eq!((bx2, by2), (bx, by));
        assert_eq!(balance(&y, &y, 99), (y.clone(), y.clone()));
    }

    #[test]
    fn pairs_format() {
        let p = parse_pairs("# c\nhe,she\nHim,Her\n", "en").unwrap();
        assert_eq!(p.pairs(), [("he".into(), "she".into()), ("him".into(), "her".into())]);
        assert!(parse_pairs("he,she,it", "en").is_err());
        assert!(parse_pairs("he,she\nshe,he", "en").is_err());
        assert!(parse_pairs("", "en").is_err());
    }

    #[test]
    fn shipped_defaults_are_valid() {
        for (lang, file, text) in defaults::FILES {
            if file.ends_with(".csv") {
                parse_pairs(text, lang).unwrap_or_else(|e| panic!("{lang}/{file}: {e}"));
            } else {
                let s = parse_wordset(text, file, lang).unwrap_or_else(|e| panic!("{lang}/{file}: {e}"));
                assert!(s.tokens().len() >= 2, "{lang}/{file}");
            }
        }
        let src = DataSource::default();
        for lang in ["en", "hi"] {
            let he = src.wordset("tgbi_he", lang).unwrap();
            let she = src.wordset("tgbi_she", lang).unwrap();
            assert!(he.tokens().iter().all(|t| !she.tokens().contains(t)));
        }
        assert_eq!(
            src.wordset("male", "en").unwrap().tokens().len(),
            src.wordset("female", "en").unwrap().tokens().len()
        );
    }

    #[test]
    fn data_dir_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("en")).unwrap();
        std::fs::write(dir.path().join("en/male.txt"), "lad\nchap\n").unwrap();
        let src = DataSource::new(Some(dir.path().to_path_buf()));
        assert_eq!(src.wordset("male", "en").unwrap().tokens(), ["lad", "chap"]);
        assert!(src.wordset("female", "en").unwrap().tokens().contains(&"she".to_string()));
        assert!(src.wordset("nonexistent", "en").is_err());
    }
}
