//! Corpus ingestion, cleaning and deterministic train/test splitting.
//!
//! Tabular sources are UTF-8 comma-separated files with a header row
//! (RFC 4180 quoting). One text column is extracted per domain. The default
//! columns are:
//!
//! | domain          | column             |
//! |-----------------|--------------------|
//! | `news`          | `desc`             |
//! | `sports`        | `user_description` |
//! | `social_media`  | `body`             |
//! | `entertainment` | `text`             |
//!
//! Note on `sports`: in the Tokyo Olympics tweet dump, `user_description` is
//! normally the author's profile bio and `text` holds the tweet body. The
//! default keeps `user_description` as the designated source column; pass
//! `--column text` explicitly if the tweet body is what you want.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    News,
    Sports,
    SocialMedia,
    Entertainment,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::News,
        Domain::Sports,
        Domain::SocialMedia,
        Domain::Entertainment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::News => "news",
            Domain::Sports => "sports",
            Domain::SocialMedia => "social_media",
            Domain::Entertainment => "entertainment",
        }
    }

    pub fn default_column(self) -> &'static str {
        match self {
            Domain::News => "desc",
            Domain::Sports => "user_description",
            Domain::SocialMedia => "body",
            Domain::Entertainment => "text",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "news" => Ok(Domain::News),
            "sports" => Ok(Domain::Sports),
            "social_media" => Ok(Domain::SocialMedia),
            "entertainment" => Ok(Domain::Entertainment),
            other => Err(format!(
                "unknown domain {other:?}; expected one of news, sports, social_media, entertainment"
            )),
        }
    }
}

/// Cleaned documents of one domain. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainCorpus {
    pub domain: Domain,
    documents: Vec<String>,
    pub source_column: String,
    pub source_path: String,
}

impl DomainCorpus {
    /// Cleans every document and drops the ones that end up empty.
    pub fn new(
        domain: Domain,
        documents: impl IntoIterator<Item = String>,
        source_column: impl Into<String>,
        source_path: impl Into<String>,
    ) -> Self {
        let documents = documents
            .into_iter()
            .map(|d| clean(&d))
            .filter(|d| !d.is_empty())
            .collect();
        DomainCorpus {
            domain,
            documents,
            source_column: source_column.into(),
            source_path: source_path.into(),
        }
    }

    pub fn documents(&self) -> &[String] {
        &self.documents
    }

    pub fn record_count(&self) -> usize {
        self.documents.len()
    }
}

/// NFC-normalize, drop URL tokens and collapse whitespace.
///
/// A URL token is a whitespace-delimited token starting with `http://`,
/// `https://` or `www.` (ASCII case-insensitive).
pub fn clean(text: &str) -> String {
    let normalized: String = text.nfc().collect();
    let mut out = String::with_capacity(normalized.len());
    for token in normalized.split_whitespace() {
        if is_url(token) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

fn is_url(token: &str) -> bool {
    let head: String = token.chars().take(8).collect::<String>().to_ascii_lowercase();
    head.starts_with("http://") || head.starts_with("https://") || head.starts_with("www.")
}

/// Read one text column of a CSV file with a header row.
///
/// Rows whose cell is empty after [`clean`] are dropped. Row numbers in
/// errors are 1-based and count data rows (the header is row 0).
pub fn load_table(path: impl AsRef<Path>, column: &str, domain: Domain) -> Result<DomainCorpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            return Err(Error::NonUtf8 {
                path: path.to_path_buf(),
                line,
            });
        }
    };
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(path, 0, &e))?.clone();
    let available: Vec<String> = headers.iter().map(str::to_string).collect();
    let col = available
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn {
            column: column.to_string(),
            available: available.clone(),
        })?;

    let mut documents = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(path, i + 1, &e))?;
        documents.push(record.get(col).unwrap_or_default().to_string());
    }
    Ok(DomainCorpus::new(
        domain,
        documents,
        column,
        path.display().to_string(),
    ))
}

fn malformed(path: &Path, row: usize, err: &csv::Error) -> Error {
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        message,
    }
}

/// A train/test partition of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: DomainCorpus,
    pub test: DomainCorpus,
    pub ratio: f64,
    pub seed: u64,
    /// Original document index of each train document, in train order.
    pub train_indices: Vec<usize>,
    /// Original document index of each test document, in test order.
    pub test_indices: Vec<usize>,
}

/// Seeded shuffle-and-cut split.
///
/// Document indices `0..n` are shuffled with Fisher–Yates driven by
/// [`SplitMix64`] seeded with `seed`, then cut so the first
/// `floor(ratio * n)` shuffled indices form the train part.
pub fn split(corpus: &DomainCorpus, ratio: f64, seed: u64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::RatioOutOfRange(ratio));
    }
    let n = corpus.record_count();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let cut = train_size(n, ratio);
    let (train_idx, test_idx) = order.split_at(cut);

    let pick = |idx: &[usize]| DomainCorpus {
        domain: corpus.domain,
        documents: idx.iter().map(|&i| corpus.documents[i].clone()).collect(),
        source_column: corpus.source_column.clone(),
        source_path: corpus.source_path.clone(),
    };
    Ok(CorpusSplit {
        train: pick(train_idx),
        test: pick(test_idx),
        ratio,
        seed,
        train_indices: train_idx.to_vec(),
        test_indices: test_idx.to_vec(),
    })
}

/// `floor(ratio * n)`, evaluated in double precision.
pub fn train_size(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).floor() as usize
}

/// Sidecar metadata written next to every corpus interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub domain_id: Domain,
    pub source_path: String,
    pub source_column: String,
    pub record_count: usize,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    /// Original document indices, present on split outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_indices: Option<Vec<usize>>,
}

impl CorpusMetadata {
    pub fn for_corpus(corpus: &DomainCorpus) -> Self {
        CorpusMetadata {
            domain_id: corpus.domain,
            source_path: corpus.source_path.clone(),
            source_column: corpus.source_column.clone(),
            record_count: corpus.record_count(),
            seed: None,
            ratio: None,
            part: None,
            source_indices: None,
        }
    }

    pub fn for_split(split: &CorpusSplit, train: bool) -> Self {
        let (corpus, idx, part) = if train {
            (&split.train, &split.train_indices, "train")
        } else {
            (&split.test, &split.test_indices, "test")
        };
        CorpusMetadata {
            seed: Some(split.seed),
            ratio: Some(split.ratio),
            part: Some(part.to_string()),
            source_indices: Some(idx.clone()),
            ..CorpusMetadata::for_corpus(corpus)
        }
    }
}

/// `<corpus path>.meta.json`
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write the interchange file (one document per line, LF, no header) and its
/// JSON sidecar.
pub fn write_corpus(corpus: &DomainCorpus, meta: &CorpusMetadata, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in &corpus.documents {
        w.write_all(doc.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let meta_path = metadata_path(path);
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))
}

/// Read an interchange file. The sidecar is used when present; otherwise the
/// caller-provided domain is assumed.
pub fn read_corpus(path: &Path, fallback_domain: Domain) -> Result<(DomainCorpus, Option<CorpusMetadata>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::NonUtf8 {
        path: path.to_path_buf(),
        line: e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1,
    })?;
    let meta_path = metadata_path(path);
    let meta: Option<CorpusMetadata> = match fs::read_to_string(&meta_path) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&meta_path, e)),
    };
    let (domain, column, source) = match &meta {
        Some(m) => (m.domain_id, m.source_column.clone(), m.source_path.clone()),
        None => (fallback_domain, String::new(), path.display().to_string()),
    };
    let corpus = DomainCorpus::new(domain, text.lines().map(str::to_string), column, source);
    Ok((corpus, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(contents: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents).unwrap();
        f
    }

    fn corpus_of(n: usize) -> DomainCorpus {
        DomainCorpus::new(Domain::News, (0..n).map(|i| format!("doc {i}")), "desc", "mem")
    }

    #[test]
    fn clean_examples() {
        assert_eq!(clean("hello   world "), "hello world");
        assert_eq!(clean("see https://x.y now"), "see now");
        assert_eq!(clean("क्या  हाल"), "क्या हाल");
        assert_eq!(clean("visit WWW.example.com\tor HTTP://a.b"), "visit or");
        assert_eq!(clean("   "), "");
    }

    #[test]
    fn loads_column() {
        let f = write_tmp(b"id,desc\n1,hello\n2,world\n");
        let c = load_table(f.path(), "desc", Domain::News).unwrap();
        assert_eq!(c.documents(), ["hello", "world"]);
        assert_eq!(c.record_count(), 2);
    }

    #[test]
    fn drops_blank_cells_and_handles_quotes() {
        let f = write_tmp(b"id,desc\n1,\"a, quoted\ncell\"\n2,   \n3,\n4,x\n");
        let c = load_table(f.path(), "desc", Domain::News).unwrap();
        assert_eq!(c.documents(), ["a, quoted cell", "x"]);
    }

    #[test]
    fn missing_column_lists_available() {
        let f = write_tmp(b"id,desc\n1,hello\n");
        let err = load_table(f.path(), "body", Domain::News).unwrap_err();
        assert_eq!(err.to_string(), "column not found: body; available: id, desc");
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let f = write_tmp(b"id,desc\n1,a\n2,b,extra\n");
        match load_table(f.path(), "desc", Domain::News).unwrap_err() {
            Error::MalformedRow { row, .. } => assert_eq!(row, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_utf8_is_rejected() {
        let f = write_tmp(b"id,desc\n1,ok\n2,\xff\xfe\n");
        match load_table(f.path(), "desc", Domain::News).unwrap_err() {
            Error::NonUtf8 { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_table("/nonexistent/x.csv", "desc", Domain::News).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn split_sizes() {
        let s = split(&corpus_of(10), 0.8, 3).unwrap();
        assert_eq!((s.train.record_count(), s.test.record_count()), (8, 2));
        let s = split(&corpus_of(20_000), 0.8, 3).unwrap();
        assert_eq!((s.train.record_count(), s.test.record_count()), (16_000, 4_000));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split(&corpus_of(0), 0.8, 1), Err(Error::EmptyCorpus)));
        for r in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split(&corpus_of(3), r, 1), Err(Error::RatioOutOfRange(_))));
        }
    }

    #[test]
    fn interchange_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("news.txt");
        let c = corpus_of(5);
        let s = split(&c, 0.8, 11).unwrap();
        let meta = CorpusMetadata::for_split(&s, true);
        write_corpus(&s.train, &meta, &path).unwrap();
        let (back, meta_back) = read_corpus(&path, Domain::Sports).unwrap();
        assert_eq!(back, s.train);
        assert_eq!(meta_back.unwrap(), meta);
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.ends_with('\n') && !raw.contains('\r'));
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(t in "\\PC{0,40}") {
            let once = clean(&t);
            prop_assert_eq!(clean(&once), once);
        }

        #[test]
        fn split_partitions(n in 1usize..300, ratio in 0.01f64..0.99, seed in any::<u64>()) {
            let c = corpus_of(n);
            let s = split(&c, ratio, seed).unwrap();
            prop_assert_eq!(s.train.record_count(), (ratio * n as f64).floor() as usize);
            let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for (doc, &i) in s.train.documents().iter().zip(&s.train_indices) {
                prop_assert_eq!(doc, &c.documents()[i]);
            }
            prop_assert_eq!(split(&c, ratio, seed).unwrap(), s);
        }
    }
}
