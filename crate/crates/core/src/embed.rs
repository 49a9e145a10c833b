//! In-memory embedding spaces, cosine similarity and the text interchange
//! formats.
//!
//! word2vec text: the first line is `<V> <m>`, followed by `V` lines of
//! `<token> <c1> ... <cm>`, single-space separated, LF line endings, UTF-8.
//! GloVe text is the same without the header line; `m` is inferred from the
//! first row.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Domain;
use crate::tokenize::normalize;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFormat {
    Word2vecText,
    GloveText,
}

impl FromStr for VectorFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "word2vec_text" | "word2vec" => Ok(VectorFormat::Word2vecText),
            "glove_text" | "glove" => Ok(VectorFormat::GloveText),
            other => Err(format!("unknown vector format {other:?}")),
        }
    }
}

/// What to do with zero-norm vectors when building a space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ZeroNormPolicy {
    #[default]
    Error,
    /// Drop the token and log a warning.
    WarnAndDrop,
}

/// Token → vector map with a fixed dimension. Vectors are stored row-major
/// in double precision; norms are cached.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
    pub language: String,
    pub domain: Option<Domain>,
    pub source: String,
}

impl PartialEq for EmbeddingSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.tokens == other.tokens
            && self.data == other.data
            && self.language == other.language
            && self.domain == other.domain
            && self.source == other.source
    }
}

fn check_token(token: &str) -> std::result::Result<(), String> {
    if token.is_empty() {
        Err("empty token".to_string())
    } else if token.chars().any(char::is_whitespace) {
        Err(format!("token {token:?} contains whitespace"))
    } else {
        Ok(())
    }
}

impl EmbeddingSpace {
    /// Build a space from `(token, vector)` rows. Rows keep their given
    /// order. An empty row list yields an empty space, which every metric
    /// and [`save_vectors`] reject.
    pub fn from_rows<I>(dim: usize, rows: I, policy: ZeroNormPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        let mut space = EmbeddingSpace {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            norms: Vec::new(),
            language: String::new(),
            domain: None,
            source: String::new(),
        };
        for (token, vector) in rows {
            space.push(token, vector, policy)?;
        }
        Ok(space)
    }

    fn push(&mut self, token: String, vector: Vec<f64>, policy: ZeroNormPolicy) -> Result<()> {
        check_token(&token).map_err(Error::InvalidSpace)?;
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSpace(format!(
                "non-finite component {bad} for token {token:?}"
            )));
        }
        if self.index.contains_key(&token) {
            return Err(Error::InvalidSpace(format!("duplicate token {token:?}")));
        }
        let norm = squared_norm(&vector).sqrt();
        if !norm.is_finite() {
            return Err(Error::InvalidSpace(format!("norm of {token:?} overflows")));
        }
        if norm == 0.0 {
            match policy {
                ZeroNormPolicy::Error => return Err(Error::ZeroNorm { token: Some(token) }),
                ZeroNormPolicy::WarnAndDrop => {
                    log::warn!("dropping zero-norm vector for token {token:?}");
                    return Ok(());
                }
            }
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(&vector);
        self.norms.push(norm);
        Ok(())
    }

    pub fn with_tags(mut self, language: impl Into<String>, domain: Option<Domain>, source: impl Into<String>) -> Self {
        self.language = language.into();
        self.domain = domain;
        self.source = source.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// Row index of `token` after [`normalize`]. Falls back to the verbatim
    /// token so spaces with mixed-case vocabularies stay reachable.
    pub fn row_of(&self, token: &str) -> Option<usize> {
        self.index
            .get(normalize(token).as_str())
            .or_else(|| self.index.get(token))
            .copied()
    }

    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.row_of(token).map(|i| self.row(i))
    }

    /// Cosine between two rows, using cached norms.
    pub fn cosine_rows(&self, i: usize, j: usize) -> f64 {
        let dot = dot(self.row(i), self.row(j));
        (dot / (self.norms[i] * self.norms[j])).clamp(-1.0, 1.0)
    }

    /// Copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let rows = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), self.row(i).iter().map(|v| v * factor).collect()));
        Ok(EmbeddingSpace::from_rows(self.dim, rows, ZeroNormPolicy::Error)?.with_tags(
            self.language.clone(),
            self.domain,
            self.source.clone(),
        ))
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum()
}

/// `x·y / (‖x‖‖y‖)`, clamped to `[-1, 1]`.
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let nx = squared_norm(x).sqrt();
    let ny = squared_norm(y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroNorm { token: None });
    }
    Ok((dot(x, y) / (nx * ny)).clamp(-1.0, 1.0))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split([' ', '\t']).filter(|f| !f.is_empty())
}

/// Parse an embedding file already in memory. `origin` is used in errors.
pub fn parse_vectors(text: &str, format: VectorFormat, policy: ZeroNormPolicy, origin: &Path) -> Result<EmbeddingSpace> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let mut expected: Option<(usize, usize)> = None;
    if format == VectorFormat::Word2vecText {
        let (no, header) = lines.next().ok_or_else(|| parse_err(1, "missing header line".into()))?;
        let fields: Vec<&str> = split_fields(header).collect();
        if fields.len() != 2 {
            return Err(parse_err(no, format!("header must be `<V> <m>`, got {header:?}")));
        }
        let v = fields[0]
            .parse::<usize>()
            .map_err(|_| parse_err(no, format!("bad vocabulary size {:?}", fields[0])))?;
        let m = fields[1]
            .parse::<usize>()
            .map_err(|_| parse_err(no, format!("bad dimension {:?}", fields[1])))?;
        if v == 0 {
            return Err(parse_err(no, "header declares zero vectors".into()));
        }
        if m == 0 {
            return Err(parse_err(no, "header declares zero dimension".into()));
        }
        expected = Some((v, m));
    }

    let mut dim = expected.map(|(_, m)| m);
    let mut rows = Vec::new();
    for (no, line) in lines {
        let mut fields = split_fields(line);
        let token = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                let v = f
                    .parse::<f64>()
                    .map_err(|_| parse_err(no, format!("non-numeric component {f:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(no, format!("non-finite component {f:?}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = *dim.get_or_insert(values.len());
        if m == 0 {
            return Err(parse_err(no, "row has no components".into()));
        }
        if values.len() != m {
            return Err(parse_err(
                no,
                format!("inconsistent dimension: expected {m}, found {}", values.len()),
            ));
        }
        rows.push((no, token, values));
    }

    if let Some((v, _)) = expected {
        if rows.len() != v {
            return Err(parse_err(
                rows.last().map_or(1, |r| r.0),
                format!("expected {v} vectors, found {}", rows.len()),
            ));
        }
    }
    let Some(dim) = dim else {
        return Err(parse_err(1, "no vectors".into()));
    };

    let mut space = EmbeddingSpace::from_rows(dim, std::iter::empty(), policy)?;
    for (no, token, values) in rows {
        space.push(token, values, policy).map_err(|e| parse_err(no, e.to_string()))?;
    }
    if space.is_empty() {
        return Err(parse_err(1, "every vector was dropped".into()));
    }
    space.source = origin.display().to_string();
    Ok(space)
}

pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat, policy: ZeroNormPolicy) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::NonUtf8 {
        path: path.to_path_buf(),
        line: e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1,
    })?;
    parse_vectors(&text, format, policy, path)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_component(v: f64, out: &mut String) {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        write!(out, "{v}").unwrap();
    } else {
        write!(out, "{v:e}").unwrap();
    }
}

/// Serialize as word2vec text with tokens in codepoint order.
pub fn write_vectors<W: Write>(space: &EmbeddingSpace, mut w: W) -> std::io::Result<()> {
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by(|&a, &b| space.tokens[a].cmp(&space.tokens[b]));
    writeln!(w, "{} {}", space.len(), space.dim)?;
    let mut line = String::new();
    for i in order {
        line.clear();
        line.push_str(&space.tokens[i]);
        for &v in space.row(i) {
            line.push(' ');
            format_component(v, &mut line);
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn save_vectors(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if space.is_empty() {
        return Err(Error::InvalidSpace("refusing to write a space with V=0".into()));
    }
    for t in &space.tokens {
        check_token(t).map_err(Error::InvalidSpace)?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_vectors(space, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, format: VectorFormat) -> Result<EmbeddingSpace> {
        parse_vectors(text, format, ZeroNormPolicy::Error, Path::new("mem"))
    }

    fn space(rows: &[(&str, &[f64])]) -> EmbeddingSpace {
        let dim = rows[0].1.len();
        EmbeddingSpace::from_rows(dim, rows.iter().map(|(t, v)| (t.to_string(), v.to_vec())), ZeroNormPolicy::Error).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 0.7071067811865475);
        assert!(matches!(cosine(&[1.0, 0.0], &[0.0, 0.0]), Err(Error::ZeroNorm { .. })));
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cosine_clamps() {
        let x = [0.1, 0.2, 0.3];
        let c = cosine(&x, &x).unwrap();
        assert!(c <= 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(cosine(&x, &neg).unwrap() >= -1.0);
    }

    #[test]
    fn word2vec_header() {
        let s = parse("2 3\na 1 0 0\nb 0 1 0", VectorFormat::Word2vecText).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        let err = parse("2 3\na 1 0 0", VectorFormat::Word2vecText).unwrap_err();
        assert!(err.to_string().contains("expected 2 vectors, found 1"), "{err}");
    }

    #[test]
    fn glove_infers_dimension() {
        let s = parse("a 1 0\nb 0 1", VectorFormat::GloveText).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse("a 1 0\nb 0 1 2\n", VectorFormat::GloveText).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("2 2\na 1 0\na 0 1\n", VectorFormat::Word2vecText).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = parse("a 1 x\n", VectorFormat::GloveText).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
        let err = parse("a 1 NaN\n", VectorFormat::GloveText).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
        let err = parse("1 2\na 1 0\nb 0 1\n", VectorFormat::Word2vecText).unwrap_err();
        assert!(err.to_string().contains("expected 1 vectors, found 2"), "{err}");
    }

    #[test]
    fn zero_norm_policy() {
        let text = "a 0 0\nb 0 1\n";
        assert!(parse(text, VectorFormat::GloveText).is_err());
        let s = parse_vectors(text, VectorFormat::GloveText, ZeroNormPolicy::WarnAndDrop, Path::new("mem")).unwrap();
        assert_eq!(s.tokens(), ["b"]);
    }

    #[test]
    fn trailing_space_and_crlf_tolerated() {
        let s = parse("1 2\r\nа 0.5 -0.25 \r\n", VectorFormat::Word2vecText).unwrap();
        assert_eq!(s.row(0), [0.5, -0.25]);
    }

    #[test]
    fn lookup_normalizes() {
        let s = space(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert_eq!(s.lookup("a"), Some(&[1.0, 0.0][..]));
        assert_eq!(s.lookup("A"), Some(&[1.0, 0.0][..]));
        assert_eq!(s.lookup("c"), None);
        let mixed = space(&[("Paris", &[1.0, 0.0])]);
        assert!(mixed.lookup("Paris").is_some());
    }

    #[test]
    fn save_rejects_empty_and_bad_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let empty = EmbeddingSpace::from_rows(3, std::iter::empty(), ZeroNormPolicy::Error).unwrap();
        assert!(save_vectors(&empty, dir.path().join("e.vec")).is_err());
        // the constructor already refuses whitespace tokens
        let bad = EmbeddingSpace::from_rows(1, [("a b".to_string(), vec![1.0])], ZeroNormPolicy::Error);
        assert!(bad.is_err());
    }

    #[test]
    fn save_is_sorted_and_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vec");
        let s = space(&[("zeta", &[0.1, 1e-300]), ("alpha", &[-2.5, 123456789.0])]);
        save_vectors(&s, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "2 2\nalpha -2.5 123456789\nzeta 0.1 1e-300\n");
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            -10.0f64..10.0,
            any::<f64>().prop_filter("finite", |v| v.is_finite())
        ]
    }

    proptest! {
        #[test]
        fn cosine_properties(
            x in prop::collection::vec(-100.0f64..100.0, 4),
            y in prop::collection::vec(-100.0f64..100.0, 4),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            prop_assume!(squared_norm(&x) > 1e-6 && squared_norm(&y) > 1e-6);
            let c = cosine(&x, &y).unwrap();
            prop_assert_eq!(c, cosine(&y, &x).unwrap());
            let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
            let ys: Vec<f64> = y.iter().map(|v| v * b).collect();
            prop_assert!((cosine(&xs, &ys).unwrap() - c).abs() < 1e-12);
            prop_assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn save_load_round_trip(rows in prop::collection::btree_map("[a-zक-ह]{1,5}", prop::collection::vec(finite(), 3), 1..20)) {
            let rows: Vec<(String, Vec<f64>)> = rows.into_iter().filter(|(_, v)| squared_norm(v) > 0.0 && squared_norm(v).is_finite()).collect();
            prop_assume!(!rows.is_empty());
            let s = EmbeddingSpace::from_rows(3, rows.clone(), ZeroNormPolicy::Error).unwrap();
            let mut buf = Vec::new();
            write_vectors(&s, &mut buf).unwrap();
            let back = parse(std::str::from_utf8(&buf).unwrap(), VectorFormat::Word2vecText).unwrap();
            prop_assert_eq!(back.len(), s.len());
            for (t, v) in &rows {
                prop_assert_eq!(back.lookup(t).unwrap(), &v[..]);
            }
        }
    }
}
