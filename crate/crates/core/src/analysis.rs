//! Gender direction, gendered neighbor lists and cross-domain reports.
//!
//! "Dominance of one gender" is operationalized two ways: the signed WEAT
//! effect size per domain, and the asymmetry between a domain's masculine
//! and feminine neighbor lists along the gender direction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Domain;
use crate::embed::{cosine, EmbeddingSpace};
use crate::lexicon::GenderPairList;
use crate::numeric::fsum;
use crate::tgbi::TgbiResult;
use crate::weat::WeatResult;
use crate::{Error, Result};

const POWER_TOLERANCE: f64 = 1e-9;
const POWER_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMethod {
    #[default]
    MeanDifference,
    FirstPrincipalComponent,
}

impl FromStr for DirectionMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "mean_difference" | "mean" => Ok(DirectionMethod::MeanDifference),
            "first_principal_component" | "pca" => Ok(DirectionMethod::FirstPrincipalComponent),
            other => Err(format!("unknown direction method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderDirection {
    pub vector: Vec<f64>,
    pub pairs_used: Vec<(String, String)>,
    pub pairs_dropped: Vec<(String, String)>,
    pub method: DirectionMethod,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit vector along the masculine − feminine axis.
///
/// `MeanDifference` normalizes the mean of `v_masc − v_fem` over the pairs
/// found in the space. `FirstPrincipalComponent` takes the leading
/// eigenvector of the (uncentered) second-moment matrix of those difference
/// vectors by power iteration, started from the mean difference and
/// sign-aligned with it.
pub fn gender_direction(space: &EmbeddingSpace, pairs: &GenderPairList, method: DirectionMethod) -> Result<GenderDirection> {
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut diffs: Vec<Vec<f64>> = Vec::new();
    for (m, f) in pairs.pairs() {
        match (space.lookup(m), space.lookup(f)) {
            (Some(vm), Some(vf)) => {
                diffs.push(vm.iter().zip(vf).map(|(a, b)| a - b).collect());
                used.push((m.clone(), f.clone()));
            }
            _ => dropped.push((m.clone(), f.clone())),
        }
    }
    if diffs.is_empty() {
        return Err(Error::NoResolvablePairs);
    }
    let dim = space.dim();
    let mean: Vec<f64> = (0..dim)
        .map(|j| fsum(diffs.iter().map(|d| d[j])) / diffs.len() as f64)
        .collect();
    let mean_norm = norm(&mean);
    if mean_norm == 0.0 {
        return Err(Error::ZeroNorm { token: None });
    }
    let mean_unit: Vec<f64> = mean.iter().map(|x| x / mean_norm).collect();

    let vector = match method {
        DirectionMethod::MeanDifference => mean_unit,
        DirectionMethod::FirstPrincipalComponent => {
            let mut v = principal_direction(&diffs, mean_unit);
            if dot(&v, &mean) < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        }
    };
    Ok(GenderDirection {
        vector,
        pairs_used: used,
        pairs_dropped: dropped,
        method,
    })
}

fn principal_direction(diffs: &[Vec<f64>], start: Vec<f64>) -> Vec<f64> {
    let dim = start.len();
    let mut v = start;
    let mut previous = 0.0;
    for _ in 0..POWER_MAX_ITERATIONS {
        let mut w = vec![0.0; dim];
        for d in diffs {
            let p = dot(d, &v);
            for (wj, dj) in w.iter_mut().zip(d) {
                *wj += p * dj;
            }
        }
        let lambda = norm(&w);
        if lambda == 0.0 {
            break;
        }
        v = w.iter().map(|x| x / lambda).collect();
        if (lambda - previous).abs() <= POWER_TOLERANCE * lambda {
            break;
        }
        previous = lambda;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredToken {
    pub token: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderedNeighbors {
    pub masculine_top: Vec<ScoredToken>,
    pub feminine_top: Vec<ScoredToken>,
    /// Set when fewer than `k` tokens were eligible on either side.
    pub truncated: bool,
}

/// Optional frequency filter for neighbor ranking.
#[derive(Debug, Clone, Default)]
pub struct CountFilter {
    pub counts: std::collections::HashMap<String, u64>,
    pub min_count: u64,
}

/// Rank every eligible vocabulary token by cosine with the direction.
/// Positive scores lean masculine, negative feminine; zero lands in
/// neither list. Tokens from the definitional pairs are excluded.
pub fn gendered_neighbors(
    space: &EmbeddingSpace,
    direction: &GenderDirection,
    k: usize,
    filter: Option<&CountFilter>,
) -> Result<GenderedNeighbors> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if direction.vector.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            left: space.dim(),
            right: direction.vector.len(),
        });
    }
    let excluded: HashSet<&str> = direction
        .pairs_used
        .iter()
        .chain(&direction.pairs_dropped)
        .flat_map(|(m, f)| [m.as_str(), f.as_str()])
        .collect();

    let scored: Vec<ScoredToken> = (0..space.len())
        .into_par_iter()
        .filter(|&i| {
            let t = space.tokens()[i].as_str();
            !excluded.contains(t)
                && filter.is_none_or(|f| f.counts.get(t).copied().unwrap_or(0) >= f.min_count)
        })
        .map(|i| {
            Ok(ScoredToken {
                token: space.tokens()[i].clone(),
                score: cosine(space.row(i), &direction.vector)?,
            })
        })
        .collect::<Result<_>>()?;

    let rank = |mut side: Vec<ScoredToken>| {
        side.sort_by(|a, b| {
            b.score
                .abs()
                .total_cmp(&a.score.abs())
                .then_with(|| a.token.cmp(&b.token))
        });
        let short = side.len() < k;
        side.truncate(k);
        (side, short)
    };
    let (pos, neg): (Vec<_>, Vec<_>) = scored.into_iter().filter(|s| s.score != 0.0).partition(|s| s.score > 0.0);
    let (masculine_top, short_m) = rank(pos);
    let (feminine_top, short_f) = rank(neg);
    let truncated = short_m || short_f;
    if truncated {
        log::warn!(
            "k = {k} exceeds eligible tokens ({} masculine, {} feminine); lists truncated",
            masculine_top.len(),
            feminine_top.len()
        );
    }
    Ok(GenderedNeighbors {
        masculine_top,
        feminine_top,
        truncated,
    })
}

/// Everything measured for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub domain_id: Domain,
    pub weat_results: BTreeMap<String, WeatResult>,
    pub tgbi_result: Option<TgbiResult>,
    pub masculine_top: Vec<ScoredToken>,
    pub feminine_top: Vec<ScoredToken>,
    pub embedding_provenance: String,
    /// Digest of the run parameters, excluding input paths and the domain,
    /// so that domains measured identically carry equal digests.
    #[serde(default)]
    pub parameters_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub domain: Domain,
    pub effect_size: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    /// By effect size, descending; ties by domain name.
    pub signed: Vec<RankEntry>,
    /// By |effect size|, descending; ties by domain name.
    pub absolute: Vec<RankEntry>,
    /// Adjacent domains in `signed` with equal effect sizes.
    pub ties: Vec<(Domain, Domain)>,
    /// Domains that did not report this metric.
    pub omitted: Vec<Domain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainReport {
    pub domains: Vec<DomainReport>,
    pub rankings: BTreeMap<String, MetricRanking>,
    /// Only set on request so identical runs stay byte-identical.
    pub generated_at: Option<String>,
    pub tool_version: String,
    pub config_digest: String,
    /// True when every domain carries the same parameters digest.
    pub parameters_consistent: bool,
}

/// SHA-256 (hex) of the canonical JSON encoding (sorted keys, compact).
pub fn config_digest<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    Ok(hex(&Sha256::digest(canonical.as_bytes())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn rank_metric(reports: &[DomainReport], metric: &str) -> MetricRanking {
    let mut entries = Vec::new();
    let mut omitted = Vec::new();
    for r in reports {
        match r.weat_results.get(metric) {
            Some(w) => entries.push(RankEntry {
                domain: r.domain_id,
                effect_size: w.effect_size,
                p_value: w.p_value,
            }),
            None => omitted.push(r.domain_id),
        }
    }
    let by_name = |a: &RankEntry, b: &RankEntry| a.domain.as_str().cmp(b.domain.as_str());
    let mut signed = entries.clone();
    signed.sort_by(|a, b| b.effect_size.total_cmp(&a.effect_size).then_with(|| by_name(a, b)));
    let mut absolute = entries;
    absolute.sort_by(|a, b| {
        b.effect_size
            .abs()
            .total_cmp(&a.effect_size.abs())
            .then_with(|| by_name(a, b))
    });
    let ties = signed
        .windows(2)
        .filter(|w| w[0].effect_size == w[1].effect_size)
        .map(|w| (w[0].domain, w[1].domain))
        .collect();
    MetricRanking {
        signed,
        absolute,
        ties,
        omitted,
    }
}

/// Rank domains per WEAT metric. Metrics reported by a single domain are
/// still listed, with the others marked as omitted.
pub fn compare_domains(mut reports: Vec<DomainReport>, generated_at: Option<String>) -> Result<CrossDomainReport> {
    if reports.len() < 2 {
        return Err(Error::Compare(format!("need at least 2 domains, got {}", reports.len())));
    }
    reports.sort_by(|a, b| a.domain_id.as_str().cmp(b.domain_id.as_str()));
    if let Some(w) = reports.windows(2).find(|w| w[0].domain_id == w[1].domain_id) {
        return Err(Error::Compare(format!("domain {} appears twice", w[0].domain_id)));
    }
    let metrics: BTreeSet<&String> = reports.iter().flat_map(|r| r.weat_results.keys()).collect();
    let shared = metrics
        .iter()
        .any(|m| reports.iter().filter(|r| r.weat_results.contains_key(*m)).count() >= 2);
    if !shared {
        return Err(Error::Compare("no metric name is shared by two or more domains".into()));
    }
    let rankings = metrics
        .iter()
        .map(|m| ((*m).clone(), rank_metric(&reports, m)))
        .collect();

    let digests: Vec<(Domain, Option<&String>, &String)> = reports
        .iter()
        .map(|r| (r.domain_id, r.parameters_digest.as_ref(), &r.embedding_provenance))
        .collect();
    let first = reports[0].parameters_digest.as_ref();
    let parameters_consistent = first.is_some() && reports.iter().all(|r| r.parameters_digest.as_ref() == first);
    Ok(CrossDomainReport {
        config_digest: config_digest(&digests)?,
        domains: reports,
        rankings,
        generated_at,
        tool_version: crate::TOOL_VERSION.to_string(),
        parameters_consistent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&serde_json::to_value(value)?)?;
    out.push(b'\n');
    Ok(out)
}

pub fn parse_report(bytes: &[u8]) -> Result<CrossDomainReport> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn emit_report(report: &CrossDomainReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => to_canonical_json(report),
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Markdown => Ok(emit_markdown(report).into_bytes()),
    }
}

fn emit_csv(report: &CrossDomainReport) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["domain", "metric", "effect_size", "p_value", "method"])?;
    for d in &report.domains {
        for (metric, r) in &d.weat_results {
            w.write_record([
                d.domain_id.as_str(),
                metric,
                &r.effect_size.to_string(),
                &r.p_value.to_string(),
                &r.method.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })
}

fn format_p(p: f64) -> String {
    if p > 0.0 && p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn emit_markdown(report: &CrossDomainReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Cross-domain gender bias report\n");
    let _ = writeln!(s, "- tool: {}", report.tool_version);
    let _ = writeln!(s, "- config digest: `{}`", report.config_digest);
    let _ = writeln!(s, "- parameters consistent across domains: {}", report.parameters_consistent);
    if let Some(t) = &report.generated_at {
        let _ = writeln!(s, "- generated at: {t}");
    }
    for (metric, ranking) in &report.rankings {
        let _ = writeln!(s, "\n## {metric}\n");
        let _ = writeln!(s, "| rank | domain | effect size | p-value |");
        let _ = writeln!(s, "|---:|---|---:|---:|");
        for (i, e) in ranking.signed.iter().enumerate() {
            let _ = writeln!(s, "| {} | {} | {:.4} | {} |", i + 1, e.domain, e.effect_size, format_p(e.p_value));
        }
        for (a, b) in &ranking.ties {
            let _ = writeln!(s, "\nTie: {a} and {b} have equal effect sizes.");
        }
        if !ranking.omitted.is_empty() {
            let names: Vec<&str> = ranking.omitted.iter().map(|d| d.as_str()).collect();
            let _ = writeln!(s, "\nNot reported by: {}", names.join(", "));
        }
    }
    for d in &report.domains {
        let _ = writeln!(s, "\n## {} (gendered words)\n", d.domain_id);
        let _ = writeln!(
            s,
            "TGBI: {}\n",
            d.tgbi_result.as_ref().map_or("n/a".to_string(), |t| format!("{:.4}", t.index))
        );
        let _ = writeln!(s, "| # | masculine | score | feminine | score |");
        let _ = writeln!(s, "|---:|---|---:|---|---:|");
        let rows = d.masculine_top.len().max(d.feminine_top.len());
        for i in 0..rows {
            let cell = |list: &[ScoredToken]| {
                list.get(i)
                    .map_or((String::new(), String::new()), |t| (t.token.clone(), format!("{:.4}", t.score)))
            };
            let (mt, ms) = cell(&d.masculine_top);
            let (ft, fs) = cell(&d.feminine_top);
            let _ = writeln!(s, "| {} | {mt} | {ms} | {ft} | {fs} |", i + 1);
        }
    }
    s
}
