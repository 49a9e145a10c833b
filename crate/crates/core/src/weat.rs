//! Word Embedding Association Test.
//!
//! For target sets X, Y (equal size n) and attribute sets A, B:
//!
//! ```text
//! s(w, A, B) = mean_{a∈A} cos(w, a) − mean_{b∈B} cos(w, b)
//! S          = Σ_{x∈X} s(x, A, B) − Σ_{y∈Y} s(y, A, B)
//! d          = (mean_X s − mean_Y s) / stdev_{w∈X∪Y} s        (n − 1 denominator)
//! ```
//!
//! The p-value is one-sided: the share of equal-size re-partitions (X', Y')
//! of X ∪ Y whose statistic is at least the observed one. The observed
//! partition always counts, so p > 0. Partitions whose statistic lies within
//! `1e-12 · max(1, Σ|s|)` below the observed value count as ties; this
//! absorbs summation-order rounding so mathematically tied partitions are
//! never split by it.
//!
//! Exact mode enumerates all C(2n, n) partitions. Monte-Carlo mode draws
//! `iterations` partitions, each from a Fisher–Yates shuffle of the pooled
//! associations driven by its own counter-seeded generator, and reports
//! `(1 + hits) / (1 + iterations)`. The result is independent of the number
//! of worker threads.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingSpace;
use crate::lexicon::{balance, resolve, ResolvedWordSet, WordSetSpec};
use crate::numeric::{binomial, fsum, mean, sample_std};
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMethod {
    Exact,
    MonteCarlo,
}

impl fmt::Display for PermutationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PermutationMethod::Exact => "exact",
            PermutationMethod::MonteCarlo => "monte_carlo",
        })
    }
}

/// Requested p-value method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Exact iff C(2n, n) ≤ `max_exact`.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "auto" => Ok(MethodChoice::Auto),
            "exact" => Ok(MethodChoice::Exact),
            "monte_carlo" | "mc" => Ok(MethodChoice::MonteCarlo),
            other => Err(format!("unknown permutation method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub method: MethodChoice,
    pub max_exact: u64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            method: MethodChoice::Auto,
            max_exact: 200_000,
            iterations: 100_000,
            seed: 0,
        }
    }
}

/// Resolved and validated WEAT sets over one space.
#[derive(Debug, Clone, Copy)]
pub struct WeatInput<'a> {
    pub space: &'a EmbeddingSpace,
    pub x: &'a ResolvedWordSet,
    pub y: &'a ResolvedWordSet,
    pub a: &'a ResolvedWordSet,
    pub b: &'a ResolvedWordSet,
}

impl<'a> WeatInput<'a> {
    pub fn new(
        space: &'a EmbeddingSpace,
        x: &'a ResolvedWordSet,
        y: &'a ResolvedWordSet,
        a: &'a ResolvedWordSet,
        b: &'a ResolvedWordSet,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidWeatInput(format!(
                "target sets differ in size ({} vs {}); enable balancing to equalize them",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 || a.len() < 2 || b.len() < 2 {
            return Err(Error::InvalidWeatInput(
                "every set needs at least 2 resolved tokens".into(),
            ));
        }
        let xs: HashSet<&str> = x.found.iter().map(String::as_str).collect();
        let shared: Vec<&str> = y.found.iter().map(String::as_str).filter(|t| xs.contains(t)).collect();
        if !shared.is_empty() {
            return Err(Error::InvalidWeatInput(format!(
                "target sets overlap on: {}",
                shared.join(", ")
            )));
        }
        Ok(WeatInput { space, x, y, a, b })
    }

    /// Per-word associations, computed once.
    pub fn associations(&self) -> Associations {
        let assoc = |set: &ResolvedWordSet| {
            set.rows()
                .iter()
                .map(|&w| association_row(self.space, w, self.a.rows(), self.b.rows()))
                .collect()
        };
        Associations {
            x: assoc(self.x),
            y: assoc(self.y),
        }
    }
}

fn association_row(space: &EmbeddingSpace, w: usize, a: &[usize], b: &[usize]) -> f64 {
    let mean_cos = |rows: &[usize]| fsum(rows.iter().map(|&r| space.cosine_rows(w, r))) / rows.len() as f64;
    mean_cos(a) - mean_cos(b)
}

/// `s(w, A, B)` for a single token.
pub fn association(space: &EmbeddingSpace, token: &str, a: &ResolvedWordSet, b: &ResolvedWordSet) -> Result<f64> {
    let w = space
        .row_of(token)
        .ok_or_else(|| Error::TokenAbsent(token.to_string()))?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidWeatInput("attribute sets must be non-empty".into()));
    }
    Ok(association_row(space, w, a.rows(), b.rows()))
}

/// Associations of the X and Y targets, in set order.
#[derive(Debug, Clone, PartialEq)]
pub struct Associations {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Associations {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidWeatInput(format!(
                "need equal-size target associations of at least 2, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(Associations { x, y })
    }

    fn pooled(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn test_statistic(&self) -> f64 {
        fsum(self.x.iter().copied()) - fsum(self.y.iter().copied())
    }

    pub fn effect_size(&self) -> Result<f64> {
        let pooled = self.pooled();
        let first = pooled[0];
        if pooled.iter().all(|&v| v == first) {
            return Err(Error::ZeroVariance);
        }
        let sd = sample_std(&pooled).ok_or(Error::ZeroVariance)?;
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ZeroVariance);
        }
        let mx = mean(&self.x).ok_or(Error::ZeroVariance)?;
        let my = mean(&self.y).ok_or(Error::ZeroVariance)?;
        Ok((mx - my) / sd)
    }

    /// Slack below the observed statistic that still counts as a tie.
    pub fn tie_tolerance(&self) -> f64 {
        1e-12 * fsum(self.pooled().iter().map(|v| v.abs())).max(1.0)
    }

    pub fn p_value(&self, config: &PermutationConfig) -> Result<PValue> {
        let n = self.x.len();
        let total = binomial(2 * n as u64, n as u64);
        let method = match config.method {
            MethodChoice::Exact => PermutationMethod::Exact,
            MethodChoice::MonteCarlo => PermutationMethod::MonteCarlo,
            MethodChoice::Auto if total <= config.max_exact && 2 * n <= 63 => PermutationMethod::Exact,
            MethodChoice::Auto => PermutationMethod::MonteCarlo,
        };
        match method {
            PermutationMethod::Exact => {
                if 2 * n > 63 {
                    return Err(Error::InvalidWeatInput(format!(
                        "exact enumeration is limited to n ≤ 31, got n = {n}"
                    )));
                }
                let hits = self.exact_hits();
                Ok(PValue {
                    p: hits as f64 / total as f64,
                    method,
                    n_evaluated: total,
                })
            }
            PermutationMethod::MonteCarlo => {
                if config.iterations < 100 {
                    return Err(Error::TooFewIterations(config.iterations));
                }
                let hits = self.monte_carlo_hits(config.iterations, config.seed);
                Ok(PValue {
                    p: (1 + hits) as f64 / (1 + config.iterations) as f64,
                    method,
                    n_evaluated: config.iterations as u64,
                })
            }
        }
    }

    /// Number of equal-size partitions whose statistic ties or beats the
    /// observed one. Enumerates n-subsets of the pooled indices in
    /// lexicographic order.
    fn exact_hits(&self) -> u64 {
        let pooled = self.pooled();
        let n = self.x.len();
        let threshold = self.test_statistic() - self.tie_tolerance();
        let mut chosen: Vec<usize> = (0..n).collect();
        let mut in_x = vec![false; 2 * n];
        let mut hits = 0u64;
        loop {
            in_x.iter_mut().for_each(|f| *f = false);
            for &c in &chosen {
                in_x[c] = true;
            }
            let (mut sx, mut sy) = (0.0, 0.0);
            for (v, &is_x) in pooled.iter().zip(&in_x) {
                if is_x {
                    sx += v;
                } else {
                    sy += v;
                }
            }
            if sx - sy >= threshold {
                hits += 1;
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return hits;
                }
                i -= 1;
                if chosen[i] != i + n {
                    break;
                }
            }
            chosen[i] += 1;
            for j in i + 1..n {
                chosen[j] = chosen[j - 1] + 1;
            }
        }
    }

    fn monte_carlo_hits(&self, iterations: usize, seed: u64) -> u64 {
        let pooled = self.pooled();
        let n = self.x.len();
        let threshold = self.test_statistic() - self.tie_tolerance();
        (0..iterations as u64)
            .into_par_iter()
            .map_init(
                || pooled.clone(),
                |buf, i| {
                    buf.copy_from_slice(&pooled);
                    SplitMix64::stream(seed, i).shuffle(buf);
                    let sx: f64 = buf[..n].iter().sum();
                    let sy: f64 = buf[n..].iter().sum();
                    u64::from(sx - sy >= threshold)
                },
            )
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub p: f64,
    pub method: PermutationMethod,
    pub n_evaluated: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatConfig {
    pub min_size: usize,
    pub balance: bool,
    pub permutation: PermutationConfig,
}

impl Default for WeatConfig {
    fn default() -> Self {
        WeatConfig {
            min_size: 2,
            balance: false,
            permutation: PermutationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatSetNames {
    pub targets_x: String,
    pub targets_y: String,
    pub attrs_a: String,
    pub attrs_b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub statistic: f64,
    pub effect_size: f64,
    pub p_value: f64,
    pub method: PermutationMethod,
    pub n_partitions_evaluated: u64,
    /// Present when randomness was involved (Monte-Carlo p or balancing).
    pub seed: Option<u64>,
    /// Out-of-vocabulary tokens per role (`targets_x`, `targets_y`,
    /// `attrs_a`, `attrs_b`).
    pub dropped_tokens: BTreeMap<String, Vec<String>>,
    /// Target tokens removed to equalize |X| and |Y|.
    #[serde(default)]
    pub excluded_by_balance: Vec<String>,
    pub per_word_associations: BTreeMap<String, f64>,
    pub sets: WeatSetNames,
}

/// Resolve the four sets against `space` and run the full test.
pub fn run_weat(
    space: &EmbeddingSpace,
    x: &WordSetSpec,
    y: &WordSetSpec,
    a: &WordSetSpec,
    b: &WordSetSpec,
    config: &WeatConfig,
) -> Result<WeatResult> {
    if space.is_empty() {
        return Err(Error::InvalidSpace("embedding space is empty".into()));
    }
    let rx = resolve(space, x, config.min_size)?;
    let ry = resolve(space, y, config.min_size)?;
    let ra = resolve(space, a, config.min_size)?;
    let rb = resolve(space, b, config.min_size)?;

    let (bx, by) = if config.balance {
        balance(&rx, &ry, config.permutation.seed)
    } else {
        (rx.clone(), ry.clone())
    };
    let excluded_by_balance: Vec<String> = rx
        .found
        .iter()
        .filter(|t| !bx.found.contains(t))
        .chain(ry.found.iter().filter(|t| !by.found.contains(t)))
        .cloned()
        .collect();

    let input = WeatInput::new(space, &bx, &by, &ra, &rb)?;
    let assoc = input.associations();
    let statistic = assoc.test_statistic();
    let effect_size = assoc.effect_size()?;
    let p = assoc.p_value(&config.permutation)?;

    let per_word_associations = bx
        .found
        .iter()
        .zip(&assoc.x)
        .chain(by.found.iter().zip(&assoc.y))
        .map(|(t, &s)| (t.clone(), s))
        .collect();
    let dropped_tokens = [
        ("targets_x", &rx),
        ("targets_y", &ry),
        ("attrs_a", &ra),
        ("attrs_b", &rb),
    ]
    .into_iter()
    .map(|(role, set)| (role.to_string(), set.dropped.clone()))
    .collect();

    let used_randomness = p.method == PermutationMethod::MonteCarlo || !excluded_by_balance.is_empty();
    Ok(WeatResult {
        statistic,
        effect_size,
        p_value: p.p,
        method: p.method,
        n_partitions_evaluated: p.n_evaluated,
        seed: used_randomness.then_some(config.permutation.seed),
        dropped_tokens,
        excluded_by_balance,
        per_word_associations,
        sets: WeatSetNames {
            targets_x: x.name.clone(),
            targets_y: y.name.clone(),
            attrs_a: a.name.clone(),
            attrs_b: b.name.clone(),
        },
    })
}
