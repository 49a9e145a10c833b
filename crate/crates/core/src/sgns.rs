//! Skip-gram with negative sampling.
//!
//! Per (center, context) pair with sampled negatives the loss is
//!
//! ```text
//! L = −log σ(u_ctx · v_c) − Σ_neg log σ(−u_neg · v_c)
//! ```
//!
//! where `v` rows live in the input matrix (the embeddings that are kept)
//! and `u` rows in the output matrix (discarded after training).
//!
//! Training details: input rows start uniform in `[−0.5/m, 0.5/m]`, output
//! rows at zero. Each position draws an effective window uniformly from
//! `1..=window`. Frequent tokens are subsampled with keep probability
//! `(sqrt(f/t) + 1) · t/f` for relative frequency `f` and threshold `t`, so
//! tokens with `f ≤ t` are always kept. Negatives come from the unigram
//! distribution raised to 0.75. The learning rate decays linearly from the
//! initial value to 1e-4 over all epochs.
//!
//! With `threads = 1` training is deterministic given the corpus and config.
//! More threads shard the documents and update shared matrices without
//! locks (Hogwild); such runs are not reproducible.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingSpace, ZeroNormPolicy};
use crate::rng::SplitMix64;
use crate::tokenize::{token_script, Script};
use crate::{Error, Result};

const FINAL_LEARNING_RATE: f64 = 1e-4;
const NOISE_POWER: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub seed: u64,
    pub threads: usize,
    /// Keep digit-only tokens out of the vocabulary.
    pub exclude_numeric: bool,
    pub stoplist: Vec<String>,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            subsample_threshold: 1e-4,
            min_count: 5,
            seed: 1,
            threads: 1,
            exclude_numeric: true,
            stoplist: Vec::new(),
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be positive")));
        if self.dimension == 0 {
            return bad("dimension");
        }
        if self.window == 0 {
            return bad("window");
        }
        if self.negatives == 0 {
            return bad("negatives");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite()) {
            return bad("initial_learning_rate");
        }
        if self.subsample_threshold.is_nan() || self.subsample_threshold <= 0.0 {
            return bad("subsample_threshold");
        }
        if self.min_count == 0 {
            return bad("min_count");
        }
        if self.threads == 0 {
            return bad("threads");
        }
        Ok(())
    }

    pub fn provenance(&self) -> String {
        format!(
            "sgns dimension={} window={} negatives={} epochs={} initial_learning_rate={} subsample_threshold={} min_count={} seed={} threads={}",
            self.dimension,
            self.window,
            self.negatives,
            self.epochs,
            self.initial_learning_rate,
            self.subsample_threshold,
            self.min_count,
            self.seed,
            self.threads
        )
    }
}

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    pub total_tokens: u64,
    pub min_count: u64,
    noise: Vec<f64>,
    noise_cdf: Vec<f64>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn noise_distribution(&self) -> &[f64] {
        &self.noise
    }

    fn sample_noise(&self, rng: &mut SplitMix64) -> usize {
        let u = rng.next_f64();
        self.noise_cdf.partition_point(|&c| c <= u).min(self.len() - 1)
    }

    /// Keep probability for subsampling.
    pub fn keep_probability(&self, i: usize, threshold: f64) -> f64 {
        let f = self.counts[i] as f64 / self.total_tokens as f64;
        ((f / threshold).sqrt() + 1.0) * threshold / f
    }
}

/// Count tokens, drop those below `min_count`, index the rest by descending
/// count (ties lexicographic) and build the count^0.75 noise distribution.
pub fn build_vocab<'a, I>(tokens: I, min_count: u64) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a str>,
{
    build_vocab_filtered(tokens, min_count, |_| true)
}

pub fn build_vocab_filtered<'a, I, F>(tokens: I, min_count: u64, admit: F) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a str>,
    F: Fn(&str) -> bool,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut seen_any = false;
    for t in tokens {
        seen_any = true;
        if admit(t) {
            *counts.entry(t).or_default() += 1;
        }
    }
    if !seen_any {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let weights: Vec<f64> = entries.iter().map(|&(_, c)| (c as f64).powf(NOISE_POWER)).collect();
    let z: f64 = weights.iter().sum();
    let noise: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let mut acc = 0.0;
    let noise_cdf = noise
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();

    Ok(Vocab {
        index: entries.iter().enumerate().map(|(i, &(t, _))| (t.to_string(), i)).collect(),
        tokens: entries.iter().map(|&(t, _)| t.to_string()).collect(),
        total_tokens: entries.iter().map(|&(_, c)| c).sum(),
        counts: entries.iter().map(|&(_, c)| c).collect(),
        min_count,
        noise,
        noise_cdf,
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−log σ(z)`, stable for large |z|.
fn neg_log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn check_dims(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> Result<()> {
    let m = center.len();
    for len in std::iter::once(context.len()).chain(negatives.iter().map(Vec::len)) {
        if len != m {
            return Err(Error::DimensionMismatch { left: m, right: len });
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one (center, context, negatives) example.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> Result<f64> {
    check_dims(center, context, negatives)?;
    Ok(neg_log_sigmoid(dot(context, center))
        + negatives.iter().map(|u| neg_log_sigmoid(-dot(u, center))).sum::<f64>())
}

/// Gradients of [`sgns_loss`] with respect to each argument.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> Result<(f64, SgnsGradients)> {
    let loss = sgns_loss(center, context, negatives)?;
    // dL/dz for each target: σ(z) − label
    let g_ctx = sigmoid(dot(context, center)) - 1.0;
    let g_neg: Vec<f64> = negatives.iter().map(|u| sigmoid(dot(u, center))).collect();
    let mut g_center: Vec<f64> = context.iter().map(|u| g_ctx * u).collect();
    for (u, g) in negatives.iter().zip(&g_neg) {
        for (gc, uj) in g_center.iter_mut().zip(u) {
            *gc += g * uj;
        }
    }
    Ok((
        loss,
        SgnsGradients {
            center: g_center,
            context: center.iter().map(|v| g_ctx * v).collect(),
            negatives: g_neg.iter().map(|g| center.iter().map(|v| g * v).collect()).collect(),
        },
    ))
}

/// One SGD step on a single example. Returns the loss before the update.
/// All gradients are taken at the pre-update point.
pub fn sgns_step(center: &mut [f64], context: &mut [f64], negatives: &mut [Vec<f64>], lr: f64) -> Result<f64> {
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::InvalidConfig(format!("learning rate must be positive, got {lr}")));
    }
    let (loss, g) = sgns_gradients(center, context, negatives)?;
    for (v, gv) in center.iter_mut().zip(&g.center) {
        *v -= lr * gv;
    }
    for (u, gu) in context.iter_mut().zip(&g.context) {
        *u -= lr * gu;
    }
    for (neg, gn) in negatives.iter_mut().zip(&g.negatives) {
        for (u, gu) in neg.iter_mut().zip(gn) {
            *u -= lr * gu;
        }
    }
    Ok(loss)
}

/// Row-major matrix that tolerates unsynchronized concurrent updates.
/// Relaxed atomic loads and stores compile to plain moves; concurrent
/// read-modify-write cycles may lose updates, which Hogwild accepts.
struct SharedMatrix {
    dim: usize,
    data: Vec<AtomicU64>,
}

impl SharedMatrix {
    fn new(rows: usize, dim: usize, mut init: impl FnMut() -> f64) -> Self {
        SharedMatrix {
            dim,
            data: (0..rows * dim).map(|_| AtomicU64::new(init().to_bits())).collect(),
        }
    }

    fn read_row(&self, r: usize, out: &mut [f64]) {
        for (o, cell) in out.iter_mut().zip(&self.data[r * self.dim..(r + 1) * self.dim]) {
            *o = f64::from_bits(cell.load(Ordering::Relaxed));
        }
    }

    fn add_row(&self, r: usize, delta: &[f64], scale: f64) {
        for (d, cell) in delta.iter().zip(&self.data[r * self.dim..(r + 1) * self.dim]) {
            let v = f64::from_bits(cell.load(Ordering::Relaxed)) + scale * d;
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_rows(self) -> Vec<f64> {
        self.data.into_iter().map(|c| f64::from_bits(c.into_inner())).collect()
    }
}

struct Scratch {
    v: Vec<f64>,
    u: Vec<f64>,
    neu1e: Vec<f64>,
    gains: Vec<f64>,
    targets: Vec<(usize, bool)>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            v: vec![0.0; dim],
            u: vec![0.0; dim],
            neu1e: vec![0.0; dim],
            gains: Vec::new(),
            targets: Vec::new(),
        }
    }
}

/// The trainer's step over shared matrices; numerically the same update as
/// [`sgns_step`]. `s.targets` holds `(output row, is_context)`.
fn train_example(input: &SharedMatrix, output: &SharedMatrix, center: usize, lr: f64, s: &mut Scratch) -> f64 {
    input.read_row(center, &mut s.v);
    s.neu1e.fill(0.0);
    s.gains.clear();
    let mut loss = 0.0;
    for &(t, is_ctx) in &s.targets {
        output.read_row(t, &mut s.u);
        let z = dot(&s.u, &s.v);
        let label = if is_ctx { 1.0 } else { 0.0 };
        loss += if is_ctx { neg_log_sigmoid(z) } else { neg_log_sigmoid(-z) };
        let g = lr * (label - sigmoid(z));
        for (e, uj) in s.neu1e.iter_mut().zip(&s.u) {
            *e += g * uj;
        }
        s.gains.push(g);
    }
    for (&(t, _), &g) in s.targets.iter().zip(&s.gains) {
        output.add_row(t, &s.v, g);
    }
    input.add_row(center, &s.neu1e, 1.0);
    loss
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub space: EmbeddingSpace,
    pub vocab: Vocab,
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

struct Shared<'a> {
    config: &'a SgnsConfig,
    vocab: &'a Vocab,
    input: SharedMatrix,
    output: SharedMatrix,
    processed: AtomicU64,
    total_work: u64,
}

impl Shared<'_> {
    fn learning_rate(&self) -> f64 {
        let lr0 = self.config.initial_learning_rate;
        let progress = self.processed.load(Ordering::Relaxed) as f64 / self.total_work.max(1) as f64;
        (lr0 - (lr0 - FINAL_LEARNING_RATE) * progress).max(FINAL_LEARNING_RATE.min(lr0))
    }

    fn run_shard(&self, docs: &[Vec<usize>], mut rng: SplitMix64) -> (f64, u64) {
        let cfg = self.config;
        let keep: Vec<f64> = (0..self.vocab.len())
            .map(|i| self.vocab.keep_probability(i, cfg.subsample_threshold))
            .collect();
        let mut scratch = Scratch::new(cfg.dimension);
        let mut sentence = Vec::new();
        let (mut loss, mut steps) = (0.0, 0u64);
        for doc in docs {
            sentence.clear();
            for &w in doc {
                if keep[w] >= 1.0 || rng.next_f64() < keep[w] {
                    sentence.push(w);
                }
            }
            let lr = self.learning_rate();
            for pos in 0..sentence.len() {
                let reach = cfg.window - rng.below(cfg.window as u64) as usize;
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for c in lo..=hi {
                    if c == pos {
                        continue;
                    }
                    let ctx = sentence[c];
                    scratch.targets.clear();
                    scratch.targets.push((ctx, true));
                    for _ in 0..cfg.negatives {
                        let neg = self.vocab.sample_noise(&mut rng);
                        if neg != ctx {
                            scratch.targets.push((neg, false));
                        }
                    }
                    loss += train_example(&self.input, &self.output, sentence[pos], lr, &mut scratch);
                    steps += 1;
                }
            }
            self.processed.fetch_add(doc.len() as u64, Ordering::Relaxed);
        }
        (loss, steps)
    }
}

/// Train on tokenized documents. Context windows never cross documents.
pub fn train<S: AsRef<str>>(documents: &[Vec<S>], config: &SgnsConfig) -> Result<TrainedModel> {
    config.validate()?;
    let stop: std::collections::HashSet<&str> = config.stoplist.iter().map(String::as_str).collect();
    let vocab = build_vocab_filtered(
        documents.iter().flatten().map(AsRef::as_ref),
        config.min_count,
        |t| !stop.contains(t) && !(config.exclude_numeric && token_script(t) == Script::Digit),
    )?;
    let docs: Vec<Vec<usize>> = documents
        .iter()
        .map(|d| d.iter().filter_map(|t| vocab.index(t.as_ref())).collect::<Vec<_>>())
        .filter(|d: &Vec<usize>| d.len() > 1)
        .collect();
    let words: u64 = docs.iter().map(|d| d.len() as u64).sum();

    let dim = config.dimension;
    let mut init_rng = SplitMix64::new(config.seed);
    let shared = Shared {
        config,
        vocab: &vocab,
        input: SharedMatrix::new(vocab.len(), dim, || (init_rng.next_f64() - 0.5) / dim as f64),
        output: SharedMatrix::new(vocab.len(), dim, || 0.0),
        processed: AtomicU64::new(0),
        total_work: words * config.epochs as u64,
    };

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs as u64 {
        let (loss, steps) = if config.threads == 1 {
            shared.run_shard(&docs, SplitMix64::stream(config.seed, epoch))
        } else {
            let chunk = docs.len().div_ceil(config.threads).max(1);
            std::thread::scope(|scope| {
                let handles: Vec<_> = docs
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, shard)| {
                        let shared = &shared;
                        let rng = SplitMix64::stream(config.seed, epoch * config.threads as u64 + w as u64);
                        scope.spawn(move || shared.run_shard(shard, rng))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0), |acc, (l, s)| (acc.0 + l, acc.1 + s))
            })
        };
        let mean = if steps == 0 { 0.0 } else { loss / steps as f64 };
        log::info!("epoch {}: mean loss {mean:.6} over {steps} examples", epoch + 1);
        epoch_losses.push(mean);
    }

    let Shared { input, .. } = shared;
    let data = input.into_rows();
    let rows = vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), data[i * dim..(i + 1) * dim].to_vec()));
    let space = EmbeddingSpace::from_rows(dim, rows, ZeroNormPolicy::Error)?.with_tags("", None, config.provenance());
    Ok(TrainedModel {
        space,
        vocab,
        epoch_losses,
    })
}
