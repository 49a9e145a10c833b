//! Shared fixtures and independent reference implementations for the
//! integration tests. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use std::collections::HashMap;

use biasprobe::embed::{EmbeddingSpace, ZeroNormPolicy};
use biasprobe::lexicon::WordSetSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Textbook cosine: two norms and a dot product, accumulated left to right.
pub fn naive_cosine(x: &[f64], y: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for i in 0..x.len() {
        dot += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
    }
    dot / (xx.sqrt() * yy.sqrt())
}

/// A WEAT problem with its raw vectors kept alongside the space.
pub struct WeatCase {
    pub vectors: HashMap<String, Vec<f64>>,
    pub space: EmbeddingSpace,
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub a: Vec<String>,
    pub b: Vec<String>,
}

impl WeatCase {
    /// i.i.d. standard-normal vectors for |X| = |Y| = n, |A| = na, |B| = nb.
    pub fn random(rng: &mut ChaCha8Rng, n: usize, na: usize, nb: usize, m: usize) -> Self {
        let names = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let (x, y, a, b) = (names("x", n), names("y", n), names("a", na), names("b", nb));
        let mut vectors = HashMap::new();
        let mut rows = Vec::new();
        for t in x.iter().chain(&y).chain(&a).chain(&b) {
            let v = normal_vec(rng, m);
            vectors.insert(t.clone(), v.clone());
            rows.push((t.clone(), v));
        }
        let space = EmbeddingSpace::from_rows(m, rows, ZeroNormPolicy::Error).unwrap();
        WeatCase {
            vectors,
            space,
            x,
            y,
            a,
            b,
        }
    }

    pub fn specs(&self) -> [WordSetSpec; 4] {
        let spec = |name: &str, t: &[String]| WordSetSpec::new(name, "en", t.iter().cloned()).unwrap();
        [
            spec("x", &self.x),
            spec("y", &self.y),
            spec("a", &self.a),
            spec("b", &self.b),
        ]
    }

    pub fn association(&self, w: &str) -> f64 {
        let v = &self.vectors[w];
        let mean_cos = |set: &[String]| set.iter().map(|t| naive_cosine(v, &self.vectors[t])).sum::<f64>() / set.len() as f64;
        mean_cos(&self.a) - mean_cos(&self.b)
    }

    pub fn oracle(&self) -> OracleWeat {
        let sx: Vec<f64> = self.x.iter().map(|w| self.association(w)).collect();
        let sy: Vec<f64> = self.y.iter().map(|w| self.association(w)).collect();
        oracle_from_associations(&sx, &sy)
    }
}

pub struct OracleWeat {
    pub statistic: f64,
    pub effect_size: f64,
    pub p_exact: f64,
    pub partitions: u64,
}

/// Statistic, effect size and exact p by brute force over bitmasks.
///
/// A partition counts when its statistic is at least the observed one less
/// 1e-12 · max(1, Σ|s|), the documented tie slack.
pub fn oracle_from_associations(sx: &[f64], sy: &[f64]) -> OracleWeat {
    let n = sx.len();
    let pooled: Vec<f64> = sx.iter().chain(sy).copied().collect();
    let statistic = sx.iter().sum::<f64>() - sy.iter().sum::<f64>();

    let mean_all = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let var = pooled.iter().map(|v| (v - mean_all).powi(2)).sum::<f64>() / (pooled.len() - 1) as f64;
    let mean_x = sx.iter().sum::<f64>() / n as f64;
    let mean_y = sy.iter().sum::<f64>() / n as f64;
    let effect_size = (mean_x - mean_y) / var.sqrt();

    let slack = 1e-12 * pooled.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let mut hits = 0u64;
    let mut partitions = 0u64;
    for mask in 0u64..(1 << (2 * n)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        partitions += 1;
        let mut s = 0.0;
        for (i, v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s += v;
            } else {
                s -= v;
            }
        }
        if s >= statistic - slack {
            hits += 1;
        }
    }
    OracleWeat {
        statistic,
        effect_size,
        p_exact: hits as f64 / partitions as f64,
        partitions,
    }
}

/// Relative error of two gradient blocks.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub const MALE: [&str; 8] = ["he", "him", "his", "man", "boy", "father", "son", "brother"];
pub const FEMALE: [&str; 8] = ["she", "her", "hers", "woman", "girl", "mother", "daughter", "sister"];
pub const CAREER: [&str; 8] = [
    "executive",
    "management",
    "professional",
    "corporation",
    "salary",
    "office",
    "business",
    "career",
];
pub const FAMILY: [&str; 8] = [
    "home",
    "parents",
    "children",
    "family",
    "cousins",
    "marriage",
    "wedding",
    "relatives",
];

pub fn spec(name: &str, tokens: &[&str]) -> WordSetSpec {
    WordSetSpec::new(name, "en", tokens.iter().copied()).unwrap()
}

/// CSV text with a header and one synthetic document per row in `column`.
///
/// Every document has a topic, career or family, and holds one gendered
/// word, one attribute word of that topic, three topic words and three
/// generic filler words. With probability (1 + skew) / 2 a masculine word
/// lands in a career document and a feminine word in a family document,
/// and the other way around otherwise; `skew` = 0 plants nothing.
pub fn planted_csv(rng: &mut ChaCha8Rng, column: &str, skew: f64, documents: usize) -> String {
    let filler: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
    let topic_words = |p: &str| (0..20).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let (career_topic, family_topic) = (topic_words("c"), topic_words("f"));
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["id", column]).unwrap();
    for id in 0..documents {
        let masculine = rng.gen_bool(0.5);
        let congruent = rng.gen_bool((1.0 + skew) / 2.0);
        let gender = if masculine { &MALE } else { &FEMALE };
        let (attrs, topic) = if masculine == congruent {
            (&CAREER, &career_topic)
        } else {
            (&FAMILY, &family_topic)
        };
        let mut words: Vec<String> = vec![
            gender[rng.gen_range(0..8)].to_string(),
            attrs[rng.gen_range(0..8)].to_string(),
        ];
        words.extend((0..3).map(|_| topic[rng.gen_range(0..topic.len())].clone()));
        words.extend((0..3).map(|_| filler[rng.gen_range(0..filler.len())].clone()));
        for i in (1..words.len()).rev() {
            words.swap(i, rng.gen_range(0..=i));
        }
        let mut text = words.join(" ");
        if id % 17 == 0 {
            text.push_str(" https://example.org/item");
        }
        out.write_record([id.to_string(), text]).unwrap();
    }
    String::from_utf8(out.into_inner().unwrap()).unwrap()
}

/// Skip-gram settings for the small synthetic corpora.
pub fn small_sgns(seed: u64) -> biasprobe::sgns::SgnsConfig {
    biasprobe::sgns::SgnsConfig {
        dimension: 24,
        window: 8,
        negatives: 5,
        epochs: 10,
        min_count: 3,
        subsample_threshold: 1.0,
        seed,
        threads: 1,
        ..Default::default()
    }
}

/// ingest → 80:20 split → train on the train part → WEAT (career/family)
/// → per-domain report.
pub fn planted_report(
    dir: &std::path::Path,
    domain: biasprobe::corpus::Domain,
    skew: f64,
    seed: u64,
) -> biasprobe::analysis::DomainReport {
    use biasprobe::{analysis, corpus, sgns, tokenize, weat};

    let mut r = rng(seed ^ (domain as u64).wrapping_mul(0x9e37_79b9));
    let path = dir.join(format!("{domain}-{seed}.csv"));
    std::fs::write(&path, planted_csv(&mut r, domain.default_column(), skew, PLANTED_DOCUMENTS)).unwrap();
    let table = corpus::load_table(&path, domain.default_column(), domain).unwrap();
    let parts = corpus::split(&table, 0.8, seed).unwrap();
    let docs: Vec<Vec<String>> = parts
        .train
        .documents()
        .iter()
        .map(|d| tokenize::tokenize(d).tokens)
        .collect();
    let model = sgns::train(&docs, &small_sgns(seed)).unwrap();
    let result = weat::run_weat(
        &model.space,
        &spec("male", &MALE),
        &spec("female", &FEMALE),
        &spec("career", &CAREER),
        &spec("family", &FAMILY),
        &weat::WeatConfig::default(),
    )
    .unwrap();
    analysis::DomainReport {
        domain_id: domain,
        weat_results: [("career_family".to_string(), result)].into_iter().collect(),
        tgbi_result: None,
        masculine_top: vec![],
        feminine_top: vec![],
        embedding_provenance: model.space.source.clone(),
        parameters_digest: None,
    }
}

pub const PLANTED_DOCUMENTS: usize = 12000;
