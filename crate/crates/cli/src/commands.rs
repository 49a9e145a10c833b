//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use biasprobe::analysis::{self, CountFilter, DomainReport, ReportFormat};
use biasprobe::corpus::{self, CorpusMetadata, Domain, DomainCorpus};
use biasprobe::embed::{self, EmbeddingSpace, ZeroNormPolicy};
use biasprobe::lexicon::{self, DataSource};
use biasprobe::sgns::{self, SgnsConfig};
use biasprobe::tgbi::{self, GenderLexicon, Manifest};
use biasprobe::tokenize::tokenize;
use biasprobe::weat::{self, PermutationConfig, WeatConfig, WeatResult};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::*;

/// Effective configuration of one invocation.
#[derive(Debug, Serialize)]
struct RunInfo {
    subcommand: &'static str,
    config: Value,
    config_digest: String,
    tool_version: &'static str,
}

impl RunInfo {
    fn new<C: Serialize>(subcommand: &'static str, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_digest = analysis::config_digest(&json!({ "subcommand": subcommand, "config": config }))?;
        Ok(RunInfo {
            subcommand,
            config,
            config_digest,
            tool_version: biasprobe::TOOL_VERSION,
        })
    }
}

fn with_run<T: Serialize>(result: &T, run: &RunInfo) -> Result<Value> {
    let mut value = serde_json::to_value(result)?;
    let Value::Object(map) = &mut value else {
        bail!("result did not serialize to a JSON object");
    };
    map.insert("run".into(), serde_json::to_value(run)?);
    Ok(value)
}

fn json_bytes(value: &Value) -> Result<Vec<u8>> {
    Ok(analysis::to_canonical_json(value)?)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(&a),
        Command::Split(a) => split(&a),
        Command::TrainSgns(a) => train_sgns(&a),
        Command::Weat(a) => run_weat(&a),
        Command::Tgbi(a) => run_tgbi(&a),
        Command::Neighbors(a) => neighbors(&a),
        Command::Report(a) => report(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn write_corpus(corpus: &DomainCorpus, meta: &CorpusMetadata, path: &Path, run: &RunInfo) -> Result<()> {
    corpus::write_corpus(corpus, meta, path)?;
    let sidecar = corpus::metadata_path(path);
    fs::write(&sidecar, json_bytes(&with_run(meta, run)?)?).with_context(|| format!("cannot write {}", sidecar.display()))
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let run = RunInfo::new("ingest", a)?;
    let column = a.column.clone().unwrap_or_else(|| a.domain.default_column().to_string());
    let corpus = corpus::load_table(&a.input, &column, a.domain)?;
    let meta = CorpusMetadata::for_corpus(&corpus);
    write_corpus(&corpus, &meta, &a.out, &run)?;
    log::info!("{}: {} documents written to {}", a.domain, corpus.record_count(), a.out.display());
    emit(None, &json_bytes(&with_run(&meta, &run)?)?)
}

fn read_corpus(path: &Path, domain: Option<Domain>) -> Result<(DomainCorpus, Option<CorpusMetadata>)> {
    let has_sidecar = corpus::metadata_path(path).exists();
    let fallback = match (domain, has_sidecar) {
        (Some(d), _) => d,
        (None, true) => Domain::News,
        (None, false) => bail!("{} has no metadata sidecar; pass --domain", path.display()),
    };
    let (mut corpus, meta) = corpus::read_corpus(path, fallback)?;
    if let Some(d) = domain {
        corpus.domain = d;
    }
    Ok((corpus, meta))
}

fn split(a: &SplitArgs) -> Result<()> {
    let run = RunInfo::new("split", a)?;
    let (corpus, _) = read_corpus(&a.input, a.domain)?;
    let parts = corpus::split(&corpus, a.ratio, a.seed)?;
    write_corpus(&parts.train, &CorpusMetadata::for_split(&parts, true), &a.train_out, &run)?;
    write_corpus(&parts.test, &CorpusMetadata::for_split(&parts, false), &a.test_out, &run)?;
    let summary = json!({
        "domain_id": corpus.domain,
        "ratio": a.ratio,
        "seed": a.seed,
        "train_records": parts.train.record_count(),
        "test_records": parts.test.record_count(),
    });
    emit(None, &json_bytes(&with_run(&summary, &run)?)?)
}

fn train_sgns(a: &TrainArgs) -> Result<()> {
    let run = RunInfo::new("train-sgns", a)?;
    let (corpus, meta) = corpus::read_corpus(&a.corpus, Domain::News)?;
    let domain = meta.map(|m| m.domain_id);
    let documents: Vec<Vec<String>> = corpus.documents().iter().map(|d| tokenize(d).tokens).collect();
    let stoplist = match &a.stoplist {
        Some(path) => lexicon::load_wordset(path, "stoplist", &a.language)?.tokens().to_vec(),
        None => Vec::new(),
    };
    let config = SgnsConfig {
        dimension: a.dimension,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        initial_learning_rate: a.initial_learning_rate,
        subsample_threshold: a.subsample_threshold,
        min_count: a.min_count,
        seed: a.seed,
        threads: a.threads,
        exclude_numeric: a.exclude_numeric,
        stoplist,
    };
    let model = sgns::train(&documents, &config)?;
    let provenance = config.provenance();
    let space = model.space.with_tags(a.language.clone(), domain, provenance.clone());
    embed::save_vectors(&space, &a.out)?;

    if let Some(path) = &a.counts_out {
        let mut text = String::new();
        for (i, token) in model.vocab.tokens().iter().enumerate() {
            let _ = writeln!(text, "{token} {}", model.vocab.count(i));
        }
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }

    let summary = json!({
        "provenance": provenance,
        "language": a.language,
        "domain_id": domain,
        "vocabulary_size": space.len(),
        "dimension": space.dim(),
        "epoch_losses": model.epoch_losses,
    });
    let bytes = json_bytes(&with_run(&summary, &run)?)?;
    let sidecar = corpus::metadata_path(&a.out);
    fs::write(&sidecar, &bytes).with_context(|| format!("cannot write {}", sidecar.display()))?;
    emit(None, &bytes)
}

fn load_space(e: &EmbeddingArgs, language: &str) -> Result<EmbeddingSpace> {
    let policy = if e.drop_zero_vectors {
        ZeroNormPolicy::WarnAndDrop
    } else {
        ZeroNormPolicy::Error
    };
    let mut space = embed::load_vectors(&e.embeddings, e.vector_format, policy)?;
    space.language = language.to_string();
    Ok(space)
}

fn weat_config(p: &PermutationArgs) -> WeatConfig {
    WeatConfig {
        min_size: p.min_size,
        balance: p.balance,
        permutation: PermutationConfig {
            method: p.method,
            max_exact: p.max_exact,
            iterations: p.permutations,
            seed: p.seed,
        },
    }
}

fn data_source(l: &LexiconArgs) -> DataSource {
    DataSource::new(l.data_dir.clone())
}

fn weat_markdown(r: &WeatResult, run: &RunInfo) -> String {
    let mut s = String::new();
    let sets = &r.sets;
    let _ = writeln!(
        s,
        "# WEAT: {} vs {} / {} vs {}\n",
        sets.targets_x, sets.targets_y, sets.attrs_a, sets.attrs_b
    );
    let _ = writeln!(s, "| statistic | effect size | p-value | method | partitions | seed |");
    let _ = writeln!(s, "|---:|---:|---:|---|---:|---:|");
    let seed = r.seed.map_or("-".to_string(), |v| v.to_string());
    let _ = writeln!(
        s,
        "| {:.6} | {:.6} | {:.6} | {} | {} | {} |",
        r.statistic, r.effect_size, r.p_value, r.method, r.n_partitions_evaluated, seed
    );
    for (role, tokens) in r.dropped_tokens.iter().filter(|(_, t)| !t.is_empty()) {
        let _ = writeln!(s, "\nDropped from {role}: {}", tokens.join(", "));
    }
    let _ = writeln!(s, "\nconfig digest: `{}`", run.config_digest);
    s
}

fn run_weat(a: &WeatArgs) -> Result<()> {
    let run = RunInfo::new("weat", a)?;
    let space = load_space(&a.embedding, &a.lexicon.language)?;
    let data = data_source(&a.lexicon);
    let lang = &a.lexicon.language;
    let x = data.wordset(&a.targets_x, lang)?;
    let y = data.wordset(&a.targets_y, lang)?;
    let attrs_a = data.wordset(&a.attrs_a, lang)?;
    let attrs_b = data.wordset(&a.attrs_b, lang)?;
    let result = weat::run_weat(&space, &x, &y, &attrs_a, &attrs_b, &weat_config(&a.permutation))?;
    let bytes = match a.format {
        OutputFormat::Json => json_bytes(&with_run(&result, &run)?)?,
        OutputFormat::Markdown => weat_markdown(&result, &run).into_bytes(),
    };
    emit(a.common.out.as_deref(), &bytes)
}

fn run_tgbi(a: &TgbiArgs) -> Result<()> {
    let run = RunInfo::new("tgbi", a)?;
    let counts = match (&a.input.counts, &a.input.sentences, &a.input.manifest) {
        (Some(path), _, _) => tgbi::load_counts(path)?,
        (None, Some(sentences), Some(manifest)) => {
            let text = fs::read_to_string(sentences).with_context(|| format!("cannot read {}", sentences.display()))?;
            let lines: Vec<&str> = text.lines().collect();
            let raw = fs::read_to_string(manifest).with_context(|| format!("cannot read {}", manifest.display()))?;
            let manifest: Manifest =
                serde_json::from_str(&raw).with_context(|| format!("invalid manifest {}", manifest.display()))?;
            let data = data_source(&a.lexicon);
            let he = data.wordset(&a.input.he, &a.lexicon.language)?;
            let she = data.wordset(&a.input.she, &a.lexicon.language)?;
            tgbi::count_sentences(&lines, &manifest, &GenderLexicon::new(&he, &she)?)?
        }
        _ => bail!("pass --counts, or --sentences together with --manifest"),
    };
    let result = tgbi::tgbi(&counts)?;
    let bytes = match a.format {
        OutputFormat::Json => json_bytes(&with_run(&result, &run)?)?,
        OutputFormat::Markdown => {
            let mut s = String::from("# TGBI\n\n| set | P(he) | P(she) | P(neutral) | score | both present |\n|---|---:|---:|---:|---:|---:|\n");
            for p in &result.per_set {
                let _ = writeln!(
                    s,
                    "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {} |",
                    p.set_id, p.p_he, p.p_she, p.p_neutral, p.score, p.both_present
                );
            }
            let _ = writeln!(s, "\nindex: {:.4}\n\nconfig digest: `{}`", result.index, run.config_digest);
            s.into_bytes()
        }
    };
    emit(a.common.out.as_deref(), &bytes)
}

/// `token count` per line, as written by `train-sgns --counts-out`.
fn load_vocab_counts(path: &Path) -> Result<BTreeMap<String, u64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let (Some(token), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
            bail!("{}:{}: expected `token count`", path.display(), i + 1);
        };
        let count = count
            .parse()
            .with_context(|| format!("{}:{}: bad count {count:?}", path.display(), i + 1))?;
        out.insert(token.to_string(), count);
    }
    Ok(out)
}

fn count_filter(d: &DirectionArgs) -> Result<Option<CountFilter>> {
    d.vocab_counts
        .as_deref()
        .map(|path| {
            Ok(CountFilter {
                counts: load_vocab_counts(path)?.into_iter().collect(),
                min_count: d.neighbor_min_count,
            })
        })
        .transpose()
}

fn neighbors(a: &NeighborsArgs) -> Result<()> {
    let run = RunInfo::new("neighbors", a)?;
    let space = load_space(&a.embedding, &a.lexicon.language)?;
    let pairs = data_source(&a.lexicon).pairs(&a.direction.pairs, &a.lexicon.language)?;
    let direction = analysis::gender_direction(&space, &pairs, a.direction.direction)?;
    let filter = count_filter(&a.direction)?;
    let found = analysis::gendered_neighbors(&space, &direction, a.direction.k, filter.as_ref())?;
    let bytes = match a.format {
        OutputFormat::Json => {
            let result = json!({
                "direction": {
                    "method": direction.method,
                    "pairs_used": direction.pairs_used,
                    "pairs_dropped": direction.pairs_dropped,
                },
                "masculine_top": found.masculine_top,
                "feminine_top": found.feminine_top,
                "truncated": found.truncated,
            });
            json_bytes(&with_run(&result, &run)?)?
        }
        OutputFormat::Markdown => {
            let mut s = String::from("# Gendered words\n\n| # | masculine | score | feminine | score |\n|---:|---|---:|---|---:|\n");
            let rows = found.masculine_top.len().max(found.feminine_top.len());
            for i in 0..rows {
                let cell = |list: &[analysis::ScoredToken]| {
                    list.get(i)
                        .map_or((String::new(), String::new()), |t| (t.token.clone(), format!("{:.4}", t.score)))
                };
                let (mt, ms) = cell(&found.masculine_top);
                let (ft, fs) = cell(&found.feminine_top);
                let _ = writeln!(s, "| {} | {mt} | {ms} | {ft} | {fs} |", i + 1);
            }
            let _ = writeln!(s, "\nconfig digest: `{}`", run.config_digest);
            s.into_bytes()
        }
    };
    emit(a.common.out.as_deref(), &bytes)
}

const DEFAULT_TESTS: [(&str, [&str; 4]); 3] = [
    ("career_family", ["male", "female", "career", "family"]),
    ("science_arts", ["male", "female", "science", "arts"]),
    ("strength_weakness", ["male", "female", "strength", "weakness"]),
];

fn default_tests(data: &DataSource, language: &str) -> Vec<TestSpec> {
    DEFAULT_TESTS
        .iter()
        .filter(|(_, sets)| sets.iter().all(|s| data.wordset(s, language).is_ok()))
        .map(|(name, sets)| TestSpec {
            name: name.to_string(),
            sets: sets.map(str::to_string),
        })
        .collect()
}

/// Training provenance from the vector file's sidecar, or the path itself.
fn embedding_provenance(path: &Path) -> String {
    let sidecar = corpus::metadata_path(path);
    fs::read(&sidecar)
        .ok()
        .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
        .and_then(|v| v.get("provenance").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| path.display().to_string())
}

/// Keys that name inputs rather than measurement parameters.
const INPUT_KEYS: [&str; 5] = ["domain", "embeddings", "tgbi_counts", "vocab_counts", "data_dir"];

fn report(a: &ReportArgs) -> Result<()> {
    let run = RunInfo::new("report", a)?;
    let lang = &a.lexicon.language;
    let space = load_space(&a.embedding, lang)?;
    let data = data_source(&a.lexicon);
    let tests = if a.tests.is_empty() {
        default_tests(&data, lang)
    } else {
        a.tests.clone()
    };
    if tests.is_empty() {
        bail!("no built-in WEAT tests for language {lang:?}; pass --test NAME=X,Y,A,B");
    }

    let config = weat_config(&a.permutation);
    let mut weat_results = BTreeMap::new();
    for test in &tests {
        let sets = test
            .sets
            .iter()
            .map(|name| data.wordset(name, lang))
            .collect::<Result<Vec<_>, _>>()?;
        match weat::run_weat(&space, &sets[0], &sets[1], &sets[2], &sets[3], &config) {
            Ok(r) => {
                weat_results.insert(test.name.clone(), r);
            }
            Err(e @ (biasprobe::Error::UnderResolved { .. } | biasprobe::Error::ZeroVariance)) => {
                log::warn!("{}: skipping {}: {e}", a.domain, test.name);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let pairs = data.pairs(&a.direction.pairs, lang)?;
    let (masculine_top, feminine_top) = match analysis::gender_direction(&space, &pairs, a.direction.direction) {
        Ok(direction) => {
            let filter = count_filter(&a.direction)?;
            let n = analysis::gendered_neighbors(&space, &direction, a.direction.k, filter.as_ref())?;
            (n.masculine_top, n.feminine_top)
        }
        Err(e @ (biasprobe::Error::NoResolvablePairs | biasprobe::Error::ZeroNorm { .. })) => {
            log::warn!("{}: no gender direction: {e}", a.domain);
            (Vec::new(), Vec::new())
        }
        Err(e) => return Err(e.into()),
    };

    let tgbi_result = a
        .tgbi_counts
        .as_deref()
        .map(|path| -> Result<_> { Ok(tgbi::tgbi(&tgbi::load_counts(path)?)?) })
        .transpose()?;

    let mut parameters = run.config.clone();
    if let Value::Object(map) = &mut parameters {
        for key in INPUT_KEYS {
            map.remove(key);
        }
    }
    let result = DomainReport {
        domain_id: a.domain,
        weat_results,
        tgbi_result,
        masculine_top,
        feminine_top,
        embedding_provenance: embedding_provenance(&a.embedding.embeddings),
        parameters_digest: Some(analysis::config_digest(&parameters)?),
    };
    emit(a.common.out.as_deref(), &json_bytes(&with_run(&result, &run)?)?)
}

fn compare(a: &CompareArgs) -> Result<()> {
    let run = RunInfo::new("compare", a)?;
    let reports = a
        .reports
        .iter()
        .map(|path: &PathBuf| {
            let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_slice::<DomainReport>(&bytes)
                .with_context(|| format!("{} is not a domain report", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = analysis::compare_domains(reports, a.generated_at.clone())?;
    if !report.parameters_consistent {
        log::warn!("domain reports were produced with different parameters");
    }
    let bytes = match a.format {
        TableFormat::Json => json_bytes(&with_run(&report, &run)?)?,
        TableFormat::Csv => analysis::emit_report(&report, ReportFormat::Csv)?,
        TableFormat::Markdown => analysis::emit_report(&report, ReportFormat::Markdown)?,
    };
    emit(a.common.out.as_deref(), &bytes)
}
