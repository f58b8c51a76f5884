use crate::config::{CheckName, CorpusSource, ModelKind, Precision, RunConfig};
use crate::report;
use anyhow::{anyhow, Context};
use cspmi_core::analogy::{evaluate_analogy_set, CategoryResult, EvalOptions, Solver};
use cspmi_core::corpus::{count_cooccurrences_parallel, ingest_corpus};
use cspmi_core::factorize::{
    check_dense_order, exact_factorize, noise_by_frequency, truncated_factorize, DEFAULT_DENSE_CAP,
};
use cspmi_core::io;
use cspmi_core::sgns::{train_sgns_with_log, EpochLog};
use cspmi_core::stats::shifted_pmi_matrix;
use cspmi_core::synthetic::{generate_analogy_corpus, generate_zipf_corpus, zipf_word};
use cspmi_core::theorem::{self, CheckReport};
use cspmi_core::{
    AnalogySet, CompletedMatrix, CooccurrenceTable, CorpusStats, EmbeddingSpace, Provenance, Real, Vocabulary,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Schema,
    Ingest,
    Count,
    Stats,
    Embed,
    Evaluate,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Schema => "schema",
            Stage::Ingest => "ingest",
            Stage::Count => "count",
            Stage::Stats => "stats",
            Stage::Embed => "embed",
            Stage::Evaluate => "evaluate",
            Stage::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// A failure tagged with the stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

trait Tag<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage, source: e.into() })
    }
}

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const TOKENS_FILE: &str = "tokens.bin";
pub const GENERATED_SET_FILE: &str = "analogy_set.txt";
pub const COOC_FILE: &str = "cooccurrences.txt";
pub const STATS_FILE: &str = "stats.csv";
pub const WORDS_FILE: &str = "words.txt";
pub const CONTEXTS_FILE: &str = "contexts.txt";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const ANALOGY_FILE: &str = "analogy.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
const STAGE_DIR: &str = ".stages";
const SAMPLES_DIR: &str = "samples";

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub key: String,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    /// SHA-256 of every artifact, keyed by path relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
}

/// Deterministic suite output.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Report {
    pub vocab_checksum: String,
    pub model: String,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub report: Option<Report>,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha(path: &Path) -> anyhow::Result<String> {
    let mut h = Sha256::new();
    let mut f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn chain_key(prev: &str, stage: Stage, part: &impl Serialize) -> String {
    let body = serde_json::to_string(part).expect("serializable key part");
    sha_hex(format!("{prev}\n{stage}\n{body}").as_bytes())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

/// Runs stages up to and including `until`, reusing cached stage outputs
/// whose input key is unchanged.
pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    prev_key: String,
    records: Vec<StageRecord>,
}

struct Ingested {
    vocab: Vocabulary,
    tokens: Vec<u32>,
    set: Option<AnalogySet>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Self {
        let out = cfg.out_dir().to_path_buf();
        Pipeline {
            cfg,
            out,
            prev_key: String::new(),
            records: Vec::new(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Returns true when the stage's recorded key and outputs are present.
    fn cached(&self, stage: Stage, key: &str, outputs: &[&str]) -> bool {
        let marker = self.out.join(STAGE_DIR).join(stage.to_string());
        fs::read_to_string(marker).is_ok_and(|k| k == key) && outputs.iter().all(|o| self.path(o).is_file())
    }

    fn mark(&mut self, stage: Stage, key: String, skipped: bool) -> anyhow::Result<()> {
        if !skipped {
            let dir = self.out.join(STAGE_DIR);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join(stage.to_string()), &key)?;
        }
        self.prev_key = key.clone();
        self.records.push(StageRecord { stage, key, skipped });
        Ok(())
    }

    pub fn run(mut self, until: Stage) -> Result<RunOutcome, StageError> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))
            .at(Stage::Schema)?;
        let result = self.run_stages(until);
        // the manifest is written even when a stage fails, for inspection
        let manifest = self.write_manifest().at(Stage::Verify);
        let report = result?;
        Ok(RunOutcome {
            out_dir: self.out.clone(),
            manifest: manifest?,
            report,
        })
    }

    fn run_stages(&mut self, until: Stage) -> Result<Option<Report>, StageError> {
        let ing = self.ingest().at(Stage::Ingest)?;
        if until == Stage::Ingest {
            return Ok(None);
        }
        let table = self.count(&ing).at(Stage::Count)?;
        if until == Stage::Count {
            return Ok(None);
        }
        let stats = CorpusStats::new(table);
        self.stats(&stats, &ing.vocab).at(Stage::Stats)?;
        if until == Stage::Stats {
            return Ok(None);
        }
        let report = match self.cfg.precision {
            Precision::F32 => self.downstream::<f32>(&ing, &stats, until)?,
            Precision::F64 => self.downstream::<f64>(&ing, &stats, until)?,
        };
        Ok(report)
    }

    fn downstream<T: Real + nalgebra::RealField>(
        &mut self,
        ing: &Ingested,
        stats: &CorpusStats,
        until: Stage,
    ) -> Result<Option<Report>, StageError> {
        let space = self.embed::<T>(ing, stats).at(Stage::Embed)?;
        if until == Stage::Embed {
            return Ok(None);
        }
        let set = self.analogy_set(ing).at(Stage::Evaluate)?;
        self.evaluate(&space, &ing.vocab, set.as_ref()).at(Stage::Evaluate)?;
        if until == Stage::Evaluate {
            return Ok(None);
        }
        let space = space.cast::<f64>();
        let report = self.verify(&space, &ing.vocab, stats, set.as_ref()).at(Stage::Verify)?;
        Ok(Some(report))
    }

    fn ingest(&mut self) -> anyhow::Result<Ingested> {
        let source_id = match &self.cfg.corpus {
            CorpusSource::File { path } => file_sha(path)?,
            other => sha_hex(serde_json::to_string(other)?.as_bytes()),
        };
        let key = chain_key(
            "",
            Stage::Ingest,
            &(source_id, self.cfg.min_count, self.cfg.lowercase, self.cfg.seed),
        );
        let generated_set = matches!(self.cfg.corpus, CorpusSource::Analogy { .. });
        let mut outputs = vec![VOCAB_FILE, TOKENS_FILE];
        if generated_set {
            outputs.push(GENERATED_SET_FILE);
        }
        if self.cached(Stage::Ingest, &key, &outputs) {
            let vocab = io::read_vocab(open(&self.path(VOCAB_FILE))?)?;
            let tokens = read_tokens(&self.path(TOKENS_FILE))?;
            let set = if generated_set {
                Some(io::read_questions(open(&self.path(GENERATED_SET_FILE))?, GENERATED_SET_FILE, false)?)
            } else {
                None
            };
            self.mark(Stage::Ingest, key, true)?;
            return Ok(Ingested { vocab, tokens, set });
        }

        let (vocab, tokens, set) = match &self.cfg.corpus {
            CorpusSource::File { path } => {
                let vocab = ingest_corpus(open(path)?, self.cfg.min_count, self.cfg.lowercase)?;
                let mut text = String::new();
                open(path)?.read_to_string(&mut text)?;
                let lower;
                let text = if self.cfg.lowercase {
                    lower = text.to_lowercase();
                    &lower
                } else {
                    &text
                };
                let tokens = vocab.encode(text.split_whitespace());
                (vocab, tokens, None)
            }
            CorpusSource::Zipf { vocab_size, n_tokens, exponent } => {
                let ids = generate_zipf_corpus(*vocab_size, *n_tokens, *exponent, self.cfg.seed)?;
                let words: Vec<String> = ids.iter().map(|&i| zipf_word(i)).collect();
                let (vocab, tokens) = encode(&words, self.cfg.min_count, self.cfg.lowercase)?;
                (vocab, tokens, None)
            }
            CorpusSource::Analogy { params } => {
                let (words, set) = generate_analogy_corpus(params)?;
                let (vocab, tokens) = encode(&words, self.cfg.min_count, self.cfg.lowercase)?;
                (vocab, tokens, Some(set))
            }
        };
        let mut w = create(&self.path(VOCAB_FILE))?;
        io::write_vocab(&vocab, &mut w)?;
        w.flush()?;
        write_tokens(&self.path(TOKENS_FILE), &tokens)?;
        if let Some(set) = &set {
            let mut w = create(&self.path(GENERATED_SET_FILE))?;
            io::write_questions(set, &mut w)?;
            w.flush()?;
        }
        self.mark(Stage::Ingest, key, false)?;
        Ok(Ingested { vocab, tokens, set })
    }

    fn count(&mut self, ing: &Ingested) -> anyhow::Result<CooccurrenceTable> {
        let key = chain_key(&self.prev_key, Stage::Count, &self.cfg.window);
        if self.cached(Stage::Count, &key, &[COOC_FILE]) {
            let table = io::read_cooccurrences(open(&self.path(COOC_FILE))?)?;
            self.mark(Stage::Count, key, true)?;
            return Ok(table);
        }
        let table = count_cooccurrences_parallel(&ing.tokens, &ing.vocab, self.cfg.window, self.cfg.workers)?;
        let mut w = create(&self.path(COOC_FILE))?;
        io::write_cooccurrences(&table, &mut w)?;
        w.flush()?;
        self.mark(Stage::Count, key, false)?;
        Ok(table)
    }

    fn stats(&mut self, stats: &CorpusStats, vocab: &Vocabulary) -> anyhow::Result<()> {
        let key = chain_key(&self.prev_key, Stage::Stats, &());
        if self.cached(Stage::Stats, &key, &[STATS_FILE]) {
            return self.mark(Stage::Stats, key, true);
        }
        let mut w = create(&self.path(STATS_FILE))?;
        io::write_stats_csv(stats, vocab, &mut w)?;
        w.flush()?;
        self.mark(Stage::Stats, key, false)
    }

    fn embed<T: Real + nalgebra::RealField>(
        &mut self,
        ing: &Ingested,
        stats: &CorpusStats,
    ) -> anyhow::Result<EmbeddingSpace<T>> {
        let model = self.cfg.model;
        let sgns = (model == ModelKind::Sgns).then_some(&self.cfg.sgns);
        let key = chain_key(
            &self.prev_key,
            Stage::Embed,
            &(model.to_string(), self.cfg.shift_k, self.cfg.precision, sgns),
        );
        let provenance = match model {
            ModelKind::Exact => Provenance::Exact,
            ModelKind::Truncated(_) => Provenance::Truncated,
            ModelKind::Sgns => Provenance::Sgns,
        };
        let mut outputs = vec![WORDS_FILE, CONTEXTS_FILE];
        if model == ModelKind::Sgns {
            outputs.push(TRAINING_LOG_FILE);
        }
        if self.cached(Stage::Embed, &key, &outputs) {
            let space = io::read_space(
                &ing.vocab,
                open(&self.path(WORDS_FILE))?,
                open(&self.path(CONTEXTS_FILE))?,
                self.cfg.shift_k,
                provenance,
            )?;
            self.mark(Stage::Embed, key, true)?;
            return Ok(space);
        }
        let (space, log): (EmbeddingSpace<T>, Option<Vec<EpochLog>>) = match model {
            ModelKind::Sgns => {
                let out = train_sgns_with_log::<T>(&ing.tokens, &ing.vocab, &self.cfg.sgns)?;
                (out.space, Some(out.log))
            }
            ModelKind::Exact | ModelKind::Truncated(_) => {
                check_dense_order(ing.vocab.len(), DEFAULT_DENSE_CAP)?;
                let sparse = shifted_pmi_matrix(stats, self.cfg.shift_k)?;
                let m = CompletedMatrix::<T>::from_sparse(&sparse, self.cfg.shift_k, ing.vocab.checksum());
                let space = match model {
                    ModelKind::Truncated(d) => truncated_factorize(&m, d)?,
                    _ => exact_factorize(&m)?,
                };
                (space, None)
            }
        };
        let (mut w, mut c) = (create(&self.path(WORDS_FILE))?, create(&self.path(CONTEXTS_FILE))?);
        io::write_space(&space, &ing.vocab, &mut w, &mut c)?;
        w.flush()?;
        c.flush()?;
        if let Some(log) = log {
            let mut w = create(&self.path(TRAINING_LOG_FILE))?;
            io::write_training_log(&log, &mut w)?;
            w.flush()?;
        }
        self.mark(Stage::Embed, key, false)?;
        Ok(space)
    }

    fn analogy_set(&self, ing: &Ingested) -> anyhow::Result<Option<AnalogySet>> {
        match &self.cfg.analogy_path {
            Some(p) => {
                let source = p.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                Ok(Some(io::read_questions(open(p)?, &source, self.cfg.lowercase)?))
            }
            None => Ok(ing.set.clone()),
        }
    }

    fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            metric: self.cfg.metric,
            pool: self.cfg.pool,
        }
    }

    fn evaluate<T: Real>(
        &mut self,
        space: &EmbeddingSpace<T>,
        vocab: &Vocabulary,
        set: Option<&AnalogySet>,
    ) -> anyhow::Result<Vec<CategoryResult>> {
        let results = match set {
            Some(set) => evaluate_analogy_set(space, vocab, set, self.eval_options())?,
            None => Vec::new(),
        };
        let mut w = create(&self.path(ANALOGY_FILE))?;
        io::write_analogy_csv(&results, &mut w)?;
        w.flush()?;
        let key = chain_key(&self.prev_key, Stage::Evaluate, &(&self.cfg.analogy_path, self.eval_options()));
        self.mark(Stage::Evaluate, key, false)?;
        Ok(results)
    }

    fn verify(
        &mut self,
        space: &EmbeddingSpace<f64>,
        vocab: &Vocabulary,
        stats: &CorpusStats,
        set: Option<&AnalogySet>,
    ) -> anyhow::Result<Report> {
        let th = &self.cfg.thresholds;
        let pairs = theorem::sample_observed_pairs(stats, self.cfg.pair_samples, self.cfg.seed);
        let mut reports = Vec::new();
        for check in &self.cfg.checks {
            match check {
                CheckName::CspmiIdentity => reports.push(theorem::cspmi_identity_check(space, stats, &pairs, th)),
                CheckName::EuclidCspmi => {
                    reports.push(theorem::euclid_cspmi_correlation(space, stats, &pairs, false, th));
                    reports.push(theorem::euclid_cspmi_correlation(space, stats, &pairs, true, th));
                }
                CheckName::ShiftedPmi => reports.push(theorem::shifted_pmi_correlation(space, stats, th)),
                CheckName::Noise => {
                    let m = shifted_pmi_matrix(stats, space.shift_k)?;
                    let noise = noise_by_frequency(space, &m, stats.table(), self.cfg.noise_bins)?;
                    reports.push(theorem::noise_monotonicity_check(&noise, th));
                }
                CheckName::Pennington => {
                    if let Some(set) = set {
                        let (quads, solved) = quadruples(space, vocab, set, self.cfg.metric)?;
                        reports.push(theorem::pennington_check(stats, &quads, Some(&solved)));
                    }
                }
                CheckName::Analogy => {
                    if let Some(set) = set {
                        let rep = theorem::analogy_report(space, vocab, stats, set, self.eval_options())?;
                        reports.push(theorem::analogy_report_check(&rep));
                    }
                }
                CheckName::SelfCooccurrence => reports.push(theorem::zipf_self_cooccurrence_check(stats, th)),
                CheckName::Lambda => reports.push(theorem::lambda_estimate(space, th)),
            }
        }
        theorem::sort_reports(&mut reports);

        let samples_dir = self.path(SAMPLES_DIR);
        fs::create_dir_all(&samples_dir)?;
        for rep in &reports {
            let mut w = create(&samples_dir.join(format!("{}.csv", rep.name)))?;
            io::write_samples_csv(&rep.samples, ("x", "y"), &mut w)?;
            w.flush()?;
        }

        let report = Report {
            vocab_checksum: vocab.checksum().to_string(),
            model: self.cfg.model.to_string(),
            seed: self.cfg.seed,
            checks: reports,
        };
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(self.path(REPORT_FILE), json)?;
        fs::write(self.path(TABLE_FILE), report::render_table(&report))?;
        let key = chain_key(&self.prev_key, Stage::Verify, &(&self.cfg.checks, self.cfg.pair_samples, th));
        self.mark(Stage::Verify, key, false)?;
        Ok(report)
    }

    fn write_manifest(&self) -> anyhow::Result<Manifest> {
        let mut artifacts = BTreeMap::new();
        let mut paths = Vec::new();
        collect_files(&self.out, &mut paths)?;
        for p in paths {
            let rel = p.strip_prefix(&self.out)?.to_string_lossy().replace('\\', "/");
            if rel == MANIFEST_FILE || rel.starts_with(STAGE_DIR) {
                continue;
            }
            artifacts.insert(rel, file_sha(&p)?);
        }
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.cfg.clone(),
            stages: self.records.clone(),
            artifacts,
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(self.path(MANIFEST_FILE), json)?;
        Ok(manifest)
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn encode(words: &[String], min_count: u64, lowercase: bool) -> anyhow::Result<(Vocabulary, Vec<u32>)> {
    let corpus = cspmi_core::Corpus::from_tokens(words.iter().map(String::as_str), min_count, lowercase)?;
    Ok((corpus.vocab, corpus.tokens))
}

fn write_tokens(path: &Path, tokens: &[u32]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for t in tokens {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_tokens(path: &Path) -> anyhow::Result<Vec<u32>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(anyhow!("{} is truncated", path.display()));
    }
    Ok(bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

/// In-vocabulary quadruples `[x1, y1, x2, y2]` for every ordered pair of
/// pairs within a category, with whether `x1 : y1 :: x2 : ?` retrieves `y2`.
fn quadruples(
    space: &EmbeddingSpace<f64>,
    vocab: &Vocabulary,
    set: &AnalogySet,
    metric: cspmi_core::Metric,
) -> anyhow::Result<(Vec<[u32; 4]>, Vec<bool>)> {
    let solver = Solver::new(space, metric).with_top_n(1);
    let (mut quads, mut solved) = (Vec::new(), Vec::new());
    for cat in &set.categories {
        let ids: Vec<(u32, u32)> = cat
            .pairs
            .iter()
            .filter_map(|(x, y)| Some((vocab.id(x)?, vocab.id(y)?)))
            .collect();
        for (i, &(x1, y1)) in ids.iter().enumerate() {
            for &(x2, y2) in &ids[i + 1..] {
                if x1 == x2 {
                    continue;
                }
                quads.push([x1, y1, x2, y2]);
                solved.push(solver.solve_ids(x2, x1, y1, None)?.predicted == y2);
            }
        }
    }
    Ok((quads, solved))
}
