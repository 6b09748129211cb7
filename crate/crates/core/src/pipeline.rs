//! Preprocessing configurations and the end-to-end experiment runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bleu::{bleu, bleu_uncased, BleuReport};
use crate::bpe::{apply_bpe, learn_bpe, undo_bpe, word_freqs, BpeModel};
use crate::corpus::{build_vocab, filter_by_length, read_lines, write_lines, ParallelCorpus, Vocab, EOS};
use crate::nmt::{self, NmtConfig, NmtModel, TrainConfig};
use crate::normalize::{lowercase, normalize_arabic, truecase_apply, truecase_train, NormRules, TruecaseModel};
use crate::segment::{atb_segment, detokenize, segment_corpus, simple_tokenize, CliticInventory, DetokTable};
use crate::{join_tokens, split_tokens, Error, Result, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    Arabic,
    English,
}

impl Language {
    fn code(self) -> &'static str {
        match self {
            Language::Arabic => "ar",
            Language::English => "en",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ArEn,
    EnAr,
}

impl Direction {
    pub fn source(self) -> Language {
        match self {
            Direction::ArEn => Language::Arabic,
            Direction::EnAr => Language::English,
        }
    }

    pub fn target(self) -> Language {
        match self {
            Direction::ArEn => Language::English,
            Direction::EnAr => Language::Arabic,
        }
    }
}

/// Arabic-side steps; `atb` implies `norm` implies `tok`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArabicSteps {
    pub tok: bool,
    pub norm: bool,
    pub atb: bool,
}

/// English-side steps; `lower` and `truecase` exclude each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnglishSteps {
    pub tok: bool,
    pub lower: bool,
    pub truecase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub direction: Direction,
    pub arabic: ArabicSteps,
    pub english: EnglishSteps,
    /// Target BPE vocabulary per side; 0 disables BPE.
    pub bpe_vocab: usize,
    /// Maximum id-vocabulary size per side, reserved ids included.
    pub max_vocab: usize,
    /// Training pairs longer than this (after preprocessing) are dropped.
    pub max_train_len: usize,
    pub nmt: NmtConfig,
    pub train: TrainConfig,
    pub beam_width: usize,
    pub max_decode_len: usize,
    pub lowercase_bleu: bool,
    pub train_src: Option<PathBuf>,
    pub train_tgt: Option<PathBuf>,
    pub dev_src: Option<PathBuf>,
    pub dev_tgt: Option<PathBuf>,
    pub test_src: Option<PathBuf>,
    pub test_refs: Vec<PathBuf>,
    pub work_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            direction: Direction::ArEn,
            arabic: ArabicSteps {
                tok: true,
                norm: false,
                atb: false,
            },
            english: EnglishSteps {
                tok: true,
                lower: false,
                truecase: false,
            },
            bpe_vocab: 0,
            max_vocab: 30_000,
            max_train_len: 100,
            nmt: NmtConfig::default(),
            train: TrainConfig::default(),
            beam_width: 12,
            max_decode_len: 100,
            lowercase_bleu: false,
            train_src: None,
            train_tgt: None,
            dev_src: None,
            dev_tgt: None,
            test_src: None,
            test_refs: Vec::new(),
            work_dir: PathBuf::from("work"),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let a = self.arabic;
        if a.atb && !a.norm {
            return Err(Error::Config("ar.atb requires ar.norm".into()));
        }
        if a.norm && !a.tok {
            return Err(Error::Config("ar.norm requires ar.tok".into()));
        }
        if self.english.lower && self.english.truecase {
            return Err(Error::Config("en.lower and en.true are mutually exclusive".into()));
        }
        if self.max_vocab <= 4 {
            return Err(Error::Config("vocab.max must exceed 4".into()));
        }
        if self.beam_width == 0 || self.max_decode_len == 0 {
            return Err(Error::Config("decode.beam and decode.max_len must be at least 1".into()));
        }
        if self.train.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        let mut probe = self.nmt.clone();
        probe.src_vocab_size = 5;
        probe.tgt_vocab_size = 5;
        probe.validate()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "direction" => {
                self.direction = match v {
                    "ar-en" => Direction::ArEn,
                    "en-ar" => Direction::EnAr,
                    _ => return Err(Error::Config(format!("direction must be ar-en or en-ar, got `{v}`"))),
                }
            }
            k @ "ar.tok" => self.arabic.tok = parse_bool(k, v)?,
            k @ "ar.norm" => self.arabic.norm = parse_bool(k, v)?,
            k @ "ar.atb" => self.arabic.atb = parse_bool(k, v)?,
            k @ "en.tok" => self.english.tok = parse_bool(k, v)?,
            k @ "en.lower" => self.english.lower = parse_bool(k, v)?,
            k @ "en.true" => self.english.truecase = parse_bool(k, v)?,
            k @ "bpe.vocab" => self.bpe_vocab = parse_num(k, v)?,
            k @ "vocab.max" => self.max_vocab = parse_num(k, v)?,
            k @ "filter.max_len" => self.max_train_len = parse_num(k, v)?,
            k @ "seed" => self.nmt.seed = parse_num(k, v)?,
            k @ "nmt.embed_dim" => self.nmt.embed_dim = parse_num(k, v)?,
            k @ "nmt.enc_hidden" => self.nmt.enc_hidden = parse_num(k, v)?,
            k @ "nmt.enc_layers" => self.nmt.enc_layers = parse_num(k, v)?,
            k @ "nmt.dec_hidden" => self.nmt.dec_hidden = parse_num(k, v)?,
            k @ "nmt.attn_hidden" => self.nmt.attn_hidden = parse_num(k, v)?,
            k @ "nmt.dropout" => self.nmt.dropout_rate = parse_num(k, v)?,
            k @ "nmt.l2" => self.nmt.l2_coeff = parse_num(k, v)?,
            k @ "nmt.init_scale" => self.nmt.init_scale = parse_num(k, v)?,
            k @ "train.max_epochs" => self.train.max_epochs = parse_num(k, v)?,
            k @ "train.batch_size" => self.train.batch_size = parse_num(k, v)?,
            k @ "train.patience" => self.train.patience = parse_num(k, v)?,
            k @ "train.rho" => self.train.rho = parse_num(k, v)?,
            k @ "train.epsilon" => self.train.epsilon = parse_num(k, v)?,
            k @ "decode.beam" => self.beam_width = parse_num(k, v)?,
            k @ "decode.max_len" => self.max_decode_len = parse_num(k, v)?,
            k @ "bleu.lowercase" => self.lowercase_bleu = parse_bool(k, v)?,
            "train.src" => self.train_src = Some(v.into()),
            "train.tgt" => self.train_tgt = Some(v.into()),
            "dev.src" => self.dev_src = Some(v.into()),
            "dev.tgt" => self.dev_tgt = Some(v.into()),
            "test.src" => self.test_src = Some(v.into()),
            "test.ref" => {
                self.test_refs = v.split(',').map(|p| PathBuf::from(p.trim())).collect();
            }
            "work_dir" => self.work_dir = v.into(),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base` when given.
    pub fn from_text(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path.parent())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.train_src,
            &mut self.train_tgt,
            &mut self.dev_src,
            &mut self.dev_tgt,
            &mut self.test_src,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.test_refs.iter_mut().for_each(fix);
        fix(&mut self.work_dir);
    }

    /// Canonical settings without paths, one `key = value` per line.
    pub fn settings_text(&self) -> String {
        let dir = match self.direction {
            Direction::ArEn => "ar-en",
            Direction::EnAr => "en-ar",
        };
        let n = &self.nmt;
        let t = &self.train;
        let mut out = String::new();
        let pairs: Vec<(&str, String)> = vec![
            ("direction", dir.into()),
            ("ar.tok", self.arabic.tok.to_string()),
            ("ar.norm", self.arabic.norm.to_string()),
            ("ar.atb", self.arabic.atb.to_string()),
            ("en.tok", self.english.tok.to_string()),
            ("en.lower", self.english.lower.to_string()),
            ("en.true", self.english.truecase.to_string()),
            ("bpe.vocab", self.bpe_vocab.to_string()),
            ("vocab.max", self.max_vocab.to_string()),
            ("filter.max_len", self.max_train_len.to_string()),
            ("seed", n.seed.to_string()),
            ("nmt.embed_dim", n.embed_dim.to_string()),
            ("nmt.enc_hidden", n.enc_hidden.to_string()),
            ("nmt.enc_layers", n.enc_layers.to_string()),
            ("nmt.dec_hidden", n.dec_hidden.to_string()),
            ("nmt.attn_hidden", n.attn_hidden.to_string()),
            ("nmt.dropout", n.dropout_rate.to_string()),
            ("nmt.l2", n.l2_coeff.to_string()),
            ("nmt.init_scale", n.init_scale.to_string()),
            ("train.max_epochs", t.max_epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.rho", t.rho.to_string()),
            ("train.epsilon", t.epsilon.to_string()),
            ("decode.beam", self.beam_width.to_string()),
            ("decode.max_len", self.max_decode_len.to_string()),
            ("bleu.lowercase", self.lowercase_bleu.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Everything learned from the training data that later steps need.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub src_bpe: Option<BpeModel>,
    pub tgt_bpe: Option<BpeModel>,
    pub detok: Option<DetokTable>,
    pub truecase: Option<TruecaseModel>,
}

const SRC_BPE: &str = "bpe.src.model";
const TGT_BPE: &str = "bpe.tgt.model";
const DETOK: &str = "detok.ar.tsv";
const TRUECASE: &str = "truecase.en.tsv";

fn read_artifact(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl Artifacts {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if let Some(m) = &self.src_bpe {
            write_file(&dir.join(SRC_BPE), &m.to_text())?;
        }
        if let Some(m) = &self.tgt_bpe {
            write_file(&dir.join(TGT_BPE), &m.to_text())?;
        }
        if let Some(t) = &self.detok {
            write_file(&dir.join(DETOK), &t.to_tsv())?;
        }
        if let Some(t) = &self.truecase {
            write_file(&dir.join(TRUECASE), &t.to_tsv())?;
        }
        Ok(())
    }

    /// Loads the artifacts `cfg` requires; a required file that is absent is
    /// reported by name.
    pub fn load(dir: &Path, cfg: &PipelineConfig) -> Result<Self> {
        let mut a = Artifacts::default();
        if cfg.bpe_vocab > 0 {
            a.src_bpe = Some(BpeModel::from_text(&read_artifact(dir, SRC_BPE)?)?);
            a.tgt_bpe = Some(BpeModel::from_text(&read_artifact(dir, TGT_BPE)?)?);
        }
        if cfg.arabic.atb {
            a.detok = Some(DetokTable::from_tsv(&read_artifact(dir, DETOK)?, &CliticInventory::default())?);
        }
        if cfg.english.truecase {
            a.truecase = Some(TruecaseModel::from_tsv(&read_artifact(dir, TRUECASE)?)?);
        }
        Ok(a)
    }
}

/// Normalization, tokenization and casing for one language, before any
/// clitic segmentation.
fn surface_tokens(line: &str, lang: Language, cfg: &PipelineConfig, rules: &NormRules) -> TokenSeq {
    match lang {
        Language::Arabic => {
            let text = if cfg.arabic.norm {
                normalize_arabic(line, rules)
            } else {
                line.to_owned()
            };
            if cfg.arabic.tok {
                simple_tokenize(&text)
            } else {
                split_tokens(&text)
            }
        }
        Language::English => {
            let toks = if cfg.english.tok {
                simple_tokenize(line)
            } else {
                split_tokens(line)
            };
            if cfg.english.lower {
                toks.iter().map(|t| lowercase(t)).collect()
            } else {
                toks
            }
        }
    }
}

/// Word-level processing of one side given learned artifacts (no BPE).
fn word_level(lines: &[String], lang: Language, cfg: &PipelineConfig, arts: &Artifacts) -> Vec<TokenSeq> {
    let rules = NormRules::default();
    let inv = CliticInventory::default();
    lines
        .iter()
        .map(|l| {
            let toks = surface_tokens(l, lang, cfg, &rules);
            match lang {
                Language::Arabic if cfg.arabic.atb => toks.iter().flat_map(|t| atb_segment(t, &inv)).collect(),
                Language::English if cfg.english.truecase => match &arts.truecase {
                    Some(m) => truecase_apply(&toks, m),
                    None => toks,
                },
                _ => toks,
            }
        })
        .collect()
}

fn apply_bpe_all(seqs: Vec<TokenSeq>, model: Option<&BpeModel>) -> Vec<TokenSeq> {
    match model {
        Some(m) => seqs.iter().map(|s| apply_bpe(s, m)).collect(),
        None => seqs,
    }
}

/// Output of [`run_preprocess`].
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub corpus: ParallelCorpus,
    pub artifacts: Artifacts,
}

/// Learns artifacts from raw training lines and applies every enabled step
/// in the order normalize, tokenize, segment, BPE.
pub fn run_preprocess(cfg: &PipelineConfig, src_lines: &[String], tgt_lines: &[String]) -> Result<Preprocessed> {
    cfg.validate()?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::Alignment {
            src_lines: src_lines.len(),
            tgt_lines: tgt_lines.len(),
        });
    }
    let rules = NormRules::default();
    let inv = CliticInventory::default();
    let mut arts = Artifacts::default();
    let mut sides = Vec::with_capacity(2);
    for (lines, lang) in [(src_lines, cfg.direction.source()), (tgt_lines, cfg.direction.target())] {
        let toks: Vec<TokenSeq> = lines.iter().map(|l| surface_tokens(l, lang, cfg, &rules)).collect();
        let words = match lang {
            Language::Arabic if cfg.arabic.atb => {
                let (seg, table) = segment_corpus(&toks, &inv);
                arts.detok = Some(table);
                seg
            }
            Language::English if cfg.english.truecase => {
                let model = truecase_train(&toks);
                let out = toks.iter().map(|s| truecase_apply(s, &model)).collect();
                arts.truecase = Some(model);
                out
            }
            _ => toks,
        };
        sides.push(words);
    }
    if cfg.bpe_vocab > 0 {
        arts.src_bpe = Some(learn_bpe(&word_freqs(&sides[0]), cfg.bpe_vocab)?);
        arts.tgt_bpe = Some(learn_bpe(&word_freqs(&sides[1]), cfg.bpe_vocab)?);
    }
    let tgt = apply_bpe_all(sides.pop().expect("two sides"), arts.tgt_bpe.as_ref());
    let src = apply_bpe_all(sides.pop().expect("two sides"), arts.src_bpe.as_ref());
    let mut corpus = ParallelCorpus::new(src.into_iter().zip(tgt).collect());
    corpus.side_labels = (
        cfg.direction.source().code().to_owned(),
        cfg.direction.target().code().to_owned(),
    );
    Ok(Preprocessed {
        corpus,
        artifacts: arts,
    })
}

/// Applies the preprocessing of one side with already-learned artifacts.
pub fn preprocess_side(cfg: &PipelineConfig, lines: &[String], source_side: bool, arts: &Artifacts) -> Vec<TokenSeq> {
    let (lang, bpe) = if source_side {
        (cfg.direction.source(), arts.src_bpe.as_ref())
    } else {
        (cfg.direction.target(), arts.tgt_bpe.as_ref())
    };
    apply_bpe_all(word_level(lines, lang, cfg, arts), bpe)
}

/// Inverts target-side preprocessing: undo BPE, detokenize clitics,
/// truecase, then join.
pub fn run_postprocess(cfg: &PipelineConfig, decoded: &[TokenSeq], arts: &Artifacts) -> Result<Vec<String>> {
    let lang = cfg.direction.target();
    let inv = CliticInventory::default();
    let needs = |present: bool, name: &str| {
        if present {
            Ok(())
        } else {
            Err(Error::MissingArtifact(PathBuf::from(name)))
        }
    };
    if cfg.bpe_vocab > 0 {
        needs(arts.tgt_bpe.is_some(), TGT_BPE)?;
    }
    let atb = lang == Language::Arabic && cfg.arabic.atb;
    let truecase = lang == Language::English && cfg.english.truecase;
    if atb {
        needs(arts.detok.is_some(), DETOK)?;
    }
    if truecase {
        needs(arts.truecase.is_some(), TRUECASE)?;
    }
    Ok(decoded
        .iter()
        .map(|s| {
            let mut toks = if cfg.bpe_vocab > 0 { undo_bpe(s) } else { s.clone() };
            if let (true, Some(t)) = (atb, &arts.detok) {
                toks = detokenize(&toks, t, &inv);
            }
            if let (true, Some(m)) = (truecase, &arts.truecase) {
                toks = truecase_apply(&toks, m);
            }
            join_tokens(&toks)
        })
        .collect())
}

/// Tokenization used on both hypotheses and references before scoring.
pub fn bleu_tokens(line: &str, lang: Language, cfg: &PipelineConfig) -> TokenSeq {
    match lang {
        Language::Arabic if cfg.arabic.norm => simple_tokenize(&normalize_arabic(line, &NormRules::default())),
        Language::English if cfg.english.lower => simple_tokenize(&lowercase(line)),
        _ => simple_tokenize(line),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub settings: String,
    /// File name to checksum for every input and artifact.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
    pub bleu: f64,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: BleuReport,
    pub hypotheses: Vec<String>,
    pub train_log: Vec<nmt::EpochStats>,
    pub manifest: Manifest,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("`{key}` is not set")))
}

fn encode_with_eos(seq: &[String], vocab: &Vocab) -> Vec<usize> {
    let mut ids = vocab.encode(seq);
    ids.push(EOS);
    ids
}

/// Preprocess, train, decode the test set with beam search, postprocess and
/// score. Every file lands in `cfg.work_dir`; a failing stage is reported by
/// name and leaves earlier outputs in place.
pub fn run_experiment(cfg: &PipelineConfig) -> Result<ExperimentOutcome> {
    stage("config", cfg.validate())?;
    let work = cfg.work_dir.clone();
    stage("setup", fs::create_dir_all(&work).map_err(|e| Error::io(&work, e)))?;

    let paths = stage(
        "config",
        (|| {
            Ok((
                required(&cfg.train_src, "train.src")?,
                required(&cfg.train_tgt, "train.tgt")?,
                required(&cfg.dev_src, "dev.src")?,
                required(&cfg.dev_tgt, "dev.tgt")?,
                required(&cfg.test_src, "test.src")?,
            ))
        })(),
    )?;
    if cfg.test_refs.is_empty() {
        return stage("config", Err(Error::Config("`test.ref` is not set".into())));
    }
    let (train_src, train_tgt, dev_src, dev_tgt, test_src) = paths;

    let mut inputs = BTreeMap::new();
    let (pre, dev, test_src_seqs, refs) = stage(
        "preprocess",
        (|| {
            let mut read = |key: &str, p: &Path| -> Result<Vec<String>> {
                inputs.insert(key.to_owned(), sha256_file(p)?);
                read_lines(p)
            };
            let tr_s = read("train.src", train_src)?;
            let tr_t = read("train.tgt", train_tgt)?;
            let dv_s = read("dev.src", dev_src)?;
            let dv_t = read("dev.tgt", dev_tgt)?;
            let te_s = read("test.src", test_src)?;
            let mut refs = Vec::new();
            for (i, p) in cfg.test_refs.iter().enumerate() {
                refs.push(read(&format!("test.ref{i}"), p)?);
            }
            if dv_s.len() != dv_t.len() {
                return Err(Error::Alignment {
                    src_lines: dv_s.len(),
                    tgt_lines: dv_t.len(),
                });
            }
            for r in &refs {
                if r.len() != te_s.len() {
                    return Err(Error::Alignment {
                        src_lines: te_s.len(),
                        tgt_lines: r.len(),
                    });
                }
            }
            let pre = run_preprocess(cfg, &tr_s, &tr_t)?;
            pre.artifacts.save(&work)?;
            let dev = ParallelCorpus::new(
                preprocess_side(cfg, &dv_s, true, &pre.artifacts)
                    .into_iter()
                    .zip(preprocess_side(cfg, &dv_t, false, &pre.artifacts))
                    .collect(),
            );
            let test = preprocess_side(cfg, &te_s, true, &pre.artifacts);
            let lines = |seqs: &[TokenSeq]| seqs.iter().map(|s| join_tokens(s)).collect::<Vec<_>>();
            write_lines(&work.join("train.pp.src"), &lines(&pre.corpus.sources()))?;
            write_lines(&work.join("train.pp.tgt"), &lines(&pre.corpus.targets()))?;
            write_lines(&work.join("test.pp.src"), &lines(&test))?;
            Ok((pre, dev, test, refs))
        })(),
    )?;

    let (model, train_log) = stage(
        "train",
        (|| {
            let train_corpus = filter_by_length(&pre.corpus, cfg.max_train_len);
            let src_vocab = build_vocab(&train_corpus.sources(), cfg.max_vocab)?;
            let tgt_vocab = build_vocab(&train_corpus.targets(), cfg.max_vocab)?;
            src_vocab.save(&work.join("vocab.src.tsv"))?;
            tgt_vocab.save(&work.join("vocab.tgt.tsv"))?;
            let ids = |c: &ParallelCorpus| -> Vec<nmt::IdPair> {
                c.pairs
                    .iter()
                    .map(|(s, t)| (encode_with_eos(s, &src_vocab), encode_with_eos(t, &tgt_vocab)))
                    .collect()
            };
            let train_ids = ids(&train_corpus);
            let dev_ids = ids(&dev);
            let init = NmtModel::with_vocabs(cfg.nmt.clone(), src_vocab.clone(), tgt_vocab.clone())?;
            let out = nmt::train(&init, &train_ids, &dev_ids, &cfg.train)?;
            nmt::save_checkpoint(&out.model, &work.join("model.ckpt"))?;
            write_file(&work.join("train_log.json"), &serde_json::to_string_pretty(&out.log)?)?;
            Ok((out.model, out.log))
        })(),
    )?;

    let hypotheses = stage(
        "decode",
        (|| {
            let mut decoded = Vec::with_capacity(test_src_seqs.len());
            for s in &test_src_seqs {
                let src = encode_with_eos(s, &model.src_vocab);
                let out = nmt::beam_decode(&model, &src, cfg.beam_width, cfg.max_decode_len)?;
                decoded.push(model.tgt_vocab.decode(&out));
            }
            let lines: Vec<String> = decoded.iter().map(|s| join_tokens(s)).collect();
            write_lines(&work.join("test.decoded"), &lines)?;
            let arts = Artifacts::load(&work, cfg)?;
            let hyp = run_postprocess(cfg, &decoded, &arts)?;
            write_lines(&work.join("test.hyp"), &hyp)?;
            Ok(hyp)
        })(),
    )?;

    let report = stage(
        "evaluate",
        (|| {
            let lang = cfg.direction.target();
            let hyp: Vec<TokenSeq> = hypotheses.iter().map(|l| bleu_tokens(l, lang, cfg)).collect();
            let ref_sets: Vec<Vec<TokenSeq>> = (0..hyp.len())
                .map(|i| refs.iter().map(|r| bleu_tokens(&r[i], lang, cfg)).collect())
                .collect();
            let report = if cfg.lowercase_bleu {
                bleu_uncased(&hyp, &ref_sets)?
            } else {
                bleu(&hyp, &ref_sets)?
            };
            write_file(&work.join("bleu.json"), &report.to_json())?;
            Ok(report)
        })(),
    )?;

    let manifest = stage(
        "manifest",
        (|| {
            let settings = cfg.settings_text();
            let mut hasher = Sha256::new();
            hasher.update(settings.as_bytes());
            for (k, v) in &inputs {
                hasher.update(format!("{k}={v}\n").as_bytes());
            }
            let config_sha256 = sha256_hex(&hasher.finalize());
            let mut artifacts = BTreeMap::new();
            let mut names: Vec<String> = fs::read_dir(&work)
                .map_err(|e| Error::io(&work, e))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n != "manifest.json")
                .collect();
            names.sort();
            for n in names {
                artifacts.insert(n.clone(), sha256_file(&work.join(&n))?);
            }
            let manifest = Manifest {
                config_sha256,
                seed: cfg.nmt.seed,
                settings,
                inputs: inputs.clone(),
                artifacts,
                bleu: report.bleu,
            };
            write_file(&work.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
            Ok(manifest)
        })(),
    )?;

    Ok(ExperimentOutcome {
        report,
        hypotheses,
        train_log,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn cfg(text: &str) -> PipelineConfig {
        PipelineConfig::from_text(text, None).unwrap()
    }

    #[test]
    fn nesting_is_validated() {
        let e = PipelineConfig::from_text("ar.atb = true\nar.norm = false", None).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(PipelineConfig::from_text("ar.norm = true\nar.tok = false", None).is_err());
        assert!(PipelineConfig::from_text("en.lower = true\nen.true = true", None).is_err());
        assert!(PipelineConfig::from_text("bogus = 1", None).is_err());
        assert!(PipelineConfig::from_text("ar.norm = maybe", None).is_err());
    }

    #[test]
    fn grid_rows_parse() {
        for ar in ["ar.tok = true", "ar.norm = true", "ar.norm = true\nar.atb = true"] {
            for en in ["en.tok = true", "en.lower = true", "en.true = true"] {
                for dir in ["ar-en", "en-ar"] {
                    let text = format!("direction = {dir}\n{ar}\n{en}\n");
                    cfg(&text);
                }
            }
        }
    }

    #[test]
    fn settings_text_round_trips() {
        let c = cfg("direction = en-ar\nar.norm = true\nar.atb = true\nen.lower = true\nbpe.vocab = 50\nseed = 7");
        assert_eq!(cfg(&c.settings_text()), PipelineConfig { work_dir: c.work_dir.clone(), ..c.clone() });
    }

    #[test]
    fn tok_only_equals_simple_tokenize() {
        let c = cfg("direction = ar-en");
        let src = lines(&["قال: نعم.", "(هذا) كتاب"]);
        let tgt = lines(&["He said: yes.", "(this) book"]);
        let pre = run_preprocess(&c, &src, &tgt).unwrap();
        for (i, (s, t)) in pre.corpus.pairs.iter().enumerate() {
            assert_eq!(s, &simple_tokenize(&src[i]));
            assert_eq!(t, &simple_tokenize(&tgt[i]));
        }
    }

    #[test]
    fn atb_config_segments_worked_example() {
        let c = cfg("direction = ar-en\nar.norm = true\nar.atb = true");
        let pre = run_preprocess(&c, &lines(&["ولمركبته"]), &lines(&["and for his vehicle"])).unwrap();
        assert_eq!(join_tokens(&pre.corpus.pairs[0].0), "و+ ل+ مركبة +ه");
    }

    #[test]
    fn postprocess_inverts_preprocess() {
        let c = cfg("direction = en-ar\nar.norm = true\nar.atb = true\nbpe.vocab = 40");
        let ar = lines(&["وكتابهم في المدرسة", "ولمركبته وسيارتهم", "بالكتاب ( جديد )"]);
        let en = lines(&["their book at school", "for his vehicle and their car", "with the book (new)"]);
        let pre = run_preprocess(&c, &en, &ar).unwrap();
        let out = run_postprocess(&c, &pre.corpus.targets(), &pre.artifacts).unwrap();
        let rules = NormRules::default();
        let expect: Vec<String> = ar
            .iter()
            .map(|l| join_tokens(&simple_tokenize(&normalize_arabic(l, &rules))))
            .collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn missing_artifact_is_named() {
        let c = cfg("direction = en-ar\nar.norm = true\nar.atb = true");
        let err = run_postprocess(&c, &[], &Artifacts::default()).unwrap_err();
        assert!(err.to_string().contains(DETOK), "{err}");
        let dir = tempfile::tempdir().unwrap();
        let err = Artifacts::load(dir.path(), &c).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }

    #[test]
    fn bpe_only_postprocess_undoes_bpe() {
        let c = cfg("bpe.vocab = 30");
        let decoded = vec![split_tokens("lo@@ w@@ er new@@")];
        let arts = Artifacts {
            tgt_bpe: Some(BpeModel::new(vec![], 30).unwrap()),
            ..Artifacts::default()
        };
        assert_eq!(run_postprocess(&c, &decoded, &arts).unwrap(), vec!["lower new".to_owned()]);
    }
}
