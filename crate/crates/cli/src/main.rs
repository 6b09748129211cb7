mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use arnmt::bleu::{bleu, bleu_uncased};
use arnmt::bpe::{apply_bpe, learn_bpe, undo_bpe, word_freqs, BpeModel, CONTINUATION};
use arnmt::corpus::{build_vocab, find_duplicates, load_parallel, read_tokenized, EOS};
use arnmt::lm::{lm_score_set, lm_train, NgramModel};
use arnmt::nmt::{self, beam_decode, load_checkpoint, save_checkpoint, NmtModel};
use arnmt::normalize::{normalize_arabic, truecase_apply, truecase_train, NormRules, TruecaseModel};
use arnmt::pipeline::{run_experiment, PipelineConfig};
use arnmt::segment::{detokenize, segment_corpus, simple_tokenize, CliticInventory, DetokTable};
use arnmt::{join_tokens, split_tokens, Error, Result, TokenSeq};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use io::{read_input, read_text, write_output, write_text};

#[derive(Parser)]
#[command(name = "arnmt", version, about = "Arabic-English translation pipeline tools")]
struct Cli {
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Input and output files; stdin/stdout when omitted.
#[derive(Args)]
struct Io {
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Orthographic normalization of Arabic text.
    Normalize {
        #[command(flatten)]
        io: Io,
        /// Rule table (TSV) replacing the built-in rules.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "-LRB-")]
        lrb: String,
        #[arg(long, default_value = "-RRB-")]
        rrb: String,
    },
    /// Split punctuation from words.
    Tokenize {
        #[command(flatten)]
        io: Io,
    },
    /// Clitic segmentation of tokenized Arabic.
    Segment {
        #[command(flatten)]
        io: Io,
        /// Clitic list, one `X+` or `+X` per line.
        #[arg(long)]
        clitics: Option<PathBuf>,
        /// Where to write the detokenization table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Rejoin segmented Arabic into surface words.
    Detokenize {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        clitics: Option<PathBuf>,
        /// Table written by `segment`; rules only when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Learn BPE merges from a tokenized corpus.
    BpeLearn {
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Target symbol vocabulary size.
        #[arg(long)]
        vocab: usize,
        #[arg(long)]
        model: PathBuf,
    },
    /// Split words into BPE subwords.
    BpeApply {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        model: PathBuf,
    },
    /// Join BPE subwords back into words.
    BpeUndo {
        #[command(flatten)]
        io: Io,
    },
    /// Learn the most frequent casing of every word.
    TruecaseTrain {
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Restore casing of lowercased text.
    Truecase {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train a Kneser-Ney n-gram model and write it as ARPA.
    LmTrain {
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 0.75)]
        discount: f64,
        #[arg(long)]
        model: PathBuf,
    },
    /// Average per-sentence log10 probability of a set.
    LmScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        set: Option<PathBuf>,
    },
    /// Build a frequency-ranked vocabulary.
    Vocab {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 30000)]
        max: usize,
    },
    /// Drop evaluation lines that also occur in the training data.
    Dedup {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        train: PathBuf,
    },
    /// Train the NMT model on preprocessed parallel files.
    Train {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        dev_src: PathBuf,
        #[arg(long)]
        dev_tgt: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        model: PathBuf,
        /// Per-epoch losses as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Beam-search decode preprocessed source lines.
    Translate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Corpus BLEU against one or more reference files.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref", required = true)]
        refs: Vec<PathBuf>,
        #[arg(long)]
        lowercase: bool,
        #[arg(long)]
        json: bool,
    },
    /// Preprocess, train, decode and score as described by `--config`.
    Experiment {
        /// Extra key=value settings applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn inventory(path: &Option<PathBuf>) -> Result<CliticInventory> {
    match path {
        Some(p) => CliticInventory::from_clitic_list(&read_text(p)?),
        None => Ok(CliticInventory::default()),
    }
}

fn map_lines(io: &Io, f: impl Fn(&str) -> String) -> Result<()> {
    let lines = read_input(io.input.as_deref())?;
    let out: Vec<String> = lines.iter().map(|l| f(l)).collect();
    write_output(io.output.as_deref(), &out)
}

fn tokenized(input: Option<&std::path::Path>) -> Result<Vec<TokenSeq>> {
    Ok(read_input(input)?.iter().map(|l| split_tokens(l)).collect())
}

fn with_eos(tokens: &[String], vocab: &arnmt::corpus::Vocab) -> Vec<usize> {
    let mut ids = vocab.encode(tokens);
    ids.push(EOS);
    ids
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Normalize { io, rules, lrb, rrb } => {
            let rules = match rules {
                Some(p) => NormRules::from_tsv(&read_text(p)?)?,
                None => NormRules::with_brackets(lrb, rrb)?,
            };
            map_lines(io, |l| normalize_arabic(l, &rules))
        }
        Command::Tokenize { io } => map_lines(io, |l| join_tokens(&simple_tokenize(l))),
        Command::Segment { io, clitics, table } => {
            let inv = inventory(clitics)?;
            let corpus = tokenized(io.input.as_deref())?;
            let (segmented, detok) = segment_corpus(&corpus, &inv);
            if let Some(t) = table {
                write_text(t, &detok.to_tsv())?;
                info!("{} table entries written to {}", detok.len(), t.display());
            }
            let lines: Vec<String> = segmented.iter().map(|s| join_tokens(s)).collect();
            write_output(io.output.as_deref(), &lines)
        }
        Command::Detokenize { io, clitics, table } => {
            let inv = inventory(clitics)?;
            let table = match table {
                Some(p) => DetokTable::from_tsv(&read_text(p)?, &inv)?,
                None => DetokTable::default(),
            };
            map_lines(io, |l| join_tokens(&detokenize(&split_tokens(l), &table, &inv)))
        }
        Command::BpeLearn { input, vocab, model } => {
            let corpus = tokenized(input.as_deref())?;
            let m = learn_bpe(&word_freqs(&corpus), *vocab)?;
            info!("learned {} merges", m.merges.len());
            write_text(model, &m.to_text())
        }
        Command::BpeApply { io, model } => {
            let m = BpeModel::from_text(&read_text(model)?)?;
            map_lines(io, |l| join_tokens(&apply_bpe(&split_tokens(l), &m)))
        }
        Command::BpeUndo { io } => map_lines(io, |l| {
            let toks = split_tokens(l);
            if toks.last().is_some_and(|t| t.ends_with(CONTINUATION)) {
                warn!("dangling `{CONTINUATION}` in: {l}");
            }
            join_tokens(&undo_bpe(&toks))
        }),
        Command::TruecaseTrain { input, model } => {
            let m = truecase_train(&tokenized(input.as_deref())?);
            write_text(model, &m.to_tsv())
        }
        Command::Truecase { io, model } => {
            let m = TruecaseModel::from_tsv(&read_text(model)?)?;
            map_lines(io, |l| join_tokens(&truecase_apply(&split_tokens(l), &m)))
        }
        Command::LmTrain { input, order, discount, model } => {
            let m = lm_train(&tokenized(input.as_deref())?, *order, *discount)?;
            m.save(model)
        }
        Command::LmScore { model, set } => {
            let m = NgramModel::load(model)?;
            let score = lm_score_set(&m, &tokenized(set.as_deref())?)?;
            println!("{score:.2}");
            Ok(())
        }
        Command::Vocab { io, max } => {
            let v = build_vocab(&tokenized(io.input.as_deref())?, *max)?;
            match &io.output {
                Some(p) => v.save(p),
                None => {
                    print!("{}", v.to_tsv());
                    Ok(())
                }
            }
        }
        Command::Dedup { io, train } => {
            let train = read_tokenized(train)?;
            let lines = read_input(io.input.as_deref())?;
            let eval: Vec<TokenSeq> = lines.iter().map(|l| split_tokens(l)).collect();
            let dups = find_duplicates(&train, &eval);
            info!("removed {} of {} lines found in training data", dups.len(), lines.len());
            let kept: Vec<String> = lines
                .into_iter()
                .enumerate()
                .filter(|(i, _)| dups.binary_search(i).is_err())
                .map(|(_, l)| l)
                .collect();
            write_output(io.output.as_deref(), &kept)
        }
        Command::Train { src, tgt, dev_src, dev_tgt, model, log } => {
            let cfg = pipeline_config(&cli)?;
            cfg.validate()?;
            let train = arnmt::corpus::filter_by_length(&load_parallel(src, tgt)?, cfg.max_train_len);
            let dev = load_parallel(dev_src, dev_tgt)?;
            let sv = build_vocab(&train.sources(), cfg.max_vocab)?;
            let tv = build_vocab(&train.targets(), cfg.max_vocab)?;
            let ids = |pairs: &[(TokenSeq, TokenSeq)]| -> Vec<nmt::IdPair> {
                pairs.iter().map(|(s, t)| (with_eos(s, &sv), with_eos(t, &tv))).collect()
            };
            let (train_ids, dev_ids) = (ids(&train.pairs), ids(&dev.pairs));
            let init = NmtModel::with_vocabs(cfg.nmt.clone(), sv.clone(), tv.clone())?;
            let out = nmt::train(&init, &train_ids, &dev_ids, &cfg.train)?;
            for e in &out.log {
                info!("epoch {} train {:.4} dev {:.4}", e.epoch, e.train_loss, e.dev_loss);
            }
            info!("best epoch {}", out.best_epoch);
            if let Some(p) = log {
                write_text(p, &(serde_json::to_string_pretty(&out.log)? + "\n"))?;
            }
            save_checkpoint(&out.model, model)
        }
        Command::Translate { io, model, beam, max_len } => {
            let cfg = pipeline_config(&cli)?;
            let m = load_checkpoint(model)?;
            let width = beam.unwrap_or(cfg.beam_width);
            let max_len = max_len.unwrap_or(cfg.max_decode_len);
            let mut out = Vec::new();
            for line in read_input(io.input.as_deref())? {
                let ids = beam_decode(&m, &with_eos(&split_tokens(&line), &m.src_vocab), width, max_len)?;
                out.push(join_tokens(&m.tgt_vocab.decode(&ids)));
            }
            write_output(io.output.as_deref(), &out)
        }
        Command::Bleu { hyp, refs, lowercase, json } => {
            let hyps = read_tokenized(hyp)?;
            let ref_files = refs.iter().map(|p| read_tokenized(p)).collect::<Result<Vec<_>>>()?;
            for r in &ref_files {
                if r.len() != hyps.len() {
                    return Err(Error::Alignment {
                        src_lines: hyps.len(),
                        tgt_lines: r.len(),
                    });
                }
            }
            let sets: Vec<Vec<TokenSeq>> = (0..hyps.len())
                .map(|i| ref_files.iter().map(|r| r[i].clone()).collect())
                .collect();
            let report = if *lowercase { bleu_uncased(&hyps, &sets)? } else { bleu(&hyps, &sets)? };
            if *json {
                println!("{}", report.to_json());
            } else {
                println!("{report}");
            }
            Ok(())
        }
        Command::Experiment { overrides } => {
            if cli.config.is_none() {
                return Err(Error::Config("`experiment` needs --config".into()));
            }
            let mut cfg = pipeline_config(&cli)?;
            for kv in overrides {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("expected KEY=VALUE, got `{kv}`")))?;
                cfg.set(k.trim(), v.trim())?;
            }
            let out = run_experiment(&cfg)?;
            println!("{}", out.report);
            Ok(())
        }
    }
}
