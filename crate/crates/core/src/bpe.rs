//! Byte pair encoding over pre-tokenized text.
//!
//! Words start as characters with the last one marked end-of-word
//! (`</w>`). Pair frequencies count every adjacent position, weighted by
//! word frequency; a merge rewrites occurrences left to right without
//! overlap. Applied subwords carry `@@` on every non-final piece.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use log::warn;

use crate::{Error, Result, TokenSeq};

pub const END_OF_WORD: &str = "</w>";
pub const CONTINUATION: &str = "@@";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    pub merges: Vec<(String, String)>,
    pub target_vocab_size: usize,
    ranks: HashMap<(String, String), usize>,
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>, target_vocab_size: usize) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, pair) in merges.iter().enumerate() {
            if ranks.insert(pair.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate merge `{} {}`",
                    pair.0, pair.1
                )));
            }
        }
        Ok(BpeModel {
            merges,
            target_vocab_size,
            ranks,
        })
    }

    /// `#bpe v1 vocab=<N>` followed by one `left right` merge per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("#bpe v1 vocab={}\n", self.target_vocab_size);
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l} {r}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "empty BPE model"))?;
        let vocab = header
            .strip_prefix("#bpe v1 vocab=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(1, format!("bad header `{header}`")))?;
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut it = line.split(' ');
            match (it.next(), it.next(), it.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_owned(), r.to_owned()))
                }
                _ => return Err(Error::parse(i + 2, format!("bad merge line `{line}`"))),
            }
        }
        Self::new(merges, vocab)
    }

    /// Segments one word by replaying the merges in learned order.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        let mut last_rank: Option<usize> = None;
        loop {
            let next = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).copied())
                .filter(|&r| last_rank.is_none_or(|l| r > l))
                .min();
            let Some(rank) = next else { break };
            let (l, r) = &self.merges[rank];
            symbols = merge_word(&symbols, l, r);
            last_rank = Some(rank);
        }
        symbols
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == chars.len() {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn merge_word(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Word-type frequencies of a tokenized corpus.
pub fn word_freqs(corpus: &[TokenSeq]) -> BTreeMap<String, usize> {
    let mut freqs = BTreeMap::new();
    for sent in corpus {
        for w in sent {
            *freqs.entry(w.clone()).or_default() += 1;
        }
    }
    freqs
}

/// Distinct initial symbols of a word list.
pub fn initial_vocab_size(word_freqs: &BTreeMap<String, usize>) -> usize {
    word_freqs
        .keys()
        .flat_map(|w| initial_symbols(w))
        .collect::<HashSet<_>>()
        .len()
}

type Pair = (String, String);

struct Learner {
    words: Vec<(Vec<String>, i64)>,
    pair_counts: HashMap<Pair, i64>,
    pair_words: HashMap<Pair, HashSet<usize>>,
    symbol_counts: HashMap<String, i64>,
    heap: BinaryHeap<(i64, Reverse<Pair>)>,
}

impl Learner {
    fn new(word_freqs: &BTreeMap<String, usize>) -> Self {
        let mut l = Learner {
            words: word_freqs
                .iter()
                .map(|(w, &f)| (initial_symbols(w), f as i64))
                .collect(),
            pair_counts: HashMap::new(),
            pair_words: HashMap::new(),
            symbol_counts: HashMap::new(),
            heap: BinaryHeap::new(),
        };
        for idx in 0..l.words.len() {
            l.account(idx, 1);
        }
        let entries: Vec<_> = l.pair_counts.iter().map(|(p, &c)| (c, Reverse(p.clone()))).collect();
        l.heap.extend(entries);
        l
    }

    /// Adds (`sign` = 1) or removes (`sign` = -1) one word's contribution.
    fn account(&mut self, idx: usize, sign: i64) {
        let (symbols, freq) = &self.words[idx];
        let delta = sign * freq;
        for s in symbols {
            let c = self.symbol_counts.entry(s.clone()).or_default();
            *c += delta;
            if *c == 0 {
                self.symbol_counts.remove(s);
            }
        }
        for w in symbols.windows(2) {
            let pair = (w[0].clone(), w[1].clone());
            let c = self.pair_counts.entry(pair.clone()).or_default();
            *c += delta;
            let c = *c;
            if sign > 0 {
                self.pair_words.entry(pair.clone()).or_default().insert(idx);
            }
            if c == 0 {
                self.pair_counts.remove(&pair);
            }
        }
    }

    fn push_changed(&mut self, pairs: &HashSet<Pair>) {
        for p in pairs {
            if let Some(&c) = self.pair_counts.get(p) {
                self.heap.push((c, Reverse(p.clone())));
            }
        }
    }

    /// Most frequent pair, ties toward the smaller `(left, right)`.
    fn best(&mut self) -> Option<(Pair, i64)> {
        while let Some((c, Reverse(p))) = self.heap.pop() {
            if self.pair_counts.get(&p) == Some(&c) {
                self.heap.push((c, Reverse(p.clone())));
                return Some((p, c));
            }
        }
        None
    }

    fn apply(&mut self, pair: &Pair) {
        let mut touched: Vec<usize> = self
            .pair_words
            .remove(pair)
            .unwrap_or_default()
            .into_iter()
            .collect();
        touched.sort_unstable();
        let mut changed = HashSet::new();
        for idx in touched {
            let symbols = &self.words[idx].0;
            if !symbols.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1) {
                continue;
            }
            for w in symbols.windows(2) {
                changed.insert((w[0].clone(), w[1].clone()));
            }
            self.account(idx, -1);
            self.words[idx].0 = merge_word(&self.words[idx].0, &pair.0, &pair.1);
            self.account(idx, 1);
            for w in self.words[idx].0.windows(2) {
                changed.insert((w[0].clone(), w[1].clone()));
            }
        }
        self.push_changed(&changed);
    }
}

/// Learns merges until the symbol vocabulary reaches `target_vocab_size` or
/// no pair occurs twice.
pub fn learn_bpe(word_freqs: &BTreeMap<String, usize>, target_vocab_size: usize) -> Result<BpeModel> {
    let initial = initial_vocab_size(word_freqs);
    if target_vocab_size < initial {
        return Err(Error::InvalidArgument(format!(
            "target vocabulary {target_vocab_size} is below the initial character vocabulary; minimum is {initial}"
        )));
    }
    let mut learner = Learner::new(word_freqs);
    let mut merges = Vec::new();
    while learner.symbol_counts.len() < target_vocab_size {
        let Some((pair, count)) = learner.best() else { break };
        if count < 2 {
            break;
        }
        learner.apply(&pair);
        merges.push(pair);
    }
    BpeModel::new(merges, target_vocab_size)
}

/// Splits each word into subwords; non-final pieces get `@@`.
pub fn apply_bpe(sentence: &[String], model: &BpeModel) -> TokenSeq {
    let mut out = Vec::with_capacity(sentence.len());
    for word in sentence {
        let symbols = model.segment_word(word);
        let n = symbols.len();
        for (i, s) in symbols.into_iter().enumerate() {
            if i + 1 == n {
                out.push(s.strip_suffix(END_OF_WORD).unwrap_or(&s).to_owned());
            } else {
                out.push(format!("{s}{CONTINUATION}"));
            }
        }
    }
    out
}

/// Joins `@@`-marked pieces with their successor.
pub fn undo_bpe(sentence: &[String]) -> TokenSeq {
    let mut out = Vec::new();
    let mut pending = String::new();
    for tok in sentence {
        match tok.strip_suffix(CONTINUATION) {
            Some(piece) => pending.push_str(piece),
            None => {
                pending.push_str(tok);
                out.push(std::mem::take(&mut pending));
            }
        }
    }
    if !pending.is_empty() {
        warn!("dangling continuation marker at end of sentence");
        out.push(pending);
    }
    out
}
