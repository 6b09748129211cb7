//! Interpolated Kneser-Ney n-gram language models.
//!
//! One fixed discount is used at every order. Lower orders use
//! continuation counts (number of distinct left extensions), except for
//! n-grams that start at `<s>`, which keep their raw counts. The unigram
//! distribution is interpolated with a uniform distribution over the
//! vocabulary so `<unk>` receives mass. Probabilities are stored in
//! back-off form, log10, exactly as they appear in an ARPA file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result, TokenSeq};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Log10 probability written for `<s>`, which is never predicted.
const NEVER: f64 = -99.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    pub order: usize,
    probs: HashMap<Vec<String>, f64>,
    backoffs: HashMap<Vec<String>, f64>,
    vocab: BTreeSet<String>,
}

fn wrap(sentence: &[String]) -> Vec<&str> {
    let mut out = Vec::with_capacity(sentence.len() + 2);
    out.push(BOS);
    out.extend(sentence.iter().map(String::as_str));
    out.push(EOS);
    out
}

/// Raw and adjusted n-gram counts for every order.
struct Counts<'a> {
    /// `adjusted[k-1]` maps k-grams to their Kneser-Ney count.
    adjusted: Vec<BTreeMap<Vec<&'a str>, usize>>,
}

impl<'a> Counts<'a> {
    fn collect(corpus: &'a [TokenSeq], order: usize) -> Self {
        let mut raw: Vec<BTreeMap<Vec<&str>, usize>> = vec![BTreeMap::new(); order];
        for sent in corpus {
            let words = wrap(sent);
            for k in 1..=order {
                for gram in words.windows(k) {
                    *raw[k - 1].entry(gram.to_vec()).or_default() += 1;
                }
            }
        }
        let mut adjusted = raw.clone();
        for k in 1..order {
            let mut left_ext: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
            for gram in raw[k].keys() {
                *left_ext.entry(gram[1..].to_vec()).or_default() += 1;
            }
            for (gram, count) in adjusted[k - 1].iter_mut() {
                if gram[0] != BOS {
                    *count = left_ext.get(gram).copied().unwrap_or(0);
                }
            }
        }
        Counts { adjusted }
    }
}

/// Formats a value with 7 significant digits, shortest form.
pub fn format_sig7(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    let rounded: f64 = format!("{x:.6e}").parse().expect("valid float");
    format!("{rounded}")
}

impl NgramModel {
    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Words that can be predicted: the vocabulary without `<s>`.
    pub fn predictable(&self) -> Vec<&str> {
        self.vocab
            .iter()
            .map(String::as_str)
            .filter(|w| *w != BOS)
            .collect()
    }

    pub fn log10_prob_entry(&self, gram: &[&str]) -> Option<f64> {
        let key: Vec<String> = gram.iter().map(|s| s.to_string()).collect();
        self.probs.get(&key).copied()
    }

    pub fn log10_backoff_entry(&self, gram: &[&str]) -> Option<f64> {
        let key: Vec<String> = gram.iter().map(|s| s.to_string()).collect();
        self.backoffs.get(&key).copied()
    }

    fn map_word<'s>(&'s self, w: &'s str) -> &'s str {
        if self.vocab.contains(w) {
            w
        } else {
            UNK
        }
    }

    /// log10 p(word | context); only the last `order - 1` context words
    /// matter and out-of-vocabulary words map to `<unk>`.
    pub fn log10_prob(&self, context: &[&str], word: &str) -> f64 {
        let keep = context.len().min(self.order - 1);
        let mut gram: Vec<String> = context[context.len() - keep..]
            .iter()
            .map(|w| self.map_word(w).to_owned())
            .collect();
        gram.push(self.map_word(word).to_owned());
        let mut total = 0.0;
        loop {
            if let Some(p) = self.probs.get(&gram) {
                return total + p;
            }
            if gram.len() == 1 {
                return total + NEVER;
            }
            let ctx = &gram[..gram.len() - 1];
            total += self.backoffs.get(ctx).copied().unwrap_or(0.0);
            gram.remove(0);
        }
    }

    pub fn write_arpa(&self) -> String {
        let mut by_order: Vec<Vec<&Vec<String>>> = vec![Vec::new(); self.order];
        for gram in self.probs.keys() {
            by_order[gram.len() - 1].push(gram);
        }
        for grams in &mut by_order {
            grams.sort();
        }
        let mut out = String::from("\\data\\\n");
        for (k, grams) in by_order.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, grams.len());
        }
        for (k, grams) in by_order.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            for gram in grams {
                let _ = write!(out, "{}\t{}", format_sig7(self.probs[*gram]), gram.join(" "));
                if let Some(b) = self.backoffs.get(*gram) {
                    let _ = write!(out, "\t{}", format_sig7(*b));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn read_arpa(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let mut declared: Vec<usize> = Vec::new();
        loop {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "missing \\data\\ header"))?;
            if line.is_empty() {
                continue;
            }
            if line != "\\data\\" {
                return Err(Error::parse(n, format!("expected \\data\\, got `{line}`")));
            }
            break;
        }
        let mut pending = None;
        for (n, line) in lines.by_ref() {
            if line.is_empty() {
                continue;
            }
            if let Some(spec) = line.strip_prefix("ngram ") {
                let (k, count) = spec
                    .split_once('=')
                    .and_then(|(k, c)| Some((k.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                    .ok_or_else(|| Error::parse(n, format!("bad count line `{line}`")))?;
                if k != declared.len() + 1 {
                    return Err(Error::parse(n, format!("unexpected order {k}")));
                }
                declared.push(count);
            } else {
                pending = Some((n, line));
                break;
            }
        }
        if declared.is_empty() {
            return Err(Error::parse(0, "no n-gram counts declared"));
        }
        let order = declared.len();
        let mut probs = HashMap::new();
        let mut backoffs = HashMap::new();
        let mut vocab = BTreeSet::new();
        let mut section: Option<(usize, usize, usize)> = None; // (order, seen, header line)
        let close = |section: Option<(usize, usize, usize)>| -> Result<()> {
            if let Some((k, seen, at)) = section {
                if seen != declared[k - 1] {
                    return Err(Error::parse(
                        at,
                        format!("{k}-grams: declared {} but found {seen}", declared[k - 1]),
                    ));
                }
            }
            Ok(())
        };
        let mut ended = false;
        for (n, line) in pending.into_iter().chain(lines) {
            if line.is_empty() {
                continue;
            }
            if line == "\\end\\" {
                close(section.take())?;
                ended = true;
                break;
            }
            if let Some(k) = line
                .strip_prefix('\\')
                .and_then(|s| s.strip_suffix("-grams:"))
            {
                close(section.take())?;
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::parse(n, format!("bad section header `{line}`")))?;
                if k == 0 || k > order {
                    return Err(Error::parse(n, format!("section for undeclared order {k}")));
                }
                section = Some((k, 0, n));
                continue;
            }
            let Some((k, seen, _)) = section.as_mut() else {
                return Err(Error::parse(n, format!("entry outside a section: `{line}`")));
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::parse(n, "expected `logprob<TAB>ngram[<TAB>backoff]`"));
            }
            let prob: f64 = fields[0]
                .parse()
                .map_err(|_| Error::parse(n, format!("bad log-probability `{}`", fields[0])))?;
            let gram: Vec<String> = fields[1].split(' ').map(str::to_owned).collect();
            if gram.len() != *k {
                return Err(Error::parse(n, format!("expected a {k}-gram, got `{}`", fields[1])));
            }
            if *k == 1 {
                vocab.insert(gram[0].clone());
            }
            if let Some(b) = fields.get(2) {
                let b: f64 = b
                    .parse()
                    .map_err(|_| Error::parse(n, format!("bad backoff `{b}`")))?;
                backoffs.insert(gram.clone(), b);
            }
            probs.insert(gram, prob);
            *seen += 1;
        }
        if !ended {
            return Err(Error::parse(text.lines().count(), "missing \\end\\"));
        }
        if !vocab.contains(UNK) {
            vocab.insert(UNK.to_owned());
            probs.insert(vec![UNK.to_owned()], NEVER);
        }
        Ok(NgramModel {
            order,
            probs,
            backoffs,
            vocab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.write_arpa()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::read_arpa(&text)
    }
}

pub fn lm_train(corpus: &[TokenSeq], order: usize, discount: f64) -> Result<NgramModel> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::InvalidArgument(format!("discount must be in (0, 1), got {discount}")));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty corpus".into()));
    }
    let counts = Counts::collect(corpus, order);

    let mut vocab: BTreeSet<String> = counts.adjusted[0].keys().map(|g| g[0].to_owned()).collect();
    vocab.insert(UNK.to_owned());
    let predictable: Vec<&str> = vocab.iter().map(String::as_str).filter(|w| *w != BOS).collect();

    let mut probs: HashMap<Vec<String>, f64> = HashMap::new();
    let mut backoffs: HashMap<Vec<String>, f64> = HashMap::new();
    let owned = |g: &[&str]| g.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    // unigrams: discounted, interpolated with uniform
    let uni = &counts.adjusted[0];
    let total: usize = predictable.iter().map(|w| uni.get(&vec![*w]).copied().unwrap_or(0)).sum();
    let types = predictable.iter().filter(|w| uni.get(&vec![**w]).copied().unwrap_or(0) > 0).count();
    let uniform = 1.0 / predictable.len() as f64;
    let mut lower: HashMap<Vec<String>, f64> = HashMap::new();
    for w in &predictable {
        let c = uni.get(&vec![*w]).copied().unwrap_or(0) as f64;
        let p = (c - discount).max(0.0) / total as f64
            + discount * types as f64 / total as f64 * uniform;
        lower.insert(vec![w.to_string()], p);
        probs.insert(vec![w.to_string()], p.log10());
    }
    probs.insert(vec![BOS.to_owned()], NEVER);

    for k in 2..=order {
        let grams = &counts.adjusted[k - 1];
        let mut ctx_stats: BTreeMap<&[&str], (usize, usize)> = BTreeMap::new();
        for (gram, &a) in grams {
            let e = ctx_stats.entry(&gram[..k - 1]).or_default();
            e.0 += a;
            e.1 += 1;
        }
        let mut current: HashMap<Vec<String>, f64> = HashMap::new();
        for (gram, &a) in grams {
            let (sum, ext) = ctx_stats[&gram[..k - 1]];
            let gamma = discount * ext as f64 / sum as f64;
            let lower_p = lower_prob(&lower, &backoffs, &gram[1..]);
            let p = (a as f64 - discount) / sum as f64 + gamma * lower_p;
            current.insert(owned(gram), p);
            probs.insert(owned(gram), p.log10());
        }
        for (ctx, (sum, ext)) in ctx_stats {
            let gamma = discount * ext as f64 / sum as f64;
            backoffs.insert(owned(ctx), gamma.log10());
        }
        lower.extend(current);
    }
    Ok(NgramModel {
        order,
        probs,
        backoffs,
        vocab,
    })
}

/// Back-off evaluation over the linear-space table built so far.
fn lower_prob(
    table: &HashMap<Vec<String>, f64>,
    backoffs: &HashMap<Vec<String>, f64>,
    gram: &[&str],
) -> f64 {
    let mut gram: Vec<String> = gram.iter().map(|s| s.to_string()).collect();
    let mut scale = 1.0;
    loop {
        if let Some(p) = table.get(&gram) {
            return scale * p;
        }
        let ctx = &gram[..gram.len() - 1];
        scale *= backoffs.get(ctx).map_or(1.0, |b| 10f64.powf(*b));
        gram.remove(0);
    }
}

/// Total log10 probability of a sentence including `</s>`.
pub fn lm_score_sentence(model: &NgramModel, sentence: &[String]) -> f64 {
    let words = wrap(sentence);
    (1..words.len())
        .map(|i| model.log10_prob(&words[..i], words[i]))
        .sum()
}

/// Mean per-sentence log10 probability.
pub fn lm_score_set(model: &NgramModel, sentences: &[TokenSeq]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty set".into()));
    }
    let total: f64 = sentences.iter().map(|s| lm_score_sentence(model, s)).sum();
    Ok(total / sentences.len() as f64)
}
