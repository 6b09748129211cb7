//! Parallel corpus ingestion and vocabulary indexing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{split_tokens, Error, Result, TokenSeq};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

const RESERVED: [&str; 4] = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN];

/// Sentence-aligned bitext.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<(TokenSeq, TokenSeq)>,
    pub side_labels: (String, String),
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(TokenSeq, TokenSeq)>) -> Self {
        ParallelCorpus {
            pairs,
            side_labels: ("src".into(), "tgt".into()),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<TokenSeq> {
        self.pairs.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn targets(&self) -> Vec<TokenSeq> {
        self.pairs.iter().map(|(_, t)| t.clone()).collect()
    }
}

/// Reads a UTF-8 text file as lines, reporting the first invalid line.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    let mut body = bytes.as_slice();
    if body.last() == Some(&b'\n') {
        body = &body[..body.len() - 1];
    }
    if bytes.is_empty() {
        return Ok(lines);
    }
    for (i, raw) in body.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| Error::Decode {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        lines.push(line.to_owned());
    }
    Ok(lines)
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a tokenized file: one sentence per line, tokens split on whitespace.
pub fn read_tokenized(path: &Path) -> Result<Vec<TokenSeq>> {
    Ok(read_lines(path)?.iter().map(|l| split_tokens(l)).collect())
}

pub fn load_parallel(src_path: &Path, tgt_path: &Path) -> Result<ParallelCorpus> {
    let src = read_tokenized(src_path)?;
    let tgt = read_tokenized(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(Error::Alignment {
            src_lines: src.len(),
            tgt_lines: tgt.len(),
        });
    }
    let label = |p: &Path| {
        p.extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
            .to_owned()
    };
    Ok(ParallelCorpus {
        pairs: src.into_iter().zip(tgt).collect(),
        side_labels: (label(src_path), label(tgt_path)),
    })
}

/// Keeps the pairs whose sides both have at most `max_len` tokens.
pub fn filter_by_length(corpus: &ParallelCorpus, max_len: usize) -> ParallelCorpus {
    ParallelCorpus {
        pairs: corpus
            .pairs
            .iter()
            .filter(|(s, t)| s.len() <= max_len && t.len() <= max_len)
            .cloned()
            .collect(),
        side_labels: corpus.side_labels.clone(),
    }
}

/// Indices of `eval` sentences whose exact token sequence occurs in `train`.
pub fn find_duplicates(train: &[TokenSeq], eval: &[TokenSeq]) -> Vec<usize> {
    let seen: HashSet<&[String]> = train.iter().map(Vec::as_slice).collect();
    eval.iter()
        .enumerate()
        .filter(|(_, s)| seen.contains(s.as_slice()))
        .map(|(i, _)| i)
        .collect()
}

/// Bijective token/id map with the four reserved ids first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocab {
    /// Builds a vocabulary from non-reserved tokens in id order (ids start at 4).
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut token_to_id: HashMap<String, usize> = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        for tok in tokens {
            let tok = tok.into();
            if token_to_id.contains_key(&tok) {
                continue;
            }
            token_to_id.insert(tok.clone(), id_to_token.len());
            id_to_token.push(tok);
        }
        Vocab {
            id_to_token,
            token_to_id,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        self.id_to_token
            .get(id)
            .map(String::as_str)
            .unwrap_or(UNK_TOKEN)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Maps tokens to ids, unknown tokens to UNK.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Maps ids back to tokens, stopping at EOS and skipping PAD/BOS.
    pub fn decode(&self, ids: &[usize]) -> TokenSeq {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i != PAD && i != BOS)
            .map(|&i| self.token(i).to_owned())
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.id_to_token.iter().enumerate() {
            out.push_str(&format!("{t}\t{i}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `token<TAB>id`"))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad id `{id}`")))?;
            if id != tokens.len() {
                return Err(Error::parse(i + 1, format!("ids must be dense and sorted, got {id}")));
            }
            if id < RESERVED.len() {
                if tok != RESERVED[id] {
                    return Err(Error::parse(i + 1, format!("id {id} is reserved for {}", RESERVED[id])));
                }
            } else if RESERVED.contains(&tok) {
                return Err(Error::parse(i + 1, format!("reserved token `{tok}` at id {id}")));
            }
            tokens.push(tok.to_owned());
        }
        if tokens.len() < RESERVED.len() {
            return Err(Error::parse(tokens.len() + 1, "missing reserved tokens"));
        }
        let vocab = Vocab::from_tokens(tokens.into_iter().skip(RESERVED.len()));
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }
}

/// Keeps the `max_size - 4` most frequent tokens; ties go to the
/// lexicographically smaller token.
pub fn build_vocab(side: &[TokenSeq], max_size: usize) -> Result<Vocab> {
    if max_size <= RESERVED.len() {
        return Err(Error::InvalidArgument(format!(
            "vocabulary size must exceed {}, got {max_size}",
            RESERVED.len()
        )));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for sent in side {
        for tok in sent {
            if !RESERVED.contains(&tok.as_str()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED.len());
    Ok(Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t)))
}
