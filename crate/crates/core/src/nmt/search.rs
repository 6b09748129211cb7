use std::cmp::Ordering;

use super::model::{decode_step, decoder_init, encode, DecoderState, NmtModel};
use crate::corpus::{BOS, EOS};
use crate::{Error, Result};

/// A partial or finished translation.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// Generated ids, BOS excluded, EOS included when finished.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: DecoderState,
    pub finished: bool,
}

impl Hypothesis {
    /// Log-probability per generated token.
    pub fn normalized_score(&self) -> f64 {
        if self.tokens.is_empty() {
            return self.log_prob;
        }
        self.log_prob / self.tokens.len() as f64
    }

    /// Output ids without the closing EOS.
    pub fn output(&self) -> Vec<usize> {
        let mut out = self.tokens.clone();
        if self.finished {
            out.pop();
        }
        out
    }
}

/// Higher score first, then shorter, then lexicographically smaller ids.
fn rank_final(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.normalized_score()
        .total_cmp(&a.normalized_score())
        .then(a.tokens.len().cmp(&b.tokens.len()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Repeatedly takes the most probable next token (lowest id on ties).
pub fn greedy_decode(model: &NmtModel, source: &[usize], max_len: usize) -> Result<Vec<usize>> {
    let enc = encode(model, source)?;
    let mut state = decoder_init(model, &enc);
    let mut prev = BOS;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let (next, logp) = decode_step(model, &state, prev, &enc);
        let y = super::model::argmax(&logp);
        if y == EOS {
            break;
        }
        out.push(y);
        state = next;
        prev = y;
    }
    Ok(out)
}

/// Beam search over the full target vocabulary.
///
/// At each step every live hypothesis is expanded and the best
/// `beam_width` expansions by accumulated log-probability survive; those
/// ending in EOS retire. Search stops once `beam_width` hypotheses have
/// finished, nothing is live, or `max_len` tokens were generated. The result
/// is the finished hypothesis (or, if none finished, the live one) with the
/// best length-normalized score.
pub fn beam_decode(model: &NmtModel, source: &[usize], beam_width: usize, max_len: usize) -> Result<Vec<usize>> {
    if beam_width == 0 || max_len == 0 {
        return Err(Error::InvalidArgument("beam_width and max_len must be at least 1".into()));
    }
    let enc = encode(model, source)?;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: decoder_init(model, &enc),
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let mut steps = Vec::with_capacity(live.len());
        // (parent, token, accumulated log-prob)
        let mut cands: Vec<(usize, usize, f64)> = Vec::new();
        for (pi, h) in live.iter().enumerate() {
            let prev = h.tokens.last().copied().unwrap_or(BOS);
            let (next, logp) = decode_step(model, &h.state, prev, &enc);
            for (y, lp) in logp.iter().enumerate() {
                cands.push((pi, y, h.log_prob + lp));
            }
            steps.push(next);
        }
        // live hypotheses are kept in rank order, so parent index breaks ties
        // toward the better-ranked prefix
        cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        cands.truncate(beam_width);
        let mut next_live = Vec::new();
        for (pi, y, score) in cands {
            let mut tokens = live[pi].tokens.clone();
            tokens.push(y);
            let h = Hypothesis {
                tokens,
                log_prob: score,
                state: steps[pi].clone(),
                finished: y == EOS,
            };
            if h.finished {
                finished.push(h);
            } else {
                next_live.push(h);
            }
        }
        live = next_live;
        if finished.len() >= beam_width || live.is_empty() {
            break;
        }
    }
    let pool = if finished.is_empty() { &mut live } else { &mut finished };
    pool.sort_by(rank_final);
    Ok(pool.first().map(Hypothesis::output).unwrap_or_default())
}
