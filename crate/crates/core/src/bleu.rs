//! Corpus-level BLEU-4 with multiple references per sentence.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, TokenSeq};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub bleu: f64,
    /// Modified n-gram precisions for n = 1..4. An order with no hypothesis
    /// n-grams at all counts as vacuously precise (1.0).
    pub precisions: [f64; MAX_ORDER],
    /// Clipped match counts per order.
    pub matches: [usize; MAX_ORDER],
    /// Hypothesis n-gram counts per order.
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.precisions.iter().map(|p| format!("{:.1}", p * 100.0)).collect();
        write!(
            f,
            "BLEU = {:.2}, P = {}, BP = {:.3}",
            self.bleu * 100.0,
            p.join("/"),
            self.brevity_penalty
        )
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Reference length closest to `hyp_len`; ties go to the shorter reference.
fn closest_ref_len(hyp_len: usize, refs: &[TokenSeq]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

fn lowered(seqs: &[TokenSeq]) -> Vec<TokenSeq> {
    seqs.iter()
        .map(|s| s.iter().map(|t| t.to_lowercase()).collect())
        .collect()
}

/// Corpus BLEU; `references[i]` holds every reference for `hypotheses[i]`.
pub fn bleu(hypotheses: &[TokenSeq], references: &[Vec<TokenSeq>]) -> Result<BleuReport> {
    if hypotheses.is_empty() {
        return Err(Error::InvalidArgument("empty hypothesis corpus".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses but {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (i, (hyp, refs)) in hypotheses.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(Error::InvalidArgument(format!("sentence {} has no references", i + 1)));
        }
        hyp_len += hyp.len();
        ref_len += closest_ref_len(hyp.len(), refs);
        for n in 1..=MAX_ORDER {
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in ngram_counts(hyp, n) {
                totals[n - 1] += c;
                matches[n - 1] += c.min(max_ref.get(&g).copied().unwrap_or(0));
            }
        }
    }
    let mut precisions = [1.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let bleu = if precisions.iter().all(|&p| p > 0.0) {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        brevity_penalty * mean_log.exp()
    } else {
        0.0
    };
    Ok(BleuReport {
        bleu,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

/// BLEU after lowercasing both sides.
pub fn bleu_uncased(hypotheses: &[TokenSeq], references: &[Vec<TokenSeq>]) -> Result<BleuReport> {
    let refs: Vec<Vec<TokenSeq>> = references.iter().map(|r| lowered(r)).collect();
    bleu(&lowered(hypotheses), &refs)
}

/// Difference `b - a` in BLEU points, rounded to two decimals.
pub fn bleu_delta(a: &BleuReport, b: &BleuReport) -> f64 {
    round_points(b.bleu - a.bleu)
}

/// `(b - a) * 100` rounded to two decimals.
pub fn round_points(diff: f64) -> f64 {
    // go through the decimal rendering so 4.46 stays 4.46 despite binary noise
    format!("{:.2}", diff * 100.0 + diff.signum() * 1e-9).parse().expect("formatted float")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split_tokens;

    fn s(x: &str) -> TokenSeq {
        split_tokens(x)
    }

    #[test]
    fn identity_is_one() {
        let h = vec![s("the cat sat on the mat"), s("a dog barked at the moon")];
        let r: Vec<Vec<TokenSeq>> = h.iter().map(|x| vec![x.clone()]).collect();
        let rep = bleu(&h, &r).unwrap();
        assert_eq!(rep.bleu, 1.0);
        assert_eq!(rep.brevity_penalty, 1.0);
    }

    #[test]
    fn clipping_by_reference_count() {
        let rep = bleu(&[s("the the the the")], &[vec![s("the cat")]]).unwrap();
        assert_eq!(rep.precisions[0], 0.25);
        assert_eq!(rep.precisions[1], 0.0);
        assert_eq!(rep.bleu, 0.0);
    }

    #[test]
    fn multi_reference_exact_match() {
        let rep = bleu(
            &[s("the cat sat")],
            &[vec![s("the cat sat"), s("a cat sat")]],
        )
        .unwrap();
        assert_eq!(rep.bleu, 1.0);
        assert_eq!(rep.totals[3], 0);
    }

    #[test]
    fn empty_hypotheses_score_zero() {
        let rep = bleu(&[s("")], &[vec![s("a b")]]).unwrap();
        assert_eq!(rep.bleu, 0.0);
    }

    #[test]
    fn closest_length_ties_go_shorter() {
        assert_eq!(closest_ref_len(4, &[s("a b c d e"), s("a b c")]), 3);
        assert_eq!(closest_ref_len(4, &[s("a b c d e f"), s("a b c d e")]), 5);
    }

    #[test]
    fn errors() {
        assert!(bleu(&[], &[]).is_err());
        assert!(bleu(&[s("a")], &[]).is_err());
        assert!(bleu(&[s("a")], &[vec![]]).is_err());
    }

    fn report_with(b: f64) -> BleuReport {
        BleuReport {
            bleu: b,
            precisions: [0.0; 4],
            matches: [0; 4],
            totals: [0; 4],
            brevity_penalty: 1.0,
            hyp_len: 0,
            ref_len: 0,
        }
    }

    #[test]
    fn delta_convention() {
        assert_eq!(bleu_delta(&report_with(0.3152), &report_with(0.3598)), 4.46);
        assert_eq!(bleu_delta(&report_with(0.2864), &report_with(0.3362)), 4.98);
        assert_eq!(bleu_delta(&report_with(0.3), &report_with(0.3)), 0.0);
        assert_eq!(bleu_delta(&report_with(0.3598), &report_with(0.3152)), -4.46);
    }

    #[test]
    fn summary_line() {
        let rep = bleu(&[s("a b c d e")], &[vec![s("a b c d e f")]]).unwrap();
        let line = rep.to_string();
        assert!(line.starts_with("BLEU = "), "{line}");
        assert!(line.contains("P = 100.0/100.0/100.0/100.0"), "{line}");
        assert!(line.ends_with("BP = 0.819"), "{line}");
    }

    #[test]
    fn case_flag() {
        let h = [s("The Cat")];
        let r = [vec![s("the cat")]];
        assert_eq!(bleu(&h, &r).unwrap().precisions[0], 0.0);
        assert_eq!(bleu_uncased(&h, &r).unwrap().precisions[0], 1.0);
    }
}
