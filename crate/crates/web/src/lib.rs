//! Browser bindings. Every entry point takes plain strings and returns a
//! JSON string; the `*_json` functions hold the logic so they can be tested
//! natively.

use arnmt::bleu::{bleu, bleu_uncased};
use arnmt::bpe::{apply_bpe, learn_bpe, word_freqs};
use arnmt::normalize::{normalize_arabic, NormRules};
use arnmt::segment::{atb_segment, simple_tokenize, CliticInventory};
use arnmt::{join_tokens, split_tokens, TokenSeq};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Segmented {
    normalized: Vec<String>,
    segmented: Vec<String>,
}

#[derive(Serialize)]
struct BpeResult {
    merges: usize,
    model: String,
    applied: Vec<String>,
}

#[derive(Serialize)]
struct BleuResult {
    bleu: f64,
    precisions: [f64; 4],
    brevity_penalty: f64,
    hyp_len: usize,
    ref_len: usize,
    summary: String,
}

fn lines(text: &str) -> Vec<&str> {
    text.lines().collect()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Normalizes, tokenizes and clitic-segments each line.
pub fn normalize_segment_json(text: &str) -> Result<String, String> {
    let rules = NormRules::default();
    let inv = CliticInventory::default();
    let mut out = Segmented {
        normalized: Vec::new(),
        segmented: Vec::new(),
    };
    for line in lines(text) {
        let tokens = simple_tokenize(&normalize_arabic(line, &rules));
        let seg: TokenSeq = tokens.iter().flat_map(|t| atb_segment(t, &inv)).collect();
        out.normalized.push(join_tokens(&tokens));
        out.segmented.push(join_tokens(&seg));
    }
    to_json(&out)
}

/// Learns merges on `corpus` and applies them to `text`.
pub fn bpe_json(corpus: &str, vocab_size: usize, text: &str) -> Result<String, String> {
    let train: Vec<TokenSeq> = lines(corpus).into_iter().map(split_tokens).collect();
    let model = learn_bpe(&word_freqs(&train), vocab_size).map_err(|e| e.to_string())?;
    let applied = lines(text)
        .into_iter()
        .map(|l| join_tokens(&apply_bpe(&split_tokens(l), &model)))
        .collect();
    to_json(&BpeResult {
        merges: model.merges.len(),
        model: model.to_text(),
        applied,
    })
}

/// Corpus BLEU; `refs` holds one reference text per block, blocks separated
/// by a line containing only `---`.
pub fn bleu_json(hyp: &str, refs: &str, lowercase: bool) -> Result<String, String> {
    let hyps: Vec<TokenSeq> = lines(hyp).into_iter().map(split_tokens).collect();
    let blocks: Vec<Vec<TokenSeq>> = refs
        .split("\n---\n")
        .map(|b| lines(b.trim_end_matches('\n')).into_iter().map(split_tokens).collect())
        .collect();
    for (i, b) in blocks.iter().enumerate() {
        if b.len() != hyps.len() {
            return Err(format!(
                "reference block {} has {} lines, hypothesis has {}",
                i + 1,
                b.len(),
                hyps.len()
            ));
        }
    }
    let sets: Vec<Vec<TokenSeq>> = (0..hyps.len())
        .map(|i| blocks.iter().map(|b| b[i].clone()).collect())
        .collect();
    let report = if lowercase { bleu_uncased(&hyps, &sets) } else { bleu(&hyps, &sets) }.map_err(|e| e.to_string())?;
    to_json(&BleuResult {
        bleu: report.bleu,
        precisions: report.precisions,
        brevity_penalty: report.brevity_penalty,
        hyp_len: report.hyp_len,
        ref_len: report.ref_len,
        summary: report.to_string(),
    })
}

#[wasm_bindgen]
pub fn normalize_segment(text: &str) -> Result<String, JsError> {
    normalize_segment_json(text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bpe(corpus: &str, vocab_size: usize, text: &str) -> Result<String, JsError> {
    bpe_json(corpus, vocab_size, text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bleu_score(hyp: &str, refs: &str, lowercase: bool) -> Result<String, JsError> {
    bleu_json(hyp, refs, lowercase).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn segments_worked_example() {
        let v = parse(normalize_segment_json("وَلمركبته (نعم)"));
        assert_eq!(v["normalized"][0], "ولمركبته -LRB- نعم -RRB-");
        assert_eq!(v["segmented"][0], "و+ ل+ مركبة +ه -LRB- نعم -RRB-");
    }

    #[test]
    fn bpe_splits_unseen_word() {
        let v = parse(bpe_json("low low low lower lower newest newest", 14, "lowest"));
        assert!(v["merges"].as_u64().unwrap() > 0);
        assert!(v["model"].as_str().unwrap().starts_with("#bpe v1"));
        assert!(v["applied"][0].as_str().unwrap().contains("@@"));
    }

    #[test]
    fn bleu_with_two_reference_blocks() {
        let v = parse(bleu_json("the cat sat", "a cat sat\n---\nthe cat sat", false));
        assert_eq!(v["bleu"], 1.0);
        assert!(v["summary"].as_str().unwrap().starts_with("BLEU = 100.00"));
    }

    #[test]
    fn bleu_reports_misaligned_block() {
        let err = bleu_json("a\nb", "a", false).unwrap_err();
        assert!(err.contains("block 1"), "{err}");
    }
}
