//! Arabic-English machine translation toolkit.
//!
//! The crate covers the whole preprocessing and modelling chain used for
//! Arabic translation experiments:
//!
//! * [`corpus`]: parallel corpus loading, length filtering, duplicate
//!   detection and vocabularies.
//! * [`normalize`]: Arabic orthographic normalization, lowercasing and
//!   truecasing.
//! * [`segment`]: punctuation tokenization, ATB-style clitic segmentation
//!   and table-driven detokenization.
//! * [`bpe`]: byte pair encoding with the `@@` continuation marker.
//! * [`lm`]: interpolated Kneser-Ney n-gram models with ARPA I/O.
//! * [`nmt`]: an attention-based GRU encoder-decoder with hand-written
//!   backpropagation, Adadelta training and beam search.
//! * [`bleu`]: corpus-level multi-reference BLEU.
//! * [`pipeline`]: configuration grid and end-to-end experiment runner.

pub mod bleu;
pub mod bpe;
pub mod corpus;
mod error;
pub mod lm;
pub mod nmt;
pub mod normalize;
pub mod pipeline;
pub mod segment;

pub use error::{Error, Result};

/// A sentence as a sequence of tokens.
pub type TokenSeq = Vec<String>;

/// Splits a line on ASCII spaces, dropping empty fields.
pub fn split_tokens(line: &str) -> TokenSeq {
    line.split_whitespace().map(str::to_owned).collect()
}

/// Joins tokens with single spaces.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}
