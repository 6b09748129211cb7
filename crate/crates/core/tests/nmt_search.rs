use arnmt::corpus::{BOS, EOS};
use arnmt::nmt::{beam_decode, decode_step, decoder_init, encode, greedy_decode, NmtConfig, NmtModel};

fn model(seed: u64, tgt_vocab: usize) -> NmtModel {
    NmtModel::new(NmtConfig {
        src_vocab_size: 6,
        tgt_vocab_size: tgt_vocab,
        embed_dim: 3,
        enc_hidden: 3,
        enc_layers: 1,
        dec_hidden: 3,
        attn_hidden: 3,
        dropout_rate: 0.0,
        l2_coeff: 0.0,
        seed,
        init_scale: 2.0,
    })
    .unwrap()
}

/// Best EOS-terminated sequence of at most `max_len` tokens by mean
/// log-probability, ties toward shorter then lexicographically smaller.
fn exhaustive(m: &NmtModel, src: &[usize], max_len: usize) -> Vec<usize> {
    let enc = encode(m, src).unwrap();
    let vocab = m.config.tgt_vocab_size;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut stack = vec![(Vec::<usize>::new(), 0.0, decoder_init(m, &enc))];
    while let Some((prefix, lp, state)) = stack.pop() {
        let prev = prefix.last().copied().unwrap_or(BOS);
        let (next, logp) = decode_step(m, &state, prev, &enc);
        for y in 0..vocab {
            let mut seq = prefix.clone();
            seq.push(y);
            let score = lp + logp[y];
            if y == EOS {
                let norm = score / seq.len() as f64;
                let better = match &best {
                    None => true,
                    Some((b, bs)) => norm > *b || (norm == *b && (seq.len(), &seq) < (bs.len(), bs)),
                };
                if better {
                    best = Some((norm, seq));
                }
            } else if seq.len() < max_len {
                stack.push((seq, score, next.clone()));
            }
        }
    }
    let mut out = best.expect("some finished sequence").1;
    out.pop();
    out
}

#[test]
fn exhaustive_width_matches_enumeration() {
    for seed in 0..30 {
        let m = model(seed, 4);
        let src = [4, 5, EOS];
        assert_eq!(beam_decode(&m, &src, 64, 3).unwrap(), exhaustive(&m, &src, 3), "seed {seed}");
    }
}

#[test]
fn width_one_matches_greedy_on_many_models() {
    for seed in 0..100 {
        let m = model(seed, 7);
        let src = [4, 5, 4, EOS];
        assert_eq!(
            beam_decode(&m, &src, 1, 8).unwrap(),
            greedy_decode(&m, &src, 8).unwrap(),
            "seed {seed}"
        );
    }
}

#[test]
fn decoding_is_deterministic() {
    let m = model(3, 7);
    let a = beam_decode(&m, &[4, 5], 5, 10).unwrap();
    let b = beam_decode(&m, &[4, 5], 5, 10).unwrap();
    assert_eq!(a, b);
}
