//! Forward computation and reverse-mode gradients of the encoder-decoder.
//!
//! Encoder: `enc_layers` stacked bidirectional GRUs; the annotation at
//! position t is the top layer's `[forward_t ; backward_t]`.
//!
//! Attention: `e_t = v . tanh(Wz z + Wy y + Wh h_t + b)`, `alpha = softmax(e)`
//! over unmasked positions, `c = sum_t alpha_t h_t`.
//!
//! Decoder: `z' = GRU(z, [emb(y_prev) ; c])` where `c` is computed from the
//! previous state, then `log p(. | ...) = log_softmax(W_out z' + b_out)`.
//! The initial state is `tanh(W_init mean(h) + b_init)`.
//!
//! GRU: `u = sig(Wu x + Uu h + bu)`, `r = sig(Wr x + Ur h + br)`,
//! `n = tanh(Wn x + Un (r * h) + bn)`, `h' = (1 - u) * h + u * n`.

use rand::{Rng, RngCore};

use super::params::{GruParams, NmtConfig, Params};
use super::tensor::{dot, log_softmax, sigmoid};
use crate::corpus::{Vocab, BOS};
use crate::{Error, Result};

/// Parameters plus the vocabularies they index.
#[derive(Debug, Clone, PartialEq)]
pub struct NmtModel {
    pub config: NmtConfig,
    pub params: Params,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
}

fn placeholder_vocab(size: usize) -> Vocab {
    Vocab::from_tokens((4..size.max(4)).map(|i| format!("w{i}")))
}

impl NmtModel {
    /// Randomly initialized model with placeholder vocabularies.
    pub fn new(config: NmtConfig) -> Result<Self> {
        config.validate()?;
        let src_vocab = placeholder_vocab(config.src_vocab_size);
        let tgt_vocab = placeholder_vocab(config.tgt_vocab_size);
        Ok(NmtModel {
            params: Params::init(&config),
            config,
            src_vocab,
            tgt_vocab,
        })
    }

    /// Randomly initialized model whose vocabulary sizes follow the vocabs.
    pub fn with_vocabs(mut config: NmtConfig, src_vocab: Vocab, tgt_vocab: Vocab) -> Result<Self> {
        config.src_vocab_size = src_vocab.len();
        config.tgt_vocab_size = tgt_vocab.len();
        config.validate()?;
        Ok(NmtModel {
            params: Params::init(&config),
            config,
            src_vocab,
            tgt_vocab,
        })
    }
}

/// Annotations of one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    pub annotations: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    /// `Wh h_t + b` per position, reused at every decoder step.
    keys: Vec<Vec<f64>>,
}

impl EncoderStates {
    pub fn new(params: &Params, annotations: Vec<Vec<f64>>, mask: Vec<bool>) -> Self {
        assert_eq!(annotations.len(), mask.len());
        let keys = annotations
            .iter()
            .map(|h| {
                let mut k = params.att_b.data.clone();
                params.att_wh.matvec_rows_into(0..params.att_wh.rows, h, &mut k);
                k
            })
            .collect();
        EncoderStates {
            annotations,
            mask,
            keys,
        }
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    fn active(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    x: Vec<f64>,
    h: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

pub(crate) fn gru_step(p: &GruParams, x: &[f64], h: &[f64]) -> GruCache {
    let hd = p.hidden();
    let mut a = p.b.data.clone();
    p.w.matvec_rows_into(0..3 * hd, x, &mut a);
    p.u.matvec_rows_into(0..2 * hd, h, &mut a[..2 * hd]);
    let u: Vec<f64> = a[..hd].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = a[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
    p.u.matvec_rows_into(2 * hd..3 * hd, &rh, &mut a[2 * hd..]);
    let n: Vec<f64> = a[2 * hd..].iter().map(|v| v.tanh()).collect();
    let out = (0..hd).map(|i| (1.0 - u[i]) * h[i] + u[i] * n[i]).collect();
    GruCache {
        x: x.to_vec(),
        h: h.to_vec(),
        u,
        r,
        n,
        rh,
        out,
    }
}

/// Accumulates parameter gradients into `g` and input/state gradients into
/// `dx` / `dh`.
fn gru_backward(
    p: &GruParams,
    g: &mut GruParams,
    c: &GruCache,
    dout: &[f64],
    dx: &mut [f64],
    dh: &mut [f64],
) {
    let hd = p.hidden();
    let mut da = vec![0.0; 3 * hd];
    for i in 0..hd {
        let du = dout[i] * (c.n[i] - c.h[i]);
        let dn = dout[i] * c.u[i];
        dh[i] += dout[i] * (1.0 - c.u[i]);
        da[i] = du * c.u[i] * (1.0 - c.u[i]);
        da[2 * hd + i] = dn * (1.0 - c.n[i] * c.n[i]);
    }
    let mut drh = vec![0.0; hd];
    p.u.matvec_t_rows_into(2 * hd, &da[2 * hd..], &mut drh);
    for i in 0..hd {
        let dr = drh[i] * c.h[i];
        dh[i] += drh[i] * c.r[i];
        da[hd + i] = dr * c.r[i] * (1.0 - c.r[i]);
    }
    g.w.add_outer_rows(0, &da, &c.x);
    p.w.matvec_t_rows_into(0, &da, dx);
    g.u.add_outer_rows(0, &da[..2 * hd], &c.h);
    g.u.add_outer_rows(2 * hd, &da[2 * hd..], &c.rh);
    p.u.matvec_t_rows_into(0, &da[..2 * hd], dh);
    g.b.add_slice(0, &da);
}

struct LayerCache {
    /// `fw[t]` / `bw[t]` hold the step that produced the state at position t.
    fw: Vec<GruCache>,
    bw: Vec<GruCache>,
}

fn check_ids(ids: &[usize], size: usize, side: &str) -> Result<()> {
    if let Some(&bad) = ids.iter().find(|&&i| i >= size) {
        return Err(Error::InvalidArgument(format!(
            "{side} id {bad} out of range for vocabulary of {size}"
        )));
    }
    Ok(())
}

fn encode_cached(model: &NmtModel, ids: &[usize]) -> Result<(EncoderStates, Vec<LayerCache>)> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument("empty source sentence".into()));
    }
    check_ids(ids, model.config.src_vocab_size, "source")?;
    let p = &model.params;
    let hd = model.config.enc_hidden;
    let mut inputs: Vec<Vec<f64>> = ids.iter().map(|&i| p.src_emb.row(i).to_vec()).collect();
    let mut caches = Vec::with_capacity(p.enc.len());
    for [fwp, bwp] in &p.enc {
        let t_len = inputs.len();
        let mut fw = Vec::with_capacity(t_len);
        let mut h = vec![0.0; hd];
        for x in &inputs {
            let c = gru_step(fwp, x, &h);
            h = c.out.clone();
            fw.push(c);
        }
        let mut bw_rev = Vec::with_capacity(t_len);
        let mut h = vec![0.0; hd];
        for x in inputs.iter().rev() {
            let c = gru_step(bwp, x, &h);
            h = c.out.clone();
            bw_rev.push(c);
        }
        bw_rev.reverse();
        inputs = fw
            .iter()
            .zip(&bw_rev)
            .map(|(f, b)| [f.out.as_slice(), b.out.as_slice()].concat())
            .collect();
        caches.push(LayerCache { fw, bw: bw_rev });
    }
    let mask = vec![true; inputs.len()];
    Ok((EncoderStates::new(p, inputs, mask), caches))
}

pub fn encode(model: &NmtModel, ids: &[usize]) -> Result<EncoderStates> {
    encode_cached(model, ids).map(|(e, _)| e)
}

struct AttCache {
    query: Vec<f64>,
    /// `tanh` activations per unmasked position (empty when masked).
    s: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    ctx: Vec<f64>,
}

fn attend_cached(p: &Params, z_prev: &[f64], y_emb: &[f64], enc: &EncoderStates) -> AttCache {
    let a = p.att_v.rows;
    let mut query = vec![0.0; a];
    p.att_wz.matvec_rows_into(0..a, z_prev, &mut query);
    p.att_wy.matvec_rows_into(0..a, y_emb, &mut query);
    let mut s = Vec::with_capacity(enc.len());
    let mut scores = Vec::with_capacity(enc.len());
    for (t, key) in enc.keys.iter().enumerate() {
        if !enc.mask[t] {
            s.push(Vec::new());
            scores.push(f64::NEG_INFINITY);
            continue;
        }
        let st: Vec<f64> = query.iter().zip(key).map(|(q, k)| (q + k).tanh()).collect();
        scores.push(dot(&st, &p.att_v.data));
        s.push(st);
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut alpha: Vec<f64> = scores
        .iter()
        .map(|&e| if e == f64::NEG_INFINITY { 0.0 } else { (e - max).exp() })
        .collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|x| *x /= total);
    let mut ctx = vec![0.0; p.att_wh.cols];
    for (w, h) in alpha.iter().zip(&enc.annotations) {
        if *w == 0.0 {
            continue;
        }
        for (c, v) in ctx.iter_mut().zip(h) {
            *c += w * v;
        }
    }
    AttCache {
        query,
        s,
        alpha,
        ctx,
    }
}

/// Context vector and attention weights for the next decoder step.
pub fn attend(
    model: &NmtModel,
    state: &DecoderState,
    y_prev_emb: &[f64],
    enc: &EncoderStates,
) -> (Vec<f64>, Vec<f64>) {
    let c = attend_cached(&model.params, &state.z, y_prev_emb, enc);
    (c.ctx, c.alpha)
}

pub fn decoder_init(model: &NmtModel, enc: &EncoderStates) -> DecoderState {
    let p = &model.params;
    let mean = annotation_mean(enc);
    let mut a = p.init_b.data.clone();
    p.init_w.matvec_rows_into(0..p.init_w.rows, &mean, &mut a);
    let active = enc.active() as f64;
    DecoderState {
        z: a.iter().map(|v| v.tanh()).collect(),
        alpha: enc
            .mask
            .iter()
            .map(|&m| if m { 1.0 / active } else { 0.0 })
            .collect(),
    }
}

fn annotation_mean(enc: &EncoderStates) -> Vec<f64> {
    let dim = enc.annotations.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    let active = enc.active() as f64;
    for (h, &m) in enc.annotations.iter().zip(&enc.mask) {
        if m {
            for (a, v) in mean.iter_mut().zip(h) {
                *a += v / active;
            }
        }
    }
    mean
}

struct StepCache {
    y_prev: usize,
    att: AttCache,
    gru: GruCache,
    drop: Option<Vec<f64>>,
    /// Output-layer input after dropout.
    out_in: Vec<f64>,
    logp: Vec<f64>,
}

fn step_cached(
    p: &Params,
    z_prev: &[f64],
    y_prev: usize,
    enc: &EncoderStates,
    drop: Option<Vec<f64>>,
) -> StepCache {
    let y_emb = p.tgt_emb.row(y_prev);
    let att = attend_cached(p, z_prev, y_emb, enc);
    let x = [y_emb, att.ctx.as_slice()].concat();
    let gru = gru_step(&p.dec, &x, z_prev);
    let out_in: Vec<f64> = match &drop {
        Some(m) => gru.out.iter().zip(m).map(|(z, m)| z * m).collect(),
        None => gru.out.clone(),
    };
    let mut logits = p.out_b.data.clone();
    p.out_w.matvec_rows_into(0..p.out_w.rows, &out_in, &mut logits);
    let logp = log_softmax(&logits);
    StepCache {
        y_prev,
        att,
        gru,
        drop,
        out_in,
        logp,
    }
}

/// One decoder step: attention, GRU update and log-probabilities over the
/// target vocabulary.
pub fn decode_step(
    model: &NmtModel,
    state: &DecoderState,
    y_prev: usize,
    enc: &EncoderStates,
) -> (DecoderState, Vec<f64>) {
    let c = step_cached(&model.params, &state.z, y_prev, enc, None);
    (
        DecoderState {
            z: c.gru.out,
            alpha: c.att.alpha,
        },
        c.logp,
    )
}

fn dropout_mask(rate: f64, len: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Negative log-likelihood of `target` given `source` under teacher forcing,
/// plus `l2_coeff * |theta|^2`, with gradients for every parameter.
///
/// `target` is the sequence to predict (normally ending in EOS); the first
/// decoder input is BOS. Dropout on the output-layer input is applied when an
/// RNG is supplied and the configured rate is positive.
pub fn sequence_loss(
    model: &NmtModel,
    source: &[usize],
    target: &[usize],
    mut dropout: Option<&mut dyn RngCore>,
) -> Result<(f64, Params)> {
    if target.is_empty() {
        return Err(Error::InvalidArgument("empty target sequence".into()));
    }
    check_ids(target, model.config.tgt_vocab_size, "target")?;
    let p = &model.params;
    let cfg = &model.config;
    let (enc, enc_caches) = encode_cached(model, source)?;
    let init = decoder_init(model, &enc);

    let mut steps = Vec::with_capacity(target.len());
    let mut z = init.z.clone();
    let mut y_prev = BOS;
    let mut nll = 0.0;
    for &y in target {
        let drop = match dropout.as_deref_mut() {
            Some(rng) if cfg.dropout_rate > 0.0 => Some(dropout_mask(cfg.dropout_rate, z.len(), rng)),
            _ => None,
        };
        let c = step_cached(p, &z, y_prev, &enc, drop);
        nll -= c.logp[y];
        z = c.gru.out.clone();
        y_prev = y;
        steps.push(c);
    }
    let loss = nll + cfg.l2_coeff * p.sum_squares();

    let mut g = Params::zeros(cfg);
    let t_len = enc.len();
    let cdim = cfg.ctx_dim();
    let e = cfg.embed_dim;
    let mut d_ann = vec![vec![0.0; cdim]; t_len];
    let mut d_keys = vec![vec![0.0; p.att_v.rows]; t_len];
    let mut dz_next = vec![0.0; cfg.dec_hidden];

    for (c, &y) in steps.iter().zip(target).rev() {
        let mut dlogits: Vec<f64> = c.logp.iter().map(|l| l.exp()).collect();
        dlogits[y] -= 1.0;
        g.out_w.add_outer_rows(0, &dlogits, &c.out_in);
        g.out_b.add_slice(0, &dlogits);
        let mut dz = vec![0.0; cfg.dec_hidden];
        p.out_w.matvec_t_rows_into(0, &dlogits, &mut dz);
        if let Some(m) = &c.drop {
            dz.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
        }
        dz.iter_mut().zip(&dz_next).for_each(|(d, n)| *d += n);

        let mut dx = vec![0.0; e + cdim];
        let mut dz_prev = vec![0.0; cfg.dec_hidden];
        gru_backward(&p.dec, &mut g.dec, &c.gru, &dz, &mut dx, &mut dz_prev);
        let (dy_emb, dctx) = dx.split_at_mut(e);

        // attention
        let att = &c.att;
        let dalpha: Vec<f64> = enc.annotations.iter().map(|h| dot(dctx, h)).collect();
        let weighted: f64 = att.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let mut dquery = vec![0.0; p.att_v.rows];
        for t in 0..t_len {
            if !enc.mask[t] {
                continue;
            }
            let a = att.alpha[t];
            for (dh, dc) in d_ann[t].iter_mut().zip(dctx.iter()) {
                *dh += a * dc;
            }
            let de = a * (dalpha[t] - weighted);
            let s = &att.s[t];
            for (k, sk) in s.iter().enumerate() {
                g.att_v.data[k] += de * sk;
                let dpre = de * p.att_v.data[k] * (1.0 - sk * sk);
                d_keys[t][k] += dpre;
                dquery[k] += dpre;
            }
        }
        let z_prev = &c.gru.h;
        let y_emb = p.tgt_emb.row(c.y_prev);
        g.att_wz.add_outer_rows(0, &dquery, z_prev);
        p.att_wz.matvec_t_rows_into(0, &dquery, &mut dz_prev);
        g.att_wy.add_outer_rows(0, &dquery, y_emb);
        p.att_wy.matvec_t_rows_into(0, &dquery, dy_emb);
        g.tgt_emb.add_slice(c.y_prev * e, dy_emb);
        let _ = &att.query;
        dz_next = dz_prev;
    }

    for t in 0..t_len {
        g.att_wh.add_outer_rows(0, &d_keys[t], &enc.annotations[t]);
        p.att_wh.matvec_t_rows_into(0, &d_keys[t], &mut d_ann[t]);
        g.att_b.add_slice(0, &d_keys[t]);
    }

    // initial state
    let da: Vec<f64> = dz_next
        .iter()
        .zip(&init.z)
        .map(|(d, z)| d * (1.0 - z * z))
        .collect();
    let mean = annotation_mean(&enc);
    g.init_w.add_outer_rows(0, &da, &mean);
    g.init_b.add_slice(0, &da);
    let mut dmean = vec![0.0; cdim];
    p.init_w.matvec_t_rows_into(0, &da, &mut dmean);
    let active = enc.active() as f64;
    for t in 0..t_len {
        if enc.mask[t] {
            d_ann[t].iter_mut().zip(&dmean).for_each(|(a, d)| *a += d / active);
        }
    }

    // encoder, top layer first
    let hd = cfg.enc_hidden;
    let mut d_out = d_ann;
    for (l, cache) in enc_caches.iter().enumerate().rev() {
        let [fwp, bwp] = &p.enc[l];
        let in_dim = fwp.w.cols;
        let mut d_in = vec![vec![0.0; in_dim]; t_len];
        let mut carry = vec![0.0; hd];
        for t in (0..t_len).rev() {
            let dh: Vec<f64> = d_out[t][..hd].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let mut dh_prev = vec![0.0; hd];
            gru_backward(fwp, &mut g.enc[l][0], &cache.fw[t], &dh, &mut d_in[t], &mut dh_prev);
            carry = dh_prev;
        }
        let mut carry = vec![0.0; hd];
        for t in 0..t_len {
            let dh: Vec<f64> = d_out[t][hd..].iter().zip(&carry).map(|(a, b)| a + b).collect();
            let mut dh_prev = vec![0.0; hd];
            gru_backward(bwp, &mut g.enc[l][1], &cache.bw[t], &dh, &mut d_in[t], &mut dh_prev);
            carry = dh_prev;
        }
        d_out = d_in;
    }
    for (t, &id) in source.iter().enumerate() {
        g.src_emb.add_slice(id * e, &d_out[t]);
    }

    if cfg.l2_coeff > 0.0 {
        g.add_scaled(p, 2.0 * cfg.l2_coeff);
    }
    Ok((loss, g))
}

/// Teacher-forced NLL without regularization or dropout.
pub fn sequence_nll(model: &NmtModel, source: &[usize], target: &[usize]) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::InvalidArgument("empty target sequence".into()));
    }
    check_ids(target, model.config.tgt_vocab_size, "target")?;
    let enc = encode(model, source)?;
    let mut state = decoder_init(model, &enc);
    let mut y_prev = BOS;
    let mut nll = 0.0;
    for &y in target {
        let (next, logp) = decode_step(model, &state, y_prev, &enc);
        nll -= logp[y];
        state = next;
        y_prev = y;
    }
    Ok(nll)
}

/// Argmax prediction at every target position under teacher forcing.
pub fn teacher_forced_argmax(model: &NmtModel, source: &[usize], target: &[usize]) -> Result<Vec<usize>> {
    let enc = encode(model, source)?;
    let mut state = decoder_init(model, &enc);
    let mut y_prev = BOS;
    let mut out = Vec::with_capacity(target.len());
    for &y in target {
        let (next, logp) = decode_step(model, &state, y_prev, &enc);
        out.push(argmax(&logp));
        state = next;
        y_prev = y;
    }
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> NmtModel {
        NmtModel::new(NmtConfig {
            src_vocab_size: 7,
            tgt_vocab_size: 6,
            embed_dim: 3,
            enc_hidden: 2,
            enc_layers: 2,
            dec_hidden: 3,
            attn_hidden: 4,
            dropout_rate: 0.3,
            l2_coeff: 1e-2,
            seed: 5,
            init_scale: 0.5,
        })
        .unwrap()
    }

    #[test]
    fn zero_model_fixed_point() {
        let mut m = tiny();
        m.params = Params::zeros(&m.config);
        let enc = encode(&m, &[4, 5, 6]).unwrap();
        for h in &enc.annotations {
            assert!(h.iter().all(|&v| v == 0.0));
        }
        let s = decoder_init(&m, &enc);
        let (_, alpha) = attend(&m, &s, &[0.0; 3], &enc);
        for a in alpha {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_position() {
        let m = tiny();
        let enc = encode(&m, &[4]).unwrap();
        assert_eq!(enc.annotations.len(), 1);
        assert_eq!(enc.annotations[0].len(), 4);
        let s = decoder_init(&m, &enc);
        let (c, alpha) = attend(&m, &s, m.params.tgt_emb.row(2), &enc);
        assert_eq!(alpha, vec![1.0]);
        assert_eq!(c, enc.annotations[0]);
    }

    #[test]
    fn masked_positions_get_nothing() {
        let m = tiny();
        let enc = encode(&m, &[4, 5, 6, 4]).unwrap();
        let masked = EncoderStates::new(&m.params, enc.annotations.clone(), vec![true, false, true, false]);
        let s = decoder_init(&m, &masked);
        assert_eq!(s.alpha, vec![0.5, 0.0, 0.5, 0.0]);
        let (_, alpha) = attend(&m, &s, m.params.tgt_emb.row(4), &masked);
        assert_eq!(alpha[1], 0.0);
        assert_eq!(alpha[3], 0.0);
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn output_bias_only() {
        let mut m = tiny();
        m.params.out_w.fill(0.0);
        m.params.out_b.data = vec![0.1, -0.3, 2.0, 0.0, 0.5, -1.0];
        let enc = encode(&m, &[4, 5]).unwrap();
        let s = decoder_init(&m, &enc);
        let (_, logp) = decode_step(&m, &s, 3, &enc);
        let expect = log_softmax(&m.params.out_b.data);
        for (a, b) in logp.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn id_range_checks() {
        let m = tiny();
        assert!(encode(&m, &[7]).is_err());
        assert!(encode(&m, &[]).is_err());
        assert!(sequence_loss(&m, &[4], &[], None).is_err());
        assert!(sequence_loss(&m, &[4], &[6], None).is_err());
    }

    #[test]
    fn loss_is_deterministic() {
        let mut m = tiny();
        m.config.l2_coeff = 0.0;
        let (a, ga) = sequence_loss(&m, &[4, 5, 6], &[4, 5, 3], None).unwrap();
        let (b, gb) = sequence_loss(&m, &[4, 5, 6], &[4, 5, 3], None).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ga, gb);
        let nll = sequence_nll(&m, &[4, 5, 6], &[4, 5, 3]).unwrap();
        assert!((nll - a).abs() < 1e-12);
    }

    #[test]
    fn eos_only_target() {
        let m = tiny();
        let (loss, _) = sequence_loss(&m, &[4, 5], &[3], None).unwrap();
        let enc = encode(&m, &[4, 5]).unwrap();
        let s = decoder_init(&m, &enc);
        let (_, logp) = decode_step(&m, &s, BOS, &enc);
        let expect = -logp[3] + m.config.l2_coeff * m.params.sum_squares();
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn dropout_masks_follow_the_rng() {
        let m = tiny();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let (a, _) = sequence_loss(&m, &[4, 5], &[4, 3], Some(&mut r1)).unwrap();
        let (b, _) = sequence_loss(&m, &[4, 5], &[4, 3], Some(&mut r2)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
