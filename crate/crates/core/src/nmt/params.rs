use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::{Error, Result};

/// Model dimensions and regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmtConfig {
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    pub embed_dim: usize,
    /// Units per encoder direction.
    pub enc_hidden: usize,
    pub enc_layers: usize,
    pub dec_hidden: usize,
    pub attn_hidden: usize,
    pub dropout_rate: f64,
    pub l2_coeff: f64,
    pub seed: u64,
    /// Half-width of the uniform initialization range.
    pub init_scale: f64,
}

impl Default for NmtConfig {
    fn default() -> Self {
        NmtConfig {
            src_vocab_size: 100,
            tgt_vocab_size: 100,
            embed_dim: 32,
            enc_hidden: 64,
            enc_layers: 1,
            dec_hidden: 64,
            attn_hidden: 64,
            dropout_rate: 0.5,
            l2_coeff: 1e-4,
            seed: 1234,
            init_scale: 0.1,
        }
    }
}

impl NmtConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("src_vocab_size", self.src_vocab_size),
            ("tgt_vocab_size", self.tgt_vocab_size),
            ("embed_dim", self.embed_dim),
            ("enc_hidden", self.enc_hidden),
            ("enc_layers", self.enc_layers),
            ("dec_hidden", self.dec_hidden),
            ("attn_hidden", self.attn_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.l2_coeff.is_nan() || self.l2_coeff < 0.0 {
            return Err(Error::Config("l2_coeff must be nonnegative".into()));
        }
        Ok(())
    }

    /// Width of one annotation vector.
    pub fn ctx_dim(&self) -> usize {
        2 * self.enc_hidden
    }
}

/// Gates stacked as update, reset, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// `3H x input`
    pub w: Tensor,
    /// `3H x H`
    pub u: Tensor,
    /// `3H x 1`
    pub b: Tensor,
}

impl GruParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w: Tensor::zeros(3 * hidden, input),
            u: Tensor::zeros(3 * hidden, hidden),
            b: Tensor::zeros(3 * hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols
    }
}

/// Every trainable tensor of the encoder-decoder. Also used for gradients
/// and optimizer accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub src_emb: Tensor,
    pub tgt_emb: Tensor,
    /// Per layer: forward then backward direction.
    pub enc: Vec<[GruParams; 2]>,
    /// Input is `[embedding(y_prev) ; context]`.
    pub dec: GruParams,
    pub init_w: Tensor,
    pub init_b: Tensor,
    pub att_wz: Tensor,
    pub att_wy: Tensor,
    pub att_wh: Tensor,
    pub att_b: Tensor,
    pub att_v: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl Params {
    pub fn zeros(cfg: &NmtConfig) -> Self {
        let e = cfg.embed_dim;
        let h = cfg.enc_hidden;
        let c = cfg.ctx_dim();
        let d = cfg.dec_hidden;
        let a = cfg.attn_hidden;
        let enc = (0..cfg.enc_layers)
            .map(|l| {
                let input = if l == 0 { e } else { c };
                [GruParams::zeros(input, h), GruParams::zeros(input, h)]
            })
            .collect();
        Params {
            src_emb: Tensor::zeros(cfg.src_vocab_size, e),
            tgt_emb: Tensor::zeros(cfg.tgt_vocab_size, e),
            enc,
            dec: GruParams::zeros(e + c, d),
            init_w: Tensor::zeros(d, c),
            init_b: Tensor::zeros(d, 1),
            att_wz: Tensor::zeros(a, d),
            att_wy: Tensor::zeros(a, e),
            att_wh: Tensor::zeros(a, c),
            att_b: Tensor::zeros(a, 1),
            att_v: Tensor::zeros(a, 1),
            out_w: Tensor::zeros(cfg.tgt_vocab_size, d),
            out_b: Tensor::zeros(cfg.tgt_vocab_size, 1),
        }
    }

    /// Uniform weights in `[-init_scale, init_scale)`, zero biases.
    pub fn init(cfg: &NmtConfig) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for (name, t) in p.tensors_mut() {
            if name.ends_with(".b") || name.ends_with("_b") {
                continue;
            }
            *t = Tensor::uniform(t.rows, t.cols, cfg.init_scale, &mut rng);
        }
        p
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("src_emb".to_owned(), &self.src_emb),
            ("tgt_emb".to_owned(), &self.tgt_emb),
        ];
        for (l, dirs) in self.enc.iter().enumerate() {
            for (dir, g) in ["fw", "bw"].iter().zip(dirs) {
                out.push((format!("enc.{l}.{dir}.w"), &g.w));
                out.push((format!("enc.{l}.{dir}.u"), &g.u));
                out.push((format!("enc.{l}.{dir}.b"), &g.b));
            }
        }
        out.extend([
            ("dec.w".to_owned(), &self.dec.w),
            ("dec.u".to_owned(), &self.dec.u),
            ("dec.b".to_owned(), &self.dec.b),
            ("init_w".to_owned(), &self.init_w),
            ("init_b".to_owned(), &self.init_b),
            ("att_wz".to_owned(), &self.att_wz),
            ("att_wy".to_owned(), &self.att_wy),
            ("att_wh".to_owned(), &self.att_wh),
            ("att_b".to_owned(), &self.att_b),
            ("att_v".to_owned(), &self.att_v),
            ("out_w".to_owned(), &self.out_w),
            ("out_b".to_owned(), &self.out_b),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let Params {
            src_emb,
            tgt_emb,
            enc,
            dec,
            init_w,
            init_b,
            att_wz,
            att_wy,
            att_wh,
            att_b,
            att_v,
            out_w,
            out_b,
        } = self;
        let mut out = vec![("src_emb".to_owned(), src_emb), ("tgt_emb".to_owned(), tgt_emb)];
        for (l, dirs) in enc.iter_mut().enumerate() {
            for (dir, g) in ["fw", "bw"].iter().zip(dirs.iter_mut()) {
                out.push((format!("enc.{l}.{dir}.w"), &mut g.w));
                out.push((format!("enc.{l}.{dir}.u"), &mut g.u));
                out.push((format!("enc.{l}.{dir}.b"), &mut g.b));
            }
        }
        out.extend([
            ("dec.w".to_owned(), &mut dec.w),
            ("dec.u".to_owned(), &mut dec.u),
            ("dec.b".to_owned(), &mut dec.b),
            ("init_w".to_owned(), init_w),
            ("init_b".to_owned(), init_b),
            ("att_wz".to_owned(), att_wz),
            ("att_wy".to_owned(), att_wy),
            ("att_wh".to_owned(), att_wh),
            ("att_b".to_owned(), att_b),
            ("att_v".to_owned(), att_v),
            ("out_w".to_owned(), out_w),
            ("out_b".to_owned(), out_b),
        ]);
        out
    }

    pub fn sum_squares(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sum_squares()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }
}
