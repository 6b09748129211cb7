mod common;

use arnmt::corpus::EOS;
use arnmt::nmt::NmtModel;
use common::{gradient_check, tiny_config};

fn check(model: &NmtModel, src: &[usize], tgt: &[usize], dropout_seed: Option<u64>) {
    for (name, rel) in gradient_check(model, src, tgt, dropout_seed, 1e-5) {
        assert!(rel <= 1e-4, "{name}: relative error {rel:e}");
    }
}

#[test]
fn gradients_without_dropout() {
    let mut cfg = tiny_config(11);
    cfg.dropout_rate = 0.0;
    let m = NmtModel::new(cfg).unwrap();
    check(&m, &[4, 5, 6, 4, EOS], &[5, 7, 4, EOS], None);
}

#[test]
fn gradients_with_dropout_and_l2() {
    let m = NmtModel::new(tiny_config(12)).unwrap();
    check(&m, &[6, 4, EOS], &[7, 7, 5, 6, EOS], Some(99));
}

#[test]
fn gradients_single_layer_single_position() {
    let mut cfg = tiny_config(13);
    cfg.enc_layers = 1;
    cfg.l2_coeff = 0.0;
    let m = NmtModel::new(cfg).unwrap();
    check(&m, &[5], &[EOS], Some(1));
}

#[test]
fn gradients_at_larger_weights() {
    let mut cfg = tiny_config(14);
    cfg.init_scale = 1.5;
    cfg.embed_dim = 8;
    cfg.dec_hidden = 8;
    cfg.attn_hidden = 8;
    cfg.enc_hidden = 4;
    let m = NmtModel::new(cfg).unwrap();
    check(&m, &[4, 4, 6, 5, 5, EOS], &[6, 4, 7, EOS], Some(5));
}

