use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{sequence_loss, sequence_nll, NmtModel};
use super::optim::Adadelta;
use super::params::Params;
use crate::{Error, Result};

/// A sentence pair as ids; the target ends in EOS.
pub type IdPair = (Vec<usize>, Vec<usize>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 20,
            batch_size: 16,
            patience: 3,
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

/// Tracks the best dev loss seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records the dev loss of a 1-based epoch. Returns true when training
    /// should stop.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        self.bad_epochs >= self.patience
    }

    pub fn is_best(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-token training loss (with dropout and L2 as trained).
    pub train_loss: f64,
    /// Per-token dev NLL with dropout off.
    pub dev_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NmtModel,
    pub log: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Mean per-token negative log-likelihood, dropout off.
pub fn corpus_nll(model: &NmtModel, pairs: &[IdPair]) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for (s, t) in pairs {
        total += sequence_nll(model, s, t)?;
        tokens += t.len();
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Minibatch Adadelta with early stopping on dev NLL. Returns the model from
/// the best dev epoch (the initial model when no epoch ran).
pub fn train(model: &NmtModel, train: &[IdPair], dev: &[IdPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut current = model.clone();
    let mut best = model.clone();
    let mut opt = Adadelta::new(&model.config, cfg.rho, cfg.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed);
    let mut stopper = EarlyStopping::new(cfg.patience.max(1));
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = Params::zeros(&current.config);
            for &i in batch {
                let (s, t) = &train[i];
                let (loss, g) = sequence_loss(&current, s, t, Some(&mut rng))?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                epoch_loss += loss;
                epoch_tokens += t.len();
                grad.add_scaled(&g, 1.0);
            }
            grad.scale(1.0 / batch.len() as f64);
            opt.step(&mut current.params, &grad);
            if !current.params.is_finite() {
                return Err(Error::Divergence { epoch });
            }
        }
        let dev_loss = corpus_nll(&current, dev)?;
        if !dev_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let train_loss = if epoch_tokens == 0 { 0.0 } else { epoch_loss / epoch_tokens as f64 };
        log::info!("epoch {epoch}: train {train_loss:.4} dev {dev_loss:.4}");
        log.push(EpochStats {
            epoch,
            train_loss,
            dev_loss,
        });
        let stop = stopper.observe(epoch, dev_loss);
        if stopper.is_best(epoch) {
            best = current.clone();
        }
        if stop {
            break;
        }
    }
    Ok(TrainOutcome {
        model: best,
        log,
        best_epoch: stopper.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EOS;
    use crate::nmt::NmtConfig;

    #[test]
    fn early_stopping_sequence() {
        let mut s = EarlyStopping::new(3);
        let losses = [5.0, 4.0, 4.1, 4.2, 4.3];
        let mut stopped_at = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(i + 1, l) {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(5));
        assert_eq!(s.best_epoch, 2);
    }

    fn tiny() -> NmtModel {
        NmtModel::new(NmtConfig {
            src_vocab_size: 8,
            tgt_vocab_size: 8,
            embed_dim: 4,
            enc_hidden: 4,
            enc_layers: 1,
            dec_hidden: 4,
            attn_hidden: 4,
            dropout_rate: 0.0,
            l2_coeff: 0.0,
            seed: 3,
            init_scale: 0.1,
        })
        .unwrap()
    }

    fn data() -> Vec<IdPair> {
        vec![(vec![4, 5], vec![4, 5, EOS]), (vec![6, 7], vec![6, 7, EOS])]
    }

    #[test]
    fn zero_epochs_returns_input() {
        let m = tiny();
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&m, &data(), &data(), &cfg).unwrap();
        assert_eq!(out.model, m);
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let m = tiny();
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let a = train(&m, &data(), &data(), &cfg).unwrap();
        let b = train(&m, &data(), &data(), &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.log.last().unwrap().dev_loss < corpus_nll(&m, &data()).unwrap());
    }

    #[test]
    fn single_step_decreases_loss() {
        let m = tiny();
        let (s, t) = &data()[0];
        let (before, g) = sequence_loss(&m, s, t, None).unwrap();
        let mut p = m.clone();
        let mut opt = Adadelta::new(&m.config, 0.95, 1e-6);
        opt.step(&mut p.params, &g);
        let (after, _) = sequence_loss(&p, s, t, None).unwrap();
        assert!(after < before);
    }
}
