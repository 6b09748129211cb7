//! Attention-based GRU encoder-decoder.

mod checkpoint;
mod model;
mod optim;
mod params;
mod search;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use model::{
    argmax, attend, decode_step, decoder_init, encode, sequence_loss, sequence_nll, teacher_forced_argmax,
    DecoderState, EncoderStates, NmtModel,
};
pub use optim::{adadelta_update, Adadelta};
pub use params::{GruParams, NmtConfig, Params};
pub use search::{beam_decode, greedy_decode, Hypothesis};
pub use tensor::{log_softmax, sigmoid, Tensor};
pub use train::{corpus_nll, train, EarlyStopping, EpochStats, IdPair, TrainConfig, TrainOutcome};
