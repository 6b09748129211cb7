//! Single-file model checkpoints: one JSON header line followed by the raw
//! little-endian f64 data of every tensor.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::NmtModel;
use super::params::{NmtConfig, Params};
use crate::corpus::Vocab;
use crate::{Error, Result};

const FORMAT: &str = "arnmt-checkpoint-v1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    /// Byte offset from the start of the data section.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    config: NmtConfig,
    src_vocab: Vec<String>,
    tgt_vocab: Vec<String>,
    tensors: Vec<TensorEntry>,
}

fn vocab_from_list(list: &[String]) -> Result<Vocab> {
    let v = Vocab::from_tokens(list.iter().skip(4).cloned());
    if v.tokens() != list {
        return Err(Error::parse(1, "checkpoint vocabulary is not a valid id list"));
    }
    Ok(v)
}

pub fn write_checkpoint<W: Write>(model: &NmtModel, mut out: W) -> Result<()> {
    let mut offset = 0;
    let mut tensors = Vec::new();
    for (name, t) in model.params.tensors() {
        tensors.push(TensorEntry {
            name,
            shape: [t.rows, t.cols],
            offset,
        });
        offset += t.data.len() * 8;
    }
    let header = Header {
        format: FORMAT.into(),
        config: model.config.clone(),
        src_vocab: model.src_vocab.tokens().to_vec(),
        tgt_vocab: model.tgt_vocab.tokens().to_vec(),
        tensors,
    };
    let io = |e| Error::io("<checkpoint>", e);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    let mut buf = Vec::with_capacity(offset);
    for (_, t) in model.params.tensors() {
        for x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<NmtModel> {
    let mut reader = BufReader::new(input);
    let io = |e| Error::io("<checkpoint>", e);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line).map_err(io)?;
    let header: Header = serde_json::from_slice(&line)?;
    if header.format != FORMAT {
        return Err(Error::parse(1, format!("unknown checkpoint format `{}`", header.format)));
    }
    header.config.validate()?;
    let mut data = Vec::new();
    reader.read_to_end(&mut data).map_err(io)?;

    let mut params = Params::zeros(&header.config);
    let expected = params.tensors().len();
    if header.tensors.len() != expected {
        return Err(Error::parse(
            1,
            format!("checkpoint lists {} tensors, config needs {expected}", header.tensors.len()),
        ));
    }
    for ((name, t), entry) in params.tensors_mut().into_iter().zip(&header.tensors) {
        if entry.name != name || entry.shape != [t.rows, t.cols] {
            return Err(Error::parse(
                1,
                format!(
                    "tensor `{}` has shape {:?}, expected `{name}` with shape [{}, {}]",
                    entry.name, entry.shape, t.rows, t.cols
                ),
            ));
        }
        let end = entry.offset + t.data.len() * 8;
        let bytes = data
            .get(entry.offset..end)
            .ok_or_else(|| Error::parse(1, format!("tensor `{name}` data is truncated")))?;
        for (x, chunk) in t.data.iter_mut().zip(bytes.chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    }
    let src_vocab = vocab_from_list(&header.src_vocab)?;
    let tgt_vocab = vocab_from_list(&header.tgt_vocab)?;
    if src_vocab.len() != header.config.src_vocab_size || tgt_vocab.len() != header.config.tgt_vocab_size {
        return Err(Error::parse(1, "vocabulary size disagrees with config"));
    }
    Ok(NmtModel {
        config: header.config,
        params,
        src_vocab,
        tgt_vocab,
    })
}

pub fn save_checkpoint(model: &NmtModel, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(f))
}

pub fn load_checkpoint(path: &Path) -> Result<NmtModel> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> NmtModel {
        NmtModel::new(NmtConfig {
            src_vocab_size: 6,
            tgt_vocab_size: 5,
            embed_dim: 2,
            enc_hidden: 3,
            enc_layers: 2,
            dec_hidden: 2,
            attn_hidden: 2,
            ..NmtConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), &mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), &mut buf).unwrap();
        let text = String::from_utf8_lossy(&buf).replacen("\"embed_dim\":2", "\"embed_dim\":3", 1);
        assert!(read_checkpoint(text.as_bytes()).is_err());
    }
}
