//! Versioned little-endian binary model dumps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Dense, MlpModel};
use super::NeuralError;

const MAGIC: &[u8; 8] = b"DAFSMLP\0";
const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> NeuralError {
    NeuralError::Checkpoint(e.to_string())
}

pub fn write_checkpoint(model: &MlpModel, mut out: impl Write) -> Result<(), NeuralError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for n in [model.input_dim, model.hidden_dim, model.num_classes()] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    buf.push(model.has_domain_head() as u8);
    buf.extend_from_slice(&model.dropout_rate.to_le_bytes());
    for p in model.parameters() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn read_checkpoint(mut input: impl Read) -> Result<MlpModel, NeuralError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    let mut r = Cursor { bytes: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NeuralError::Checkpoint("not a model checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    let input_dim = r.u64()? as usize;
    let hidden = r.u64()? as usize;
    let classes = r.u64()? as usize;
    let with_domain = match r.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(NeuralError::Checkpoint(format!("bad domain-head flag {b}"))),
    };
    let dropout_rate = r.f64()?;
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(NeuralError::Checkpoint(format!("bad dropout rate {dropout_rate}")));
    }
    let expected = input_dim
        .checked_mul(hidden)
        .and_then(|n| n.checked_add(hidden + hidden * classes + classes + if with_domain { 2 * hidden + 2 } else { 0 }))
        .ok_or_else(|| NeuralError::Checkpoint("dimensions overflow".into()))?;
    if bytes.len() - r.pos != expected * 8 {
        return Err(NeuralError::Checkpoint(format!(
            "expected {expected} parameters, found {} bytes",
            bytes.len() - r.pos
        )));
    }
    let enc_w = r.f64s(input_dim * hidden)?;
    let enc_b = r.f64s(hidden)?;
    let task_head = Dense { inputs: hidden, outputs: classes, w: r.f64s(hidden * classes)?, b: r.f64s(classes)? };
    let domain_head = if with_domain {
        Some(Dense { inputs: hidden, outputs: 2, w: r.f64s(hidden * 2)?, b: r.f64s(2)? })
    } else {
        None
    };
    let model = MlpModel { input_dim, hidden_dim: hidden, enc_w, enc_b, task_head, domain_head, dropout_rate };
    if !model.validate() {
        return Err(NeuralError::Checkpoint("non-finite parameters".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    write_checkpoint(model, BufWriter::new(File::create(path).map_err(io_err)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpModel, NeuralError> {
    read_checkpoint(BufReader::new(File::open(path).map_err(io_err)?))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NeuralError> {
        let end = self.pos + n;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| NeuralError::Checkpoint("truncated".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NeuralError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn round_trip_is_bit_exact() {
        for with_domain in [false, true] {
            let m = MlpModel::new(50, 7, 3, with_domain, 0.25, &mut stream(1, 0));
            let mut buf = Vec::new();
            write_checkpoint(&m, &mut buf).unwrap();
            assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), m);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = MlpModel::new(20, 4, 2, true, 0.1, &mut stream(2, 0));
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let m = MlpModel::new(10, 3, 2, false, 0.0, &mut stream(3, 0));
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut nan = buf.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(read_checkpoint(nan.as_slice()).is_err());
    }
}
