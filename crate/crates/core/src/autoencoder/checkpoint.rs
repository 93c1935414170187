//! Binary model checkpoints. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "AEPCKPT\0"
//!      8     4  u32 format version (1)
//!     12     4  u32 activation (0 = linear, 1 = tanh)
//!     16     8  u64 n (input dimension)
//!     24     8  u64 p (hidden dimension)
//!     32     8  u64 training seed
//!     40  8*pn  W_e, p x n, row-major f64
//!      …  8*p   b_e
//!      …  8*np  W_d, n x p, row-major f64
//!      …  8*n   b_d
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{Activation, AutoencoderParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AEPCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: AutoencoderParams,
    pub seed: u64,
}

fn write_row_major<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_all(&m[(r, c)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> std::io::Result<()> {
    let p = &ckpt.params;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let act: u32 = match p.activation {
        Activation::Linear => 0,
        Activation::Tanh => 1,
    };
    w.write_all(&act.to_le_bytes())?;
    w.write_all(&(p.input_dim() as u64).to_le_bytes())?;
    w.write_all(&(p.hidden_dim() as u64).to_le_bytes())?;
    w.write_all(&ckpt.seed.to_le_bytes())?;
    write_row_major(&mut w, &p.encoder)?;
    for v in p.encoder_bias.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    write_row_major(&mut w, &p.decoder)?;
    for v in p.decoder_bias.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> std::io::Result<Vec<f64>> {
    (0..count).map(|_| read_array::<8, _>(r).map(f64::from_le_bytes)).collect()
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let truncated = |e: std::io::Error| Error::Format(format!("truncated checkpoint: {e}"));
    let magic = read_array::<8, _>(&mut r).map_err(truncated)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an autoencoder checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r).map_err(truncated)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let activation = match u32::from_le_bytes(read_array(&mut r).map_err(truncated)?) {
        0 => Activation::Linear,
        1 => Activation::Tanh,
        other => return Err(Error::Format(format!("unknown activation code {other}"))),
    };
    let n = u64::from_le_bytes(read_array(&mut r).map_err(truncated)?) as usize;
    let p = u64::from_le_bytes(read_array(&mut r).map_err(truncated)?) as usize;
    let seed = u64::from_le_bytes(read_array(&mut r).map_err(truncated)?);
    if n == 0 || p == 0 {
        return Err(Error::Format(format!("invalid checkpoint shape n={n}, p={p}")));
    }
    let encoder = DMatrix::from_row_slice(p, n, &read_f64s(&mut r, p * n).map_err(truncated)?);
    let encoder_bias = DVector::from_vec(read_f64s(&mut r, p).map_err(truncated)?);
    let decoder = DMatrix::from_row_slice(n, p, &read_f64s(&mut r, n * p).map_err(truncated)?);
    let decoder_bias = DVector::from_vec(read_f64s(&mut r, n).map_err(truncated)?);
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(truncated)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    let params = AutoencoderParams {
        encoder,
        encoder_bias,
        decoder,
        decoder_bias,
        activation,
    };
    params.validate()?;
    Ok(Checkpoint { params, seed })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(file), ckpt).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            params: AutoencoderParams {
                encoder: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
                encoder_bias: DVector::from_vec(vec![0.5, -0.5]),
                decoder: DMatrix::from_row_slice(3, 2, &[-1.0, -2.0, -3.0, -4.0, -5.0, -6.0]),
                decoder_bias: DVector::from_vec(vec![0.1, 0.2, 0.3]),
                activation: Activation::Tanh,
            },
            seed: 99,
        }
    }

    #[test]
    fn byte_layout() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        assert_eq!(buf.len(), 40 + 8 * (2 * 6 + 2 + 3));
        assert_eq!(&buf[..8], b"AEPCKPT\0");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[24..32].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[32..40].try_into().unwrap()), 99);
        // W_e row-major: second value is W_e[0][1] = 2.
        assert_eq!(f64::from_le_bytes(buf[48..56].try_into().unwrap()), 2.0);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..5, p in 1usize..4, seed: u64, vals in proptest::collection::vec(-1e6f64..1e6, 64)) {
            let mut it = vals.iter().cycle().copied();
            let params = AutoencoderParams {
                encoder: DMatrix::from_fn(p, n, |_, _| it.next().unwrap()),
                encoder_bias: DVector::from_fn(p, |_, _| it.next().unwrap()),
                decoder: DMatrix::from_fn(n, p, |_, _| it.next().unwrap()),
                decoder_bias: DVector::from_fn(n, |_, _| it.next().unwrap()),
                activation: if seed % 2 == 0 { Activation::Linear } else { Activation::Tanh },
            };
            let ckpt = Checkpoint { params, seed };
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &ckpt).unwrap();
            prop_assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), ckpt);
        }
    }
}
