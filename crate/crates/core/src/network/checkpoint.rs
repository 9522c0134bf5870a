//! Binary model checkpoint.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! `f64`:
//!
//! ```text
//! magic          8 bytes  "RMXCKPT\n"
//! version        u32      1
//! n_dims         u32      L + 1 for L layers
//! dims           u32 x n_dims   [D, h1, .., C]
//! dropout        f64
//! n_names        u32      equals C
//! names          n_names x (u32 byte length, UTF-8 bytes)
//! has_scaler     u8       0 or 1
//! scaler         if 1: D x f64 means, then D x f64 stds
//! parameters     per layer: weights (out x in, row-major), then biases
//! ```
//!
//! Nothing may follow the last bias.

use std::fs;
use std::path::Path;

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::{Dense, Network};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RMXCKPT\n";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained network plus what is needed to apply it to new CSV data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub network: Network<T>,
    pub class_names: Vec<String>,
    pub standardizer: Option<Standardizer<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let net = &self.network;
        if self.class_names.len() != net.n_classes() {
            return Err(Error::Checkpoint("class name count differs from output width".into()));
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u32(&mut out, net.layer_dims().len() as u32);
        for &d in net.layer_dims() {
            put_u32(&mut out, d as u32);
        }
        put_f64(&mut out, net.dropout().as_f64());
        put_u32(&mut out, self.class_names.len() as u32);
        for name in &self.class_names {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
        }
        match &self.standardizer {
            Some(s) => {
                if s.means.len() != net.n_inputs() || s.stds.len() != net.n_inputs() {
                    return Err(Error::Checkpoint("standardizer width differs from input width".into()));
                }
                out.push(1);
                for &v in s.means.iter().chain(&s.stds) {
                    put_f64(&mut out, v.as_f64());
                }
            }
            None => out.push(0),
        }
        for v in net.parameters() {
            put_f64(&mut out, v.as_f64());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let n_dims = r.u32()? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::Checkpoint(format!("implausible layer count {n_dims}")));
        }
        let dims: Vec<usize> = (0..n_dims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let dropout = r.f64()?;
        let n_names = r.u32()? as usize;
        let mut class_names = Vec::with_capacity(n_names.min(1024));
        for _ in 0..n_names {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            class_names.push(
                String::from_utf8(raw.to_vec()).map_err(|_| Error::Checkpoint("class name is not UTF-8".into()))?,
            );
        }
        let standardizer = match r.take(1)?[0] {
            0 => None,
            1 => {
                let d = dims[0];
                let means = (0..d).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
                let stds = (0..d).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
                Some(Standardizer { means, stds })
            }
            other => return Err(Error::Checkpoint(format!("bad scaler flag {other}"))),
        };
        let mut layers = Vec::with_capacity(n_dims - 1);
        for w in dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let weights: Vec<T> = (0..n_in * n_out).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
            let biases: Vec<T> = (0..n_out).map(|_| r.f64().map(T::lit)).collect::<Result<_>>()?;
            layers.push(Dense { weights: Matrix::from_vec(n_out, n_in, weights)?, biases });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        let network = Network::from_layers(layers, dropout).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if class_names.len() != network.n_classes() {
            return Err(Error::Checkpoint("class name count differs from output width".into()));
        }
        Ok(Self { network, class_names, standardizer })
    }
}

pub fn write_checkpoint<T: Scalar>(path: &Path, checkpoint: &Checkpoint<T>) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint<f64> {
        Checkpoint {
            network: Network::new(&[2, 5, 3], 0.1, 3).unwrap(),
            class_names: vec!["a".into(), "b".into(), "ç".into()],
            standardizer: Some(Standardizer { means: vec![0.5, -1.0], stds: vec![2.0, 0.25] }),
        }
    }

    #[test]
    fn roundtrip_exact() {
        let c = sample();
        assert_eq!(Checkpoint::<f64>::from_bytes(&c.to_bytes().unwrap()).unwrap(), c);
    }

    #[test]
    fn layout_prefix() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        // params: 2*5+5 + 5*3+3 = 33 f64 at the end
        let n_params = 33 * 8;
        let names = 3 * 4 + 1 + 1 + 2;
        let scaler = 1 + 4 * 8;
        assert_eq!(bytes.len(), 8 + 4 + 4 + 12 + 8 + 4 + names + scaler + n_params);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
    }
}
