//! Versioned binary encoder state.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   b"CGCLENC\0"
//! version u32 (= 1)
//! u64 x 7 layer_count, feature_dim, substructure_dim, hidden_dim,
//!         projection_dim, step, parameter_count
//! f64 x parameter_count   parameters
//! f64 x parameter_count   Adam first moments
//! f64 x parameter_count   Adam second moments
//! ```
//!
//! Parameters are written block by block in the order of
//! [`Params::for_each_block`], each matrix row-major.

use std::fs;
use std::path::Path;

use super::params::Params;
use super::{EncoderState, OptimizerState};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CGCLENC\0";
const VERSION: u32 = 1;

/// Column-major flat vector (nalgebra layout) to row-major per block.
fn to_row_major(params: &Params, flat: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(flat.len());
    let mut at = 0;
    params.for_each_block(|b, (r, c)| {
        let block = &flat[at..at + b.len()];
        for i in 0..r {
            for j in 0..c {
                out.push(block[j * r + i]);
            }
        }
        at += b.len();
    });
    out
}

fn from_row_major(params: &Params, flat: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; flat.len()];
    let mut at = 0;
    params.for_each_block(|b, (r, c)| {
        for i in 0..r {
            for j in 0..c {
                out[at + j * r + i] = flat[at + i * c + j];
            }
        }
        at += b.len();
    });
    out
}

pub fn to_bytes(st: &EncoderState) -> Vec<u8> {
    let p = &st.params;
    let header = [
        p.layers.len() as u64,
        st.feature_dim as u64,
        st.substructure_dim as u64,
        st.hidden_dim() as u64,
        p.head.lin2.out_dim() as u64,
        st.step,
        p.len() as u64,
    ];
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for h in header {
        out.extend_from_slice(&h.to_le_bytes());
    }
    let zeros = vec![0.0; p.len()];
    let moment = |m: &Vec<f64>| {
        if m.len() == p.len() {
            m.clone()
        } else {
            zeros.clone()
        }
    };
    for flat in [p.to_vec(), moment(&st.optimizer.m), moment(&st.optimizer.v)] {
        for x in to_row_major(p, &flat) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Format(format!(
                "encoder state truncated at byte {}",
                self.at
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("parameter count overflows".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<EncoderState> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not an encoder state file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported encoder state version {version}"
        )));
    }
    let mut h = [0u64; 7];
    for x in &mut h {
        *x = r.u64()?;
    }
    let [layers, feature_dim, sub_dim, hidden, proj, step, count] = h.map(|x| x as usize);
    if layers == 0
        || feature_dim == 0
        || hidden == 0
        || proj == 0
        || [layers, feature_dim, sub_dim, hidden, proj]
            .iter()
            .any(|&d| d > 1 << 20)
    {
        return Err(Error::Format(format!(
            "implausible encoder dimensions {h:?}"
        )));
    }
    let mut params = Params::init(0, layers, feature_dim, sub_dim, hidden, proj, 0.0);
    if params.len() != count {
        return Err(Error::Format(format!(
            "header declares {count} parameters, dimensions imply {}",
            params.len()
        )));
    }
    let values = from_row_major(&params, &r.f64s(count)?);
    let m = from_row_major(&params, &r.f64s(count)?);
    let v = from_row_major(&params, &r.f64s(count)?);
    if r.at != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes in encoder state",
            bytes.len() - r.at
        )));
    }
    params.set_from_slice(&values);
    Ok(EncoderState {
        params,
        optimizer: OptimizerState { m, v },
        step: step as u64,
        feature_dim,
        substructure_dim: sub_dim,
    })
}

pub fn save_state(st: &EncoderState, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(st)).map_err(|e| Error::io(path, e))
}

pub fn load_state(path: &Path) -> Result<EncoderState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
