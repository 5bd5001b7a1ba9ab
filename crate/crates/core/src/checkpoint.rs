//! Binary parameter container.
//!
//! Layout: the magic bytes `SVGA1`, then per tensor a little-endian `u32`
//! name length, the UTF-8 name, `u64` rows, `u64` cols and `rows·cols`
//! row-major `f64` values. Biases are stored as `1 × k`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{EncoderHead, ModelParams, TENSOR_NAMES};

pub const MAGIC: &[u8; 5] = b"SVGA1";

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for (name, rows, cols, values) in params.tensors() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        out.extend_from_slice(&(cols as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.0.len() < k {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.0.split_at(k);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint("dimension overflow".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut cur = Cursor(bytes);
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut tensors: Vec<Array2<f64>> = Vec::new();
    while !cur.0.is_empty() {
        let expected = TENSOR_NAMES
            .get(tensors.len())
            .ok_or_else(|| Error::Checkpoint("too many tensors".into()))?;
        let len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(len)?).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        if name != *expected {
            return Err(Error::Checkpoint(format!("expected tensor {expected}, found {name}")));
        }
        let (rows, cols) = (cur.u64()?, cur.u64()?);
        let count = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Checkpoint("dimension overflow".into()))?;
        let raw = cur.take(count)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("non-finite value in {name}")));
        }
        tensors.push(Array2::from_shape_vec((rows, cols), values).expect("sized above"));
    }
    if tensors.len() != 8 && tensors.len() != 12 {
        return Err(Error::Checkpoint(format!("expected 8 or 12 tensors, found {}", tensors.len())));
    }
    let has_sigma = tensors.len() == 12;
    let mut it = tensors.into_iter();
    let mut next = || it.next().expect("counted above");
    let encoder = read_head(&mut next, "")?;
    let wx = next();
    let bx = bias(next(), "bx")?;
    let wy = next();
    let by = bias(next(), "by")?;
    let sigma = if has_sigma { Some(read_head(&mut next, "_sigma")?) } else { None };
    let params = ModelParams {
        encoder,
        wx,
        bx,
        wy,
        by,
        sigma,
    };
    check_shapes(&params)?;
    Ok(params)
}

fn bias(a: Array2<f64>, name: &str) -> Result<Array1<f64>> {
    if a.nrows() != 1 {
        return Err(Error::Checkpoint(format!("bias {name} must have one row")));
    }
    Ok(a.row(0).to_owned())
}

fn read_head(next: &mut impl FnMut() -> Array2<f64>, suffix: &str) -> Result<EncoderHead> {
    Ok(EncoderHead {
        w1: next(),
        b1: bias(next(), &format!("b1{suffix}"))?,
        w2: next(),
        b2: bias(next(), &format!("b2{suffix}"))?,
    })
}

fn check_shapes(p: &ModelParams) -> Result<()> {
    let (n, d) = p.encoder.w1.dim();
    let head_ok = |h: &EncoderHead| h.w1.dim() == (n, d) && h.b1.len() == d && h.w2.dim() == (d, d) && h.b2.len() == d;
    let ok = head_ok(&p.encoder)
        && p.wx.ncols() == d
        && p.bx.len() == p.wx.nrows()
        && p.wy.ncols() == d
        && p.by.len() == p.wy.nrows()
        && p.sigma.as_ref().is_none_or(head_ok);
    if ok {
        Ok(())
    } else {
        Err(Error::Checkpoint("inconsistent tensor shapes".into()))
    }
}

pub fn save(path: &Path, params: &ModelParams) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
