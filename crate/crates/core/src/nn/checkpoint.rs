use super::adam::Adam;
use super::param::Module;
use crate::error::{Error, Result};
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ASVNAVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named tensors with a JSON header.
///
/// Layout (little-endian): magic, `u32` version, `u64` header length, header
/// JSON, `u32` tensor count, then per tensor `u32` name length, name, `u64`
/// rows, `u64` columns and the `f64` values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub tensors: Vec<(String, Array2<f64>)>,
}

impl Checkpoint {
    pub fn new(header: serde_json::Value) -> Self {
        Self { header, tensors: Vec::new() }
    }

    pub fn push_module<M: Module>(&mut self, prefix: &str, module: &M) {
        for (i, p) in module.params().into_iter().enumerate() {
            self.tensors.push((format!("{prefix}.{i}"), p.value.clone()));
        }
    }

    pub fn push_optimizer(&mut self, prefix: &str, opt: &Adam) {
        let (m, v) = opt.moments();
        for (i, t) in m.iter().enumerate() {
            self.tensors.push((format!("{prefix}.m.{i}"), t.clone()));
        }
        for (i, t) in v.iter().enumerate() {
            self.tensors.push((format!("{prefix}.v.{i}"), t.clone()));
        }
    }

    fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn restore_module<M: Module>(&self, prefix: &str, module: &mut M) -> Result<()> {
        for (i, p) in module.params_mut().into_iter().enumerate() {
            let name = format!("{prefix}.{i}");
            let t = self.get(&name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.dim() != p.value.dim() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, network expects {:?}",
                    t.dim(),
                    p.value.dim()
                )));
            }
            p.value.assign(t);
            p.zero_grad();
        }
        Ok(())
    }

    /// Restores optimiser moments; `shapes` are the parameter shapes of the
    /// optimised module. Absent moments (optimiser never stepped) are fine.
    pub fn restore_optimizer<M: Module>(&self, prefix: &str, opt: &mut Adam, module: &M) -> Result<()> {
        let shapes: Vec<_> = module.params().iter().map(|p| p.value.dim()).collect();
        if self.get(&format!("{prefix}.m.0")).is_none() {
            opt.set_moments(Vec::new(), Vec::new());
            return Ok(());
        }
        let fetch = |kind: &str| -> Result<Vec<Array2<f64>>> {
            shapes
                .iter()
                .enumerate()
                .map(|(i, &shape)| {
                    let name = format!("{prefix}.{kind}.{i}");
                    match self.get(&name) {
                        Some(t) if t.dim() == shape => Ok(t.clone()),
                        Some(_) => Err(Error::Checkpoint(format!("tensor {name} has the wrong shape"))),
                        None => Err(Error::Checkpoint(format!("missing tensor {name}"))),
                    }
                })
                .collect()
        };
        let m = fetch("m")?;
        let v = fetch("v")?;
        opt.set_moments(m, v);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let header = serde_json::to_vec(&self.header)?;
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let len = r.u64()? as usize;
        let header = serde_json::from_slice(r.take(len)?)?;
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let total = rows
                .checked_mul(cols)
                .filter(|t| t.checked_mul(8).is_some_and(|b| b <= bytes.len()))
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
            let data = r.take(total * 8)?;
            let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let t = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bytes_round_trip() {
        let mut c = Checkpoint::new(serde_json::json!({"kind": "test"}));
        c.tensors.push(("a".into(), array![[1.0, 2.5], [-0.0, f64::MIN_POSITIVE]]));
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let c = Checkpoint::new(serde_json::json!({}));
        let mut bytes = c.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
