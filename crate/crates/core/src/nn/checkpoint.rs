//! Checkpoint container.
//!
//! Little-endian layout: magic `N2ICKPT1`, `u32` entry count, then per entry
//! `u32` name length, UTF-8 name, `u32` rank, `rank × u32` dims and the
//! `f32` payload. Reserved entries: `meta.unet` (depth, base channels,
//! kernel, batch norm flag, input channels, output channels), `meta.unroll`
//! (iteration count, unrolled models only) and `mu_log` (unrolled models only).

use std::path::Path;

use super::unet::{UNet, UNetConfig};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"N2ICKPT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<Entry>,
}

/// Decoded network plus the optional unrolling parameters.
#[derive(Clone, Debug)]
pub struct LoadedModel<T> {
    pub net: UNet<T>,
    pub mu_log: Option<T>,
    pub iterations: Option<usize>,
}

impl Checkpoint {
    pub fn push(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.entries.push(Entry { name: name.into(), dims, data });
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend((self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend((e.name.len() as u32).to_le_bytes());
            out.extend(e.name.as_bytes());
            out.extend((e.dims.len() as u32).to_le_bytes());
            for &d in &e.dims {
                out.extend((d as u32).to_le_bytes());
            }
            for &v in &e.data {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name =
                String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("non-UTF-8 name".into()))?;
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let data = r.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            entries.push(Entry { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn from_model<T: Scalar>(net: &UNet<T>, mu_log: Option<T>, iterations: Option<usize>) -> Self {
        let c = net.config();
        let mut ck = Checkpoint::default();
        let meta = [c.depth, c.base_channels, c.kernel, usize::from(c.batch_norm), c.in_channels, c.out_channels];
        ck.push("meta.unet", vec![6], meta.iter().map(|&v| v as f32).collect());
        if let Some(it) = iterations {
            ck.push("meta.unroll", vec![1], vec![it as f32]);
        }
        for ((name, dims), values) in net.tensor_names().into_iter().zip(net.params()) {
            ck.push(name, dims, values.iter().map(|v| v.as_f64() as f32).collect());
        }
        if let Some(m) = mu_log {
            ck.push("mu_log", vec![1], vec![m.as_f64() as f32]);
        }
        ck
    }

    pub fn to_model<T: Scalar>(&self) -> Result<LoadedModel<T>> {
        let meta = self.get("meta.unet").ok_or_else(|| Error::Checkpoint("missing meta.unet".into()))?;
        if meta.data.len() != 6 {
            return Err(Error::Checkpoint("meta.unet must have 6 values".into()));
        }
        let m: Vec<usize> = meta.data.iter().map(|&v| v as usize).collect();
        let config = UNetConfig {
            depth: m[0],
            base_channels: m[1],
            kernel: m[2],
            batch_norm: m[3] != 0,
            in_channels: m[4],
            out_channels: m[5],
        };
        let mut net = UNet::zeros(config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut params = Vec::new();
        for (name, dims) in net.tensor_names() {
            let e = self.get(&name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if e.dims != dims {
                return Err(Error::Checkpoint(format!("tensor {name} has dims {:?}, expected {dims:?}", e.dims)));
            }
            params.push(e.data.iter().map(|&v| T::of(f64::from(v))).collect());
        }
        net.set_params(params)?;
        let scalar = |name: &str| -> Result<Option<f32>> {
            match self.get(name) {
                None => Ok(None),
                Some(e) if e.data.len() == 1 => Ok(Some(e.data[0])),
                Some(_) => Err(Error::Checkpoint(format!("{name} must hold one value"))),
            }
        };
        Ok(LoadedModel {
            net,
            mu_log: scalar("mu_log")?.map(|v| T::of(f64::from(v))),
            iterations: scalar("meta.unroll")?.map(|v| v as usize),
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos.checked_add(n).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
