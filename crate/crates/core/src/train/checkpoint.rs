//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  "CLAQSCKP"
//! version    u32      1
//! config     u32 length + UTF-8 TOML (fully resolved run config)
//! step       u64      optimizer steps taken
//! epoch      u64      epochs completed
//! rng seed   u64      every random stream is derived from (seed, epoch, step)
//! vocab      u32 count, then per token u32 length + UTF-8
//! arrays     u32 count, then per array:
//!              u32 name length + UTF-8 name
//!              u32 ndim, ndim × u64 dims
//!              numel × (f64 re, f64 im)
//! ```
//!
//! Parameter arrays use their names (`w_e`, `b`, `head.w1`, …); optimizer
//! moments are stored as `adam.m.<name>` and `adam.v.<name>`.

use std::path::Path;

use crate::autodiff::C64;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{ParamId, Params, Tensor};
use crate::train::optim::AdamW;

const MAGIC: &[u8; 8] = b"CLAQSCKP";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub step: u64,
    pub epoch: u64,
    pub seed: u64,
    pub vocab: Vec<String>,
    pub params: Params,
    /// Optimizer moments as `(m, v)`, one tensor per parameter.
    pub moments: Option<(Vec<Tensor>, Vec<Tensor>)>,
}

impl Checkpoint {
    /// Restores optimizer state onto a fresh AdamW built from the config.
    pub fn optimizer(&self) -> AdamW {
        let mut opt = AdamW::new(&self.config.optim, &self.params);
        opt.t = self.step;
        if let Some((m, v)) = &self.moments {
            opt.m = m.iter().map(|t| t.data.clone()).collect();
            opt.v = v.iter().map(|t| t.data.clone()).collect();
        }
        opt
    }

    pub fn moments_from(opt: &AdamW, params: &Params) -> (Vec<Tensor>, Vec<Tensor>) {
        let wrap = |vs: &[Vec<C64>]| {
            params
                .iter()
                .zip(vs)
                .map(|((_, t), data)| Tensor {
                    shape: t.shape.clone(),
                    data: data.clone(),
                })
                .collect()
        };
        (wrap(&opt.m), wrap(&opt.v))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.config.to_toml());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        for tok in &self.vocab {
            put_str(&mut out, tok);
        }
        let mut arrays: Vec<(String, &Tensor)> = self.params.iter().map(|(id, t)| (id.name().to_string(), t)).collect();
        if let Some((m, v)) = &self.moments {
            for (id, t) in ParamId::ALL.into_iter().zip(m) {
                arrays.push((format!("adam.m.{}", id.name()), t));
            }
            for (id, t) in ParamId::ALL.into_iter().zip(v) {
                arrays.push((format!("adam.v.{}", id.name()), t));
            }
        }
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (name, t) in arrays {
            put_str(&mut out, &name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for z in &t.data {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config = RunConfig::from_toml_str(&r.string()?)?;
        let step = r.u64()?;
        let epoch = r.u64()?;
        let seed = r.u64()?;
        let vocab = (0..r.u32()?).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let count = r.u32()?;
        let mut arrays = std::collections::BTreeMap::new();
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let data = (0..numel)
                .map(|_| Ok(C64::new(r.f64()?, r.f64()?)))
                .collect::<Result<Vec<_>>>()?;
            arrays.insert(name, Tensor { shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let mut take = |name: String| {
            arrays
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
        };
        let params = Params::from_tensors(
            ParamId::ALL
                .into_iter()
                .map(|id| take(id.name().to_string()))
                .collect::<Result<_>>()?,
        );
        let moments = if arrays.contains_key("adam.m.b") {
            let mut take = |prefix: &str| {
                ParamId::ALL
                    .into_iter()
                    .map(|id| {
                        let name = format!("{prefix}{}", id.name());
                        arrays
                            .remove(&name)
                            .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let m = take("adam.m.")?;
            let v = take("adam.v.")?;
            Some((m, v))
        } else {
            None
        };
        Ok(Self {
            config,
            step,
            epoch,
            seed,
            vocab,
            params,
            moments,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
