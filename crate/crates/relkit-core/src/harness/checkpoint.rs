//! Bit-exact binary checkpoints: config, parameters, optimizer state, RNG
//! position, and the epoch counter. save -> load -> save reproduces the
//! file byte for byte.

use super::config::ModelConfig;
use super::model::Model;
use crate::numerics::tensor::Tensor;
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"RELKITCKPT\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub class_count: usize,
    /// Next epoch to run when resuming.
    pub next_epoch: usize,
    pub rng_seed: u64,
    pub rng_counter: u64,
    /// Model parameters followed by optimizer velocities, by name.
    pub params: Vec<(String, Tensor<f64>)>,
}

impl Checkpoint {
    /// Capture a model plus optimizer velocity tensors.
    pub fn capture(
        model: &Model,
        velocities: &[Tensor<f64>],
        next_epoch: usize,
        rng_seed: u64,
        rng_counter: u64,
    ) -> Self {
        let names = model.param_names();
        let tensors = model.params();
        let mut params: Vec<(String, Tensor<f64>)> = names
            .iter()
            .zip(&tensors)
            .map(|(n, t)| (n.clone(), (*t).clone()))
            .collect();
        for (n, v) in names.iter().zip(velocities) {
            params.push((format!("opt.velocity.{n}"), v.clone()));
        }
        Checkpoint {
            version: FORMAT_VERSION,
            config: model.config.clone(),
            class_count: model.class_count,
            next_epoch,
            rng_seed,
            rng_counter,
            params,
        }
    }

    /// Rebuild the model and optimizer velocities.
    pub fn restore(&self) -> Result<(Model, Vec<Tensor<f64>>)> {
        let mut model = Model::new(self.config.clone(), self.class_count)?;
        let names = model.param_names();
        {
            let mut slots = model.params_mut();
            for (name, slot) in names.iter().zip(slots.iter_mut()) {
                let stored = self.find(name)?;
                if stored.shape() != slot.shape() {
                    return Err(Error::shape(
                        format!("checkpoint parameter {name}"),
                        format!("{:?}", slot.shape()),
                        format!("{:?}", stored.shape()),
                    ));
                }
                **slot = stored.clone();
            }
        }
        let velocities = names
            .iter()
            .map(|n| self.find(&format!("opt.velocity.{n}")).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok((model, velocities))
    }

    fn find(&self, name: &str) -> Result<&Tensor<f64>> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Format(format!("checkpoint missing tensor '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        let cfg = self.config.to_text();
        out.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&(self.class_count as u64).to_le_bytes());
        out.extend_from_slice(&(self.next_epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.rng_seed.to_le_bytes());
        out.extend_from_slice(&self.rng_counter.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for (name, tensor) in &self.params {
            out.extend_from_slice(&(name.len() as u64).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(tensor.shape().len() as u64).to_le_bytes());
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in tensor.values() {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let cfg_len = r.u64()? as usize;
        let cfg_text = std::str::from_utf8(r.take(cfg_len)?)
            .map_err(|_| Error::Format("checkpoint config is not utf-8".into()))?;
        let config = ModelConfig::parse(cfg_text)?;
        let class_count = r.u64()? as usize;
        let next_epoch = r.u64()? as usize;
        let rng_seed = r.u64()?;
        let rng_counter = r.u64()?;
        let count = r.u64()? as usize;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u64()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("checkpoint name is not utf-8".into()))?
                .to_string();
            let ndims = r.u64()? as usize;
            let mut shape = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                values.push(f64::from_bits(u64::from_le_bytes(
                    r.take(8)?.try_into().unwrap(),
                )));
            }
            params.push((name, Tensor::new(shape, values)?));
        }
        Ok(Checkpoint {
            version,
            config,
            class_count,
            next_epoch,
            rng_seed,
            rng_counter,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let config = ModelConfig {
            feature_dim: 8,
            window: 6,
            kernel_width: 3,
            kernel_stride: 1,
            res_time: 2,
            res_freq: 2,
            embed_dim: 4,
            hidden_width: 6,
            ..ModelConfig::default()
        };
        let model = Model::new(config, 3).unwrap();
        let velocities: Vec<Tensor<f64>> = model
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.shape().to_vec()))
            .collect();
        let ckpt = Checkpoint::capture(&model, &velocities, 5, 42, 1234);
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let (restored, vel) = back.restore().unwrap();
        assert_eq!(restored.params(), model.params());
        assert_eq!(vel.len(), velocities.len());
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        assert!(matches!(
            Checkpoint::from_bytes(b"RELKITCKPT\n\x01"),
            Err(Error::Format(_))
        ));
    }
}
