//! Binary checkpoint container, all integers and floats little-endian:
//!
//! ```text
//! "ADRD1"
//! u32 len, network config (key=value text)
//! u32 len, training state (key=value text)
//! u32 count, then per parameter:
//!     u32 len, name; u32 ndim; u32 dims[ndim]; f32 values[prod(dims)]
//! u8 optimizer present
//!     u64 t; f64 lr, beta1, beta2, eps; per parameter f32 m[..], f32 v[..]
//! ```

use std::path::Path;

use crate::blocks::{Network, NetworkConfig};
use crate::kv::KvMap;
use crate::tensor::{ParamStore, Tensor};

use super::{AdamState, TrainError};

pub const MAGIC: &[u8; 5] = b"ADRD1";

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub state: KvMap,
    pub optimizer: Option<AdamState<f32>>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn put_text(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_checkpoint(network: &Network<f32>, state: &KvMap, optimizer: Option<&AdamState<f32>>) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    put_text(&mut out, &network.config().to_kv().to_text());
    put_text(&mut out, &state.to_text());
    let store = network.params();
    put_u32(&mut out, store.len());
    for (_, p) in store.iter() {
        put_text(&mut out, p.name());
        put_u32(&mut out, p.value().shape().len());
        p.value().shape().iter().for_each(|&d| put_u32(&mut out, d));
        put_f32s(&mut out, p.value().data());
    }
    match optimizer {
        None => out.push(0),
        Some(adam) => {
            out.push(1);
            out.extend_from_slice(&adam.steps().to_le_bytes());
            for h in [adam.lr, adam.beta1, adam.beta2, adam.eps] {
                out.extend_from_slice(&h.to_le_bytes());
            }
            for (m, v) in adam.first_moments().iter().zip(adam.second_moments()) {
                put_f32s(&mut out, m);
                put_f32s(&mut out, v);
            }
        }
    }
    out
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    network: &Network<f32>,
    state: &KvMap,
    optimizer: Option<&AdamState<f32>>,
) -> Result<(), TrainError> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(network, state, optimizer))
        .map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.bytes.len() - self.pos < n {
            return Err(TrainError::Checkpoint(format!("truncated file at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, TrainError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, TrainError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn text(&mut self) -> Result<&'a str, TrainError> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| TrainError::Checkpoint("text field is not UTF-8".into()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, TrainError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| TrainError::Checkpoint("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint, TrainError> {
    let err = |m: String| TrainError::Checkpoint(m);
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC[..4] {
        return Err(err("not an ADRD checkpoint (magic \"ADRD1\" absent)".into()));
    }
    if bytes[4] != MAGIC[4] {
        return Err(err(format!("unsupported checkpoint version `{}`", bytes[4] as char)));
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let config_map = KvMap::parse(r.text()?).map_err(|e| err(format!("network config: {e}")))?;
    let config = NetworkConfig::from_kv(&config_map, &NetworkConfig::full())?;
    let state = KvMap::parse(r.text()?).map_err(|e| err(format!("training state: {e}")))?;
    let mut network = Network::<f32>::new(config)?;
    let store: &mut ParamStore<f32> = network.params_mut();

    let count = r.u32()?;
    let mut order = Vec::with_capacity(count);
    let mut seen = vec![false; store.len()];
    for _ in 0..count {
        let name = r.text()?.to_string();
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX);
        let values = r.f32s(numel)?;
        let id = store.find(&name).ok_or_else(|| err(format!("unknown parameter `{name}`")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(err(format!("parameter `{name}` appears twice")));
        }
        let value = Tensor::new(&shape, values).map_err(|e| err(format!("`{name}`: {e}")))?;
        store.set_value(id, value).map_err(|e| err(e.to_string()))?;
        order.push(id);
    }
    if let Some(missing) = store.iter().find(|(id, _)| !seen[id.index()]) {
        return Err(err(format!("missing parameter `{}`", missing.1.name())));
    }

    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let t = r.u64()?;
            let hyper = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
            let mut m = vec![Vec::new(); store.len()];
            let mut v = vec![Vec::new(); store.len()];
            for id in &order {
                let n = store.value(*id).numel();
                m[id.index()] = r.f32s(n)?;
                v[id.index()] = r.f32s(n)?;
            }
            Some(AdamState::from_parts(store, hyper, t, m, v)?)
        }
        flag => return Err(err(format!("invalid optimizer flag {flag}"))),
    };
    if r.pos != bytes.len() {
        return Err(err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { network, state, optimizer })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, TrainError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    read_checkpoint(&bytes)
}
