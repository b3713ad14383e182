//! Binary checkpoint format for [`DuelingNet`].
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  "CCDQNET\0"
//! version    u32      1
//! n_layers   u32
//! layers     n_layers x { role: u32 (0 trunk, 1 value, 2 advantage), inputs: u32, outputs: u32 }
//! params     f64 x total, per layer: weights (outputs x inputs, row-major) then bias
//! ```
//!
//! Layers appear in network order: trunk, value head, advantage head.

use std::path::Path;

use super::net::{DuelingNet, NetShape, Role};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CCDQNET\0";
pub const VERSION: u32 = 1;

pub fn to_bytes(net: &DuelingNet) -> Vec<u8> {
    let layers = net.layers();
    let mut out = Vec::with_capacity(16 + layers.len() * 12 + net.n_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        let role: u32 = match l.role {
            Role::Trunk => 0,
            Role::Value => 1,
            Role::Advantage => 2,
        };
        for word in [role, l.inputs as u32, l.outputs as u32] {
            out.extend_from_slice(&word.to_le_bytes());
        }
    }
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
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
}

pub fn from_bytes(bytes: &[u8]) -> Result<DuelingNet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = r.u32()? as usize;
    let mut specs = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let role = match r.u32()? {
            0 => Role::Trunk,
            1 => Role::Value,
            2 => Role::Advantage,
            other => return Err(Error::Checkpoint(format!("unknown layer role {other}"))),
        };
        specs.push((role, r.u32()? as usize, r.u32()? as usize));
    }
    let shape = shape_from_layers(&specs)?;
    let mut net = DuelingNet::zeros(shape)?;
    if net.layers().len() != specs.len()
        || net
            .layers()
            .iter()
            .zip(&specs)
            .any(|(l, &(role, i, o))| l.role != role || l.inputs != i || l.outputs != o)
    {
        return Err(Error::Checkpoint("layer table is not a dueling network".into()));
    }
    let n = net.n_params();
    let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
    for (p, chunk) in net.params_mut().iter_mut().zip(raw.chunks_exact(8)) {
        *p = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(net)
}

fn shape_from_layers(specs: &[(Role, usize, usize)]) -> Result<NetShape> {
    let of = |role| specs.iter().filter(move |s| s.0 == role);
    let input = specs
        .first()
        .map(|s| s.1)
        .ok_or_else(|| Error::Checkpoint("no layers".into()))?;
    let trunk: Vec<usize> = of(Role::Trunk).map(|s| s.2).collect();
    let head = |role| -> Result<(Vec<usize>, usize)> {
        let outs: Vec<usize> = of(role).map(|s| s.2).collect();
        let (&last, hidden) = outs
            .split_last()
            .ok_or_else(|| Error::Checkpoint(format!("missing {role:?} head")))?;
        Ok((hidden.to_vec(), last))
    };
    let (value_hidden, value_out) = head(Role::Value)?;
    let (advantage_hidden, n_actions) = head(Role::Advantage)?;
    if value_out != 1 {
        return Err(Error::Checkpoint("value head must end in one output".into()));
    }
    Ok(NetShape {
        input,
        trunk,
        value_hidden,
        advantage_hidden,
        n_actions,
    })
}

pub fn save(net: &DuelingNet, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<DuelingNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
