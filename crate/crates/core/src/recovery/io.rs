//! Binary policy file. All integers and floats little-endian:
//!
//! ```text
//! "CCRP" | version u32 | scenario hash [u8; 32]
//! t_min t_max b_min b_max time_res energy_res: f64
//! n_time n_cells n_energy: u32
//! values: f64 * len | actions: u8 * len
//! ```

use std::fs;
use std::path::Path;

use super::lattice::StateLattice;
use super::RecoveryPolicy;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CCRP";
const VERSION: u32 = 1;

impl RecoveryPolicy {
    pub fn to_bytes(&self) -> Vec<u8> {
        let lat = &self.lattice;
        let mut out = Vec::with_capacity(128 + self.values.len() * 9);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&hex_to_bytes(&self.scenario_hash).unwrap_or([0; 32]));
        for v in [lat.t_min, lat.t_max, lat.b_min, lat.b_max, lat.time_res, lat.energy_res] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for n in [lat.n_time, lat.n_cells, lat.n_energy] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.actions);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::PolicyFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::PolicyFormat(format!("unsupported version {version}")));
        }
        let hash: String = r.take(32)?.iter().map(|b| format!("{b:02x}")).collect();
        let mut f = [0.0; 6];
        for v in &mut f {
            *v = r.f64()?;
        }
        let n_time = r.u32()? as usize;
        let n_cells = r.u32()? as usize;
        let n_energy = r.u32()? as usize;
        let lattice = StateLattice {
            t_min: f[0],
            t_max: f[1],
            b_min: f[2],
            b_max: f[3],
            time_res: f[4],
            energy_res: f[5],
            n_time,
            n_cells,
            n_energy,
        };
        let len = lattice.len();
        let values: Vec<f64> = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
        let actions = r.take(len)?.to_vec();
        if r.pos != bytes.len() {
            return Err(Error::PolicyFormat(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(RecoveryPolicy {
            lattice,
            scenario_hash: hash,
            values,
            actions,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        RecoveryPolicy::from_bytes(&bytes)
    }
}

fn hex_to_bytes(hex: &str) -> Option<[u8; 32]> {
    if hex.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::PolicyFormat("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
