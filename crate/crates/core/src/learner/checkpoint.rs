//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "UEDCKPT\0"
//! version      u32      currently 1
//! meta_len     u32      then meta_len bytes of UTF-8 JSON (free-form run metadata)
//! n_entries    u32
//! entry × n_entries:
//!   name_len   u32      then UTF-8 role name
//!   spec_len   u32      then UTF-8 JSON network spec
//!   n_params   u64      then n_params × f64
//!   opt_kind   u8       0 = sgd, 1 = adam
//!   opt_step   u64
//!   n_moments  u64      then n_moments × f64 first moments, n_moments × f64 second moments
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::policy::PolicyHandle;
use super::ppo::{OptimizerKind, OptimizerState};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"UEDCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct CheckpointEntry {
    pub name: String,
    pub policy: PolicyHandle,
    pub optimizer: OptimizerState,
}

pub fn write_checkpoint(path: &Path, meta: &serde_json::Value, entries: &[CheckpointEntry]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_str(&mut buf, &meta.to_string());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        put_str(&mut buf, &e.name);
        let spec = serde_json::to_string(&e.policy.spec).expect("spec serializes");
        put_str(&mut buf, &spec);
        put_f64s(&mut buf, &e.policy.params);
        buf.push(match e.optimizer.kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => 1,
        });
        buf.extend_from_slice(&e.optimizer.step.to_le_bytes());
        buf.extend_from_slice(&(e.optimizer.m.len() as u64).to_le_bytes());
        for v in e.optimizer.m.iter().chain(&e.optimizer.v) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(serde_json::Value, Vec<CheckpointEntry>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let meta: serde_json::Value =
        serde_json::from_str(&r.string()?).map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
    let n = r.u32()? as usize;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.string()?;
        let spec: NetworkSpec =
            serde_json::from_str(&r.string()?).map_err(|e| Error::Checkpoint(format!("bad spec for `{name}`: {e}")))?;
        let np = r.u64()? as usize;
        let params = r.f64s(np)?;
        let policy =
            PolicyHandle::from_params(spec, params).map_err(|e| Error::Checkpoint(format!("entry `{name}`: {e}")))?;
        let kind = match r.take(1)?[0] {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::Adam,
            k => return Err(Error::Checkpoint(format!("unknown optimizer tag {k}"))),
        };
        let step = r.u64()?;
        let nm = r.u64()? as usize;
        let m = r.f64s(nm)?;
        let v = r.f64s(nm)?;
        entries.push(CheckpointEntry {
            name,
            policy,
            optimizer: OptimizerState { kind, step, m, v },
        });
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    Ok((meta, entries))
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, v: &[f64]) {
    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(format!("bad utf-8: {e}")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("length overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
