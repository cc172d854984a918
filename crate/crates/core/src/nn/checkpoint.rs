//! Little-endian binary dump: magic, version, architecture tag, groups,
//! seed, parameter count, parameters.

use std::io::{Read, Write};

use super::{Arch, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MOBPCNW\0";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(net: &Network, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let tag = net.arch().name().as_bytes();
    w.write_all(&(tag.len() as u32).to_le_bytes())?;
    w.write_all(tag)?;
    w.write_all(&(net.groups() as u64).to_le_bytes())?;
    w.write_all(&net.seed().to_le_bytes())?;
    w.write_all(&(net.n_params() as u64).to_le_bytes())?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Network> {
    if &read_array::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("not a policy checkpoint".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let tag_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if tag_len > 64 {
        return Err(Error::Checkpoint("corrupt architecture tag".into()));
    }
    let mut tag = vec![0u8; tag_len];
    r.read_exact(&mut tag).map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    let arch: Arch = std::str::from_utf8(&tag)
        .map_err(|_| Error::Checkpoint("corrupt architecture tag".into()))?
        .parse()
        .map_err(|e: Error| Error::Checkpoint(e.to_string()))?;
    let groups = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if groups == 0 || groups > 1000 || n > 100_000_000 {
        return Err(Error::Checkpoint("corrupt checkpoint header".into()));
    }
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        params.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Network::from_parts(arch, groups, seed, params)
}
