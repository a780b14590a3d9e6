//! `ENAV0001` checkpoint files.
//!
//! Layout: 8 magic bytes, a little-endian `u64` header length, the JSON header,
//! then every parameter as a little-endian `f32` in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::net::{PolicyConfig, PolicyNet};
use super::vocab::TOKEN_NAMES;
use super::PolicyError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ENAV0001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointParam {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub params: Vec<CheckpointParam>,
    pub vocab: Vec<String>,
    pub config: PolicyConfig,
    pub config_hash: String,
    /// Free-form metadata (stage, update index, success rate...).
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub(crate) fn config_hash(cfg: &PolicyConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

fn err(m: impl Into<String>) -> PolicyError {
    PolicyError::Checkpoint(m.into())
}

pub fn write_checkpoint<W: Write>(net: &PolicyNet, meta: serde_json::Value, mut w: W) -> Result<(), PolicyError> {
    let header = CheckpointHeader {
        params: net
            .specs()
            .iter()
            .map(|s| CheckpointParam {
                name: s.name.clone(),
                shape: s.shape.clone(),
            })
            .collect(),
        vocab: TOKEN_NAMES.iter().map(|s| s.to_string()).collect(),
        config: net.config().clone(),
        config_hash: config_hash(net.config()),
        meta,
    };
    let json = serde_json::to_vec(&header).map_err(|e| err(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut payload = Vec::with_capacity(net.num_params() * 4);
    for &p in net.params() {
        payload.extend_from_slice(&(p as f32).to_le_bytes());
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(PolicyNet, CheckpointHeader), PolicyError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(err("bad magic bytes"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 26 {
        return Err(err(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| err(format!("header: {e}")))?;
    if header.config_hash != config_hash(&header.config) {
        return Err(err("config hash mismatch"));
    }
    if header.vocab.iter().map(String::as_str).ne(TOKEN_NAMES.iter().copied()) {
        return Err(err("vocabulary differs from this build"));
    }
    let expected = header.config.param_shapes();
    let matches = expected.len() == header.params.len()
        && expected
            .iter()
            .zip(&header.params)
            .all(|((n, s), p)| *n == p.name && *s == p.shape);
    if !matches {
        return Err(err("parameter table does not match the config"));
    }
    let n: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * 4 {
        return Err(err(format!("payload has {} bytes, expected {}", payload.len(), n * 4)));
    }
    let params = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let net = PolicyNet::from_parts(header.config.clone(), params)?;
    Ok((net, header))
}

pub fn save_checkpoint(net: &PolicyNet, meta: serde_json::Value, path: &Path) -> Result<(), PolicyError> {
    let mut buf = Vec::new();
    write_checkpoint(net, meta, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyNet, CheckpointHeader), PolicyError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::test_fixtures::{fixture_ctx, small_net};
    use crate::policy::Mode;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = small_net(3);
        let mut buf = Vec::new();
        write_checkpoint(&net, serde_json::json!({"stage": "I"}), &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let (back, header) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(header.meta["stage"], "I");
        assert!(net
            .params()
            .iter()
            .zip(back.params())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let ctx = fixture_ctx(&net, 3, Mode::Think);
        let a = net.act_think(&ctx, 8, 0.0, 0).unwrap();
        let b = back.act_think(&ctx, 8, 0.0, 0).unwrap();
        assert_eq!(a.tokens, b.tokens);
        let la: Vec<u64> = a.logprobs.iter().map(|x| x.to_bits()).collect();
        let lb: Vec<u64> = b.logprobs.iter().map(|x| x.to_bits()).collect();
        assert_eq!(la, lb);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let net = small_net(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&net, serde_json::Value::Null, &path).unwrap();
        let (back, _) = load_checkpoint(&path).unwrap();
        assert_eq!(back, net);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        assert!(read_checkpoint(&bytes[..]).is_err());
        bytes[0] = b'X';
        assert!(read_checkpoint(&bytes[..]).is_err());
    }
}
