//! Binary checkpoint container.
//!
//! Layout, all little-endian: `b"HGTF"`, `u32` version, `u32` tensor count,
//! then per tensor `u16` name length, UTF-8 name, `u8` dtype (0 f32, 1 f64),
//! `u8` rank, `rank × u64` extents and the row-major payload; a trailing
//! `u32` CRC32 covers every preceding byte. A `key = value` sidecar with
//! the run configuration sits next to the file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hgts_tensor::{DType, Element, Tensor};

use crate::config::RunConfig;
use crate::error::{HgtsError, Result};
use crate::model::HgtsFormer;

pub const MAGIC: &[u8; 4] = b"HGTF";
pub const VERSION: u32 = 1;

/// A tensor as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub payload: Vec<u8>,
}

impl StoredTensor {
    pub fn to_tensor<T: Element>(&self) -> Result<Tensor<T>> {
        let size = self.dtype.size_of();
        let chunks = self.payload.chunks(size);
        let data: Vec<T> = if T::DTYPE == self.dtype {
            chunks.map(T::read_le).collect()
        } else {
            match self.dtype {
                DType::F32 => chunks.map(|b| T::of(f32::read_le(b) as f64)).collect(),
                DType::F64 => chunks.map(|b| T::of(f64::read_le(b))).collect(),
            }
        };
        Ok(Tensor::new(self.shape.clone(), data)?)
    }
}

pub fn encode<T: Element>(tensors: &[(&str, &Tensor<T>)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| HgtsError::InvalidArgument(format!("tensor name too long: {name}")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(bytes);
        out.push(T::DTYPE.code());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            HgtsError::Format(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Parses and verifies a whole checkpoint image; nothing is returned
/// unless every check passes.
pub fn decode(bytes: &[u8]) -> Result<Vec<StoredTensor>> {
    if bytes.len() < 16 {
        return Err(HgtsError::Format(format!("file of {} bytes is too short", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(HgtsError::Format("bad magic, not an HGTF checkpoint".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(HgtsError::Format(format!("unsupported version {version}, expected {VERSION}")));
    }
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(HgtsError::Format(format!(
            "checksum mismatch (stored {stored:08x}, computed {actual:08x}); file is corrupt or truncated"
        )));
    }
    let mut cur = Cursor { bytes: body, pos: 8 };
    let count = cur.u32("tensor count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let len = cur.u16("name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "name")?)
            .map_err(|_| HgtsError::Format(format!("tensor {i}: name is not UTF-8")))?
            .to_string();
        let code = cur.u8("dtype")?;
        let dtype = DType::from_code(code).ok_or_else(|| HgtsError::Format(format!("{name}: unknown dtype {code}")))?;
        let rank = cur.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = cur.u64("extent")?;
            if d == 0 {
                return Err(HgtsError::Format(format!("{name}: zero extent")));
            }
            shape.push(usize::try_from(d).map_err(|_| HgtsError::Format(format!("{name}: extent {d} too large")))?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(dtype.size_of()))
            .ok_or_else(|| HgtsError::Format(format!("{name}: payload size overflows")))?;
        let payload = cur.take(numel, &name)?.to_vec();
        out.push(StoredTensor {
            name,
            dtype,
            shape,
            payload,
        });
    }
    if cur.pos != body.len() {
        return Err(HgtsError::Format(format!("{} trailing bytes after the last tensor", body.len() - cur.pos)));
    }
    Ok(out)
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| HgtsError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| HgtsError::io(&tmp, e))?;
    f.sync_all().map_err(|e| HgtsError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| HgtsError::io(path, e))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".cfg");
    PathBuf::from(s)
}

/// Saves model parameters plus a sidecar holding `run` and the parameter
/// count.
pub fn save_checkpoint<T: Element>(path: &Path, model: &HgtsFormer<T>, run: &RunConfig) -> Result<()> {
    if run.model != *model.config() {
        return Err(HgtsError::InvalidArgument("run config does not describe this model".into()));
    }
    let named: Vec<(&str, &Tensor<T>)> = model.params().iter().map(|(_, p)| (p.name(), p.value())).collect();
    let bytes = encode(&named)?;
    write_atomic(path, &bytes)?;
    let sidecar = format!(
        "{}\n[checkpoint]\nformat_version = {VERSION}\ndtype = {:?}\ntensors = {}\nparam_count = {}\n",
        run.to_text(),
        T::DTYPE,
        named.len(),
        model.num_parameters()
    );
    write_atomic(&sidecar_path(path), sidecar.as_bytes())
}

/// Run configuration and recorded metadata from a sidecar.
#[derive(Clone, Debug)]
pub struct Sidecar {
    pub run: RunConfig,
    pub param_count: usize,
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| HgtsError::io(&side, e))?;
    let (cfg_text, meta) = text
        .split_once("[checkpoint]")
        .ok_or_else(|| HgtsError::Format(format!("{}: missing [checkpoint] section", side.display())))?;
    let run = RunConfig::parse(cfg_text)?;
    let param_count = meta
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "param_count")
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| HgtsError::Format(format!("{}: missing param_count", side.display())))?;
    Ok(Sidecar { run, param_count })
}

/// Rebuilds the model described by the sidecar and fills in the stored
/// parameters. Fails without side effects on any mismatch.
pub fn load_checkpoint<T: Element>(path: &Path) -> Result<(HgtsFormer<T>, RunConfig)> {
    let bytes = fs::read(path).map_err(|e| HgtsError::io(path, e))?;
    let tensors = decode(&bytes)?;
    let side = read_sidecar(path)?;
    let mut model = HgtsFormer::<T>::new(side.run.model.clone(), 0)?;
    if side.param_count != model.num_parameters() {
        return Err(HgtsError::Integrity(format!(
            "sidecar records {} parameters, config implies {}",
            side.param_count,
            model.num_parameters()
        )));
    }
    if tensors.len() != model.params().len() {
        return Err(HgtsError::Integrity(format!(
            "checkpoint holds {} tensors, model has {}",
            tensors.len(),
            model.params().len()
        )));
    }
    let mut values = Vec::with_capacity(tensors.len());
    for st in &tensors {
        let id = model
            .params()
            .find(&st.name)
            .ok_or_else(|| HgtsError::Integrity(format!("unexpected tensor {}", st.name)))?;
        let want = model.params().value(id).shape();
        if st.shape != want {
            return Err(HgtsError::Integrity(format!(
                "{}: stored shape {:?}, config expects {want:?}",
                st.name, st.shape
            )));
        }
        values.push((id, st.to_tensor::<T>()?));
    }
    for (id, v) in values {
        model.params_mut().set_value(id, v)?;
    }
    Ok((model, side.run))
}
