//! The `TSM1` tensor file format.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "TSM1" | rank | dims[rank] | dtype | payload
//! ```
//!
//! `dtype` is [`DTYPE_F32`]; the payload is `product(dims)` row-major
//! little-endian `f32` values and nothing follows it.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TSM1";
pub const DTYPE_F32: u32 = 1;

/// A decoded tensor: shape plus row-major `f32` payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Format(format!(
                "payload holds {} values but dims {:?} need {expected}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_array(arr: &ArrayD<f64>) -> Self {
        Self {
            dims: arr.shape().to_vec(),
            data: arr.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_array(&self) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&self.dims), self.data.iter().map(|&v| v as f64).collect())
            .expect("dims validated on construction")
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let mut next_u32 = |what: &str| -> Result<u32> {
            let chunk = bytes
                .get(cursor..cursor + 4)
                .ok_or_else(|| Error::Format(format!("truncated header reading {what}")))?;
            cursor += 4;
            Ok(u32::from_le_bytes(chunk.try_into().unwrap()))
        };
        if bytes.get(..4) != Some(MAGIC.as_slice()) {
            return Err(Error::Format("bad magic, expected TSM1".into()));
        }
        next_u32("magic")?;
        let rank = next_u32("rank")? as usize;
        if rank > 16 {
            return Err(Error::Format(format!("implausible rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| next_u32("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let dtype = next_u32("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype code {dtype}")));
        }
        let header = 4 * (3 + rank);
        let count: usize = dims.iter().product();
        let payload = &bytes[header..];
        if payload.len() != count * 4 {
            return Err(Error::Format(format!(
                "payload is {} bytes, dims {:?} need {}",
                payload.len(),
                dims,
                count * 4
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_array(path: &Path, arr: &ArrayD<f64>) -> Result<()> {
    TensorFile::from_array(arr).write(path)
}

pub fn read_array(path: &Path) -> Result<ArrayD<f64>> {
    Ok(TensorFile::read(path)?.to_array())
}
