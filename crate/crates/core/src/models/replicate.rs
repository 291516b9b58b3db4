//! Replicate sets and their binary container format.

use std::io::{Read, Write};
use std::path::Path;

use super::ModelError;

const MAGIC: &[u8; 4] = b"NBES";
const VERSION: u16 = 1;

/// Upper bound on `n * m` accepted when reading a container, to reject
/// implausible headers before allocating.
const MAX_ELEMENTS: u64 = 1 << 31;

/// Marginal transform applied elementwise to a replicate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    /// ln(z); moves approximately unit-Frechet data onto the unit Gumbel scale.
    LogGumbel,
    /// sign(z)|z|^{1/3}; variance stabilisation for heavy-tailed data.
    CubeRoot,
}

impl Transform {
    pub fn tag(self) -> u8 {
        match self {
            Transform::None => 0,
            Transform::LogGumbel => 1,
            Transform::CubeRoot => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self, ModelError> {
        match tag {
            0 => Ok(Transform::None),
            1 => Ok(Transform::LogGumbel),
            2 => Ok(Transform::CubeRoot),
            other => Err(ModelError::Format(format!("unknown transform tag {other}"))),
        }
    }

    /// Applies the transform in place. LogGumbel rejects nonpositive values.
    pub fn apply_slice(self, data: &mut [f64]) -> Result<(), ModelError> {
        match self {
            Transform::None => Ok(()),
            Transform::LogGumbel => {
                if let Some(bad) = data.iter().find(|v| **v <= 0.0) {
                    return Err(ModelError::Transform(format!(
                        "log transform requires strictly positive data, found {bad}"
                    )));
                }
                for v in data.iter_mut() {
                    *v = v.ln();
                }
                Ok(())
            }
            Transform::CubeRoot => {
                for v in data.iter_mut() {
                    *v = v.cbrt();
                }
                Ok(())
            }
        }
    }
}

/// `m` conditionally i.i.d. replicates of dimension `n`, stored
/// replicate-contiguous (column per replicate).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    n: usize,
    m: usize,
    data: Vec<f64>,
    model_id: u16,
    transform: Transform,
}

impl ReplicateSet {
    pub fn new(n: usize, m: usize, data: Vec<f64>, model_id: u16) -> Result<Self, ModelError> {
        if n == 0 || m == 0 {
            return Err(ModelError::Parameter(format!(
                "replicate set requires n >= 1 and m >= 1, got n={n}, m={m}"
            )));
        }
        if data.len() != n * m {
            return Err(ModelError::Parameter(format!(
                "data length {} does not match n*m = {}",
                data.len(),
                n * m
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(ModelError::Parameter(format!(
                "replicate data contains non-finite value {bad}"
            )));
        }
        Ok(ReplicateSet {
            n,
            m,
            data,
            model_id,
            transform: Transform::None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn model_id(&self) -> u16 {
        self.model_id
    }

    pub fn transform_tag(&self) -> Transform {
        self.transform
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `j`-th replicate as a contiguous slice of length `n`.
    pub fn replicate(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn replicates(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    /// Restriction to a subset of replicates, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<ReplicateSet, ModelError> {
        if indices.is_empty() {
            return Err(ModelError::Parameter(
                "replicate selection must be non-empty".into(),
            ));
        }
        let mut data = Vec::with_capacity(indices.len() * self.n);
        for &j in indices {
            if j >= self.m {
                return Err(ModelError::Parameter(format!(
                    "replicate index {j} out of range for m={}",
                    self.m
                )));
            }
            data.extend_from_slice(self.replicate(j));
        }
        Ok(ReplicateSet {
            n: self.n,
            m: indices.len(),
            data,
            model_id: self.model_id,
            transform: self.transform,
        })
    }

    /// Applies a marginal transform, recording the tag. A set can carry at
    /// most one transform; composition is not representable in the container
    /// header and is rejected.
    pub fn apply_transform(mut self, kind: Transform) -> Result<ReplicateSet, ModelError> {
        if kind == Transform::None {
            return Ok(self);
        }
        if self.transform != Transform::None {
            return Err(ModelError::Transform(
                "replicate set already carries a transform tag".into(),
            ));
        }
        kind.apply_slice(&mut self.data)?;
        self.transform = kind;
        Ok(self)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        let n = u32::try_from(self.n)
            .map_err(|_| ModelError::Format(format!("n={} exceeds u32 range", self.n)))?;
        let m = u32::try_from(self.m)
            .map_err(|_| ModelError::Format(format!("m={} exceeds u32 range", self.m)))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.model_id.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&m.to_le_bytes())?;
        w.write_all(&[self.transform.tag()])?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<ReplicateSet, ModelError> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(ModelError::Format(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = u16::from_le_bytes(read_array(r)?);
        if version != VERSION {
            return Err(ModelError::Format(format!(
                "unsupported container version {version}"
            )));
        }
        let model_id = u16::from_le_bytes(read_array(r)?);
        let n = u32::from_le_bytes(read_array(r)?) as u64;
        let m = u32::from_le_bytes(read_array(r)?) as u64;
        let mut tag = [0u8; 1];
        read_exact(r, &mut tag)?;
        let transform = Transform::from_tag(tag[0])?;
        if n == 0 || m == 0 {
            return Err(ModelError::Format(format!(
                "header declares empty dimensions n={n}, m={m}"
            )));
        }
        let total = n * m;
        if total > MAX_ELEMENTS {
            return Err(ModelError::Format(format!(
                "header declares {total} elements, above the {MAX_ELEMENTS} limit"
            )));
        }
        let mut data = vec![0.0f64; total as usize];
        for v in data.iter_mut() {
            *v = f64::from_le_bytes(read_array(r)?);
        }
        // Transformed data may legitimately contain -inf only for LogGumbel
        // of exact zeros, which the writer rejects; require finite throughout.
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(ModelError::Format(format!(
                "payload contains non-finite value {bad}"
            )));
        }
        Ok(ReplicateSet {
            n: n as usize,
            m: m as usize,
            data,
            model_id,
            transform,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ReplicateSet, ModelError> {
        let file = std::fs::File::open(path)?;
        let mut r = std::io::BufReader::new(file);
        let rs = ReplicateSet::read_from(&mut r)?;
        // Trailing bytes indicate a corrupt or concatenated file.
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(ModelError::Format(
                "trailing bytes after container payload".into(),
            ));
        }
        Ok(rs)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ModelError::Format("container truncated".into())
        } else {
            ModelError::Io(e)
        }
    })
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}
