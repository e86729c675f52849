//! Binary file formats and the run configuration.
//!
//! Cubes travel as `HSC1` files: a 4-byte magic, three little-endian `u32`
//! extents (vertical, horizontal, bands), then `NB` little-endian `f32`
//! values in the column-stacked order. Index masks travel as `HSM1` files:
//! magic, the same extent triple, a `u64` count, then that many sorted
//! 1-based `u64` flat indices. Both formats round-trip bit-exactly and all
//! writes go through a temp file plus atomic rename.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cube::{CubeDims, HsCube};
use crate::linop::SamplingMask;
use crate::{Error, Result};

const CUBE_MAGIC: &[u8; 4] = b"HSC1";
const MASK_MAGIC: &[u8; 4] = b"HSM1";

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_dims(bytes: &[u8], what: &str) -> Result<CubeDims> {
    let mut field = [0u8; 4];
    let mut take = |off: usize| {
        field.copy_from_slice(&bytes[off..off + 4]);
        u32::from_le_bytes(field) as usize
    };
    let (n_v, n_h, bands) = (take(4), take(8), take(12));
    CubeDims::new(n_v, n_h, bands)
        .map_err(|_| Error::MalformedFile(format!("{what}: invalid extents {n_v}x{n_h}x{bands}")))
}

fn push_dims(out: &mut Vec<u8>, dims: CubeDims) {
    out.extend_from_slice(&(dims.n_v as u32).to_le_bytes());
    out.extend_from_slice(&(dims.n_h as u32).to_le_bytes());
    out.extend_from_slice(&(dims.bands as u32).to_le_bytes());
}

/// Writes a cube as an `HSC1` file (values stored as `f32`).
pub fn write_cube(path: &Path, cube: &HsCube) -> Result<()> {
    let dims = cube.dims();
    let mut out = Vec::with_capacity(16 + 4 * dims.nb());
    out.extend_from_slice(CUBE_MAGIC);
    push_dims(&mut out, dims);
    for &v in cube.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    atomic_write(path, &out)
}

/// Reads an `HSC1` file, validating magic, extents, payload length, and
/// finiteness of every value.
pub fn read_cube(path: &Path) -> Result<HsCube> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..4] != CUBE_MAGIC {
        return Err(Error::MalformedFile(format!(
            "{}: not an HSC1 cube file",
            path.display()
        )));
    }
    let dims = read_dims(&bytes, "cube")?;
    let expected = 16 + 4 * dims.nb();
    if bytes.len() != expected {
        return Err(Error::MalformedFile(format!(
            "{}: expected {expected} bytes for {dims}, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(dims.nb());
    for chunk in bytes[16..].chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::MalformedFile(format!(
                "{}: non-finite value in payload",
                path.display()
            )));
        }
        data.push(v as f64);
    }
    HsCube::from_vec(dims, data)
}

/// Writes an `HSM1` index file; `one_based` must be sorted strictly
/// ascending within `1..=NB`.
pub fn write_mask_file(path: &Path, dims: CubeDims, one_based: &[u64]) -> Result<()> {
    for pair in one_based.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidParameter(
                "mask indices must be strictly increasing".into(),
            ));
        }
    }
    if let Some(&last) = one_based.last() {
        if last == 0 || last > dims.nb() as u64 {
            return Err(Error::OutOfRange(format!(
                "mask index {last} outside 1..={}",
                dims.nb()
            )));
        }
    }
    if one_based.first() == Some(&0) {
        return Err(Error::OutOfRange("mask indices are 1-based".into()));
    }
    let mut out = Vec::with_capacity(24 + 8 * one_based.len());
    out.extend_from_slice(MASK_MAGIC);
    push_dims(&mut out, dims);
    out.extend_from_slice(&(one_based.len() as u64).to_le_bytes());
    for &i in one_based {
        out.extend_from_slice(&i.to_le_bytes());
    }
    atomic_write(path, &out)
}

/// Reads an `HSM1` file back as `(dims, one_based_indices)`.
pub fn read_mask_file(path: &Path) -> Result<(CubeDims, Vec<u64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 || &bytes[..4] != MASK_MAGIC {
        return Err(Error::MalformedFile(format!(
            "{}: not an HSM1 mask file",
            path.display()
        )));
    }
    let dims = read_dims(&bytes, "mask")?;
    let mut count_bytes = [0u8; 8];
    count_bytes.copy_from_slice(&bytes[16..24]);
    let count = u64::from_le_bytes(count_bytes) as usize;
    let expected = 24 + 8 * count;
    if bytes.len() != expected {
        return Err(Error::MalformedFile(format!(
            "{}: expected {expected} bytes for {count} indices, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut indices = Vec::with_capacity(count);
    let mut prev = 0u64;
    for chunk in bytes[24..].chunks_exact(8) {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(chunk);
        let idx = u64::from_le_bytes(buf);
        if idx <= prev || idx > dims.nb() as u64 {
            return Err(Error::MalformedFile(format!(
                "{}: indices must be strictly increasing within 1..={}",
                path.display(),
                dims.nb()
            )));
        }
        prev = idx;
        indices.push(idx);
    }
    Ok((dims, indices))
}

/// Writes a sampling mask with the 1-based index convention.
pub fn write_sampling_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    let one_based: Vec<u64> = mask.kept().iter().map(|&i| i as u64 + 1).collect();
    write_mask_file(path, mask.dims(), &one_based)
}

/// Reads a sampling mask (the file must hold at least one index).
pub fn read_sampling_mask(path: &Path) -> Result<SamplingMask> {
    let (dims, one_based) = read_mask_file(path)?;
    let kept: Vec<usize> = one_based.iter().map(|&i| i as usize - 1).collect();
    SamplingMask::new(dims, kept)
}

/// Raw value encoding accepted by the import path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawDtype {
    F32,
    F64,
}

/// Imports a headerless raw file of `NB` little-endian values already in
/// the column-stacked order.
pub fn read_raw_cube(path: &Path, dims: CubeDims, dtype: RawDtype) -> Result<HsCube> {
    let bytes = fs::read(path)?;
    let width = match dtype {
        RawDtype::F32 => 4,
        RawDtype::F64 => 8,
    };
    if bytes.len() != width * dims.nb() {
        return Err(Error::MalformedFile(format!(
            "{}: expected {} bytes for {dims}, found {}",
            path.display(),
            width * dims.nb(),
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(dims.nb());
    match dtype {
        RawDtype::F32 => {
            for chunk in bytes.chunks_exact(4) {
                data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
            }
        }
        RawDtype::F64 => {
            for chunk in bytes.chunks_exact(8) {
                let mut buf = [0u8; 8];
                buf.copy_from_slice(chunk);
                data.push(f64::from_le_bytes(buf));
            }
        }
    }
    HsCube::from_vec(dims, data)
}

/// Structured run configuration mirroring the CLI flags. Unknown keys are
/// rejected; precedence is CLI flag over config file over built-in default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub regularizer: RegularizerSection,
    pub noise: NoiseSection,
    pub constraints: ConstraintSection,
    pub solver: SolverSection,
    pub seed: Option<u64>,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizerSection {
    pub kind: Option<String>,
    pub omega: Option<f64>,
    pub p: Option<u8>,
    pub tau_v: Option<f64>,
    pub tau_h: Option<f64>,
    pub tau_b: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: Option<f64>,
    pub s_p: Option<f64>,
    pub l_v: Option<f64>,
    pub l_h: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub box_min: Option<f64>,
    pub box_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gamma: Option<f64>,
    pub max_iter: Option<usize>,
    pub stop_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub input: Option<String>,
    pub output: Option<String>,
    pub mask: Option<String>,
    pub report: Option<String>,
    pub trace: Option<String>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks on every value that was actually specified.
    pub fn validate(&self) -> Result<()> {
        if let Some(kind) = &self.regularizer.kind {
            if !matches!(kind.as_str(), "hsstv" | "htv" | "sstv" | "asstv") {
                return Err(Error::InvalidConfig(format!(
                    "unknown regularizer kind '{kind}'"
                )));
            }
        }
        if let Some(p) = self.regularizer.p {
            if p != 1 && p != 2 {
                return Err(Error::InvalidConfig(format!("p must be 1 or 2, got {p}")));
            }
        }
        if let Some(omega) = self.regularizer.omega {
            if !(omega >= 0.0 && omega.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "omega must be >= 0, got {omega}"
                )));
            }
        }
        for (name, tau) in [
            ("tau_v", self.regularizer.tau_v),
            ("tau_h", self.regularizer.tau_h),
            ("tau_b", self.regularizer.tau_b),
        ] {
            if let Some(t) = tau {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be positive, got {t}"
                    )));
                }
            }
        }
        if let Some(sigma) = self.noise.sigma {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "sigma must be >= 0, got {sigma}"
                )));
            }
        }
        for (name, rate) in [
            ("s_p", self.noise.s_p),
            ("l_v", self.noise.l_v),
            ("l_h", self.noise.l_h),
        ] {
            if let Some(r) = rate {
                if !((0.0..1.0).contains(&r) && r.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must lie in [0, 1), got {r}"
                    )));
                }
            }
        }
        for (name, radius) in [
            ("epsilon", self.constraints.epsilon),
            ("eta", self.constraints.eta),
        ] {
            if let Some(r) = radius {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be positive, got {r}"
                    )));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.constraints.box_min, self.constraints.box_max) {
            if lo >= hi {
                return Err(Error::InvalidConfig(format!(
                    "box_min {lo} must be below box_max {hi}"
                )));
            }
        }
        if let Some(gamma) = self.solver.gamma {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "gamma must be positive, got {gamma}"
                )));
            }
        }
        if self.solver.max_iter == Some(0) {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if let Some(tol) = self.solver.stop_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "stop_tol must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }
}
