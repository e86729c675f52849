//! The hyperspectral cube value type and its vectorization convention.
//!
//! A cube of `N_v x N_h x B` voxels is stored as one flat vector of length
//! `NB = N_v * N_h * B`: columns are stacked within a band (rows vary
//! fastest), and bands are stacked last. The 1-based flat index of the voxel
//! at `(row, col, band)` is `row + (col-1)*N_v + (band-1)*N` with
//! `N = N_v * N_h`.

use crate::{Error, Result};

/// Cube extents: vertical pixels, horizontal pixels, spectral bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeDims {
    pub n_v: usize,
    pub n_h: usize,
    pub bands: usize,
}

impl CubeDims {
    pub fn new(n_v: usize, n_h: usize, bands: usize) -> Result<Self> {
        if n_v == 0 || n_h == 0 || bands == 0 {
            return Err(Error::InvalidParameter(format!(
                "cube dimensions must all be >= 1, got {n_v}x{n_h}x{bands}"
            )));
        }
        Ok(Self { n_v, n_h, bands })
    }

    /// Pixels per band.
    pub fn n(&self) -> usize {
        self.n_v * self.n_h
    }

    /// Total voxel count.
    pub fn nb(&self) -> usize {
        self.n_v * self.n_h * self.bands
    }
}

impl std::fmt::Display for CubeDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.n_v, self.n_h, self.bands)
    }
}

/// A voxel coordinate, 1-based on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelIndex {
    pub row: usize,
    pub col: usize,
    pub band: usize,
}

impl VoxelIndex {
    pub fn new(row: usize, col: usize, band: usize) -> Self {
        Self { row, col, band }
    }

    fn check(&self, dims: CubeDims) -> Result<()> {
        if self.row == 0
            || self.row > dims.n_v
            || self.col == 0
            || self.col > dims.n_h
            || self.band == 0
            || self.band > dims.bands
        {
            return Err(Error::OutOfRange(format!(
                "voxel ({},{},{}) outside cube {dims}",
                self.row, self.col, self.band
            )));
        }
        Ok(())
    }
}

/// 1-based flat index of a voxel under the column-stacked convention.
pub fn linear_index(idx: VoxelIndex, dims: CubeDims) -> Result<usize> {
    idx.check(dims)?;
    Ok(idx.row + (idx.col - 1) * dims.n_v + (idx.band - 1) * dims.n())
}

/// Inverse of [`linear_index`]: recovers the voxel coordinate of a 1-based
/// flat index.
pub fn voxel_index(linear: usize, dims: CubeDims) -> Result<VoxelIndex> {
    if linear == 0 || linear > dims.nb() {
        return Err(Error::OutOfRange(format!(
            "flat index {linear} outside 1..{}",
            dims.nb()
        )));
    }
    let zero = linear - 1;
    let band = zero / dims.n();
    let within = zero % dims.n();
    let col = within / dims.n_v;
    let row = within % dims.n_v;
    Ok(VoxelIndex::new(row + 1, col + 1, band + 1))
}

/// An immutable hyperspectral cube. All mutation happens by constructing a
/// new cube, so shared references are safe across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct HsCube {
    dims: CubeDims,
    data: Vec<f64>,
}

impl HsCube {
    /// Wraps a flat value vector already in the column-stacked order.
    pub fn from_vec(dims: CubeDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.nb() {
            return Err(Error::ShapeMismatch(format!(
                "cube {dims} needs {} values, got {}",
                dims.nb(),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cube values must be finite, found {bad}"
            )));
        }
        Ok(Self { dims, data })
    }

    /// A cube with every voxel equal to `value`.
    pub fn constant(dims: CubeDims, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "constant cube value must be finite, got {value}"
            )));
        }
        Ok(Self {
            dims,
            data: vec![value; dims.nb()],
        })
    }

    pub fn zeros(dims: CubeDims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.nb()],
        }
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value at a 1-based voxel coordinate.
    pub fn at(&self, idx: VoxelIndex) -> Result<f64> {
        let flat = linear_index(idx, self.dims)?;
        Ok(self.data[flat - 1])
    }

    fn check_same_dims(&self, other: &HsCube) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "cube dims differ: {} vs {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

/// Max-norm of the elementwise difference of two same-shaped cubes.
pub fn cube_linf_change(a: &HsCube, b: &HsCube) -> Result<f64> {
    a.check_same_dims(b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Euclidean norm of the elementwise difference; feeds the ADMM stopping rule.
pub fn cube_l2_change(a: &HsCube, b: &HsCube) -> Result<f64> {
    a.check_same_dims(b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
