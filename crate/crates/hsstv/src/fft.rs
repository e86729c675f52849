//! Three-dimensional FFT over the flat cube layout.
//!
//! Difference operators with periodic boundaries are circulant along each
//! axis, so the composite 3D DFT diagonalizes them. This module wraps the
//! per-axis 1D plans and handles the strided gather/scatter implied by the
//! column-stacked vectorization (rows fastest, bands last).

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::cube::CubeDims;

/// Cached forward/inverse plans for one cube shape. Build one per solver
/// instance; a plan set is cheap and keeping it per-worker avoids any
/// locking around shared planner state.
pub struct Fft3 {
    dims: CubeDims,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: CubeDims) -> Self {
        let mut planner = FftPlanner::new();
        let lens = [dims.n_v, dims.n_h, dims.bands];
        let fwd = lens.map(|l| planner.plan_fft_forward(l));
        let inv = lens.map(|l| planner.plan_fft_inverse(l));
        Self { dims, fwd, inv }
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    /// Unnormalized forward 3D DFT of a real cube.
    pub fn forward(&self, real: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(real.len(), self.dims.nb());
        let mut buf: Vec<Complex<f64>> = real.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform_axes(&mut buf, &self.fwd);
        buf
    }

    /// Inverse 3D DFT normalized by `NB`; returns the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        assert_eq!(spec.len(), self.dims.nb());
        self.transform_axes(&mut spec, &self.inv);
        let scale = 1.0 / self.dims.nb() as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    fn transform_axes(&self, buf: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let (n_v, n_h, b) = (self.dims.n_v, self.dims.n_h, self.dims.bands);
        let n = self.dims.n();

        // vertical: contiguous runs of length n_v
        if n_v > 1 {
            for chunk in buf.chunks_exact_mut(n_v) {
                plans[0].process(chunk);
            }
        }
        // horizontal: stride n_v within each band
        if n_h > 1 {
            let mut line = vec![Complex::default(); n_h];
            for band in 0..b {
                for row in 0..n_v {
                    let base = band * n + row;
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + t * n_v];
                    }
                    plans[1].process(&mut line);
                    for (t, &v) in line.iter().enumerate() {
                        buf[base + t * n_v] = v;
                    }
                }
            }
        }
        // spectral: stride n
        if b > 1 {
            let mut line = vec![Complex::default(); b];
            for pixel in 0..n {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = buf[pixel + t * n];
                }
                plans[2].process(&mut line);
                for (t, &v) in line.iter().enumerate() {
                    buf[pixel + t * n] = v;
                }
            }
        }
    }
}

/// Squared modulus of the periodic forward-difference frequency response
/// along an axis of length `len`: `|e^{2*pi*i*k/len} - 1|^2 = 2 - 2cos(2*pi*k/len)`.
pub(crate) fn diff_gain_sq(k: usize, len: usize) -> f64 {
    let theta = 2.0 * std::f64::consts::PI * k as f64 / len as f64;
    2.0 - 2.0 * theta.cos()
}
