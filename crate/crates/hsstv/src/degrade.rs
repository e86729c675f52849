//! Deterministic degradation synthesis: additive Gaussian noise,
//! salt-and-pepper replacement, dead-line noise, and random sampling masks.
//! Every operation is a pure function of `(input, parameters, seed)`; the
//! draws come from counter-based ChaCha streams, one stream per operation,
//! so composed pipelines stay bit-reproducible.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{CubeDims, HsCube};
use crate::linop::SamplingMask;
use crate::problem::MixedNoiseParams;
use crate::prox::BoxSpec;
use crate::{Error, Result};

/// Seed of the deterministic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Seed(pub u64);

// stream ids keep the per-operation draws independent of each other
const STREAM_GAUSSIAN: u64 = 0;
const STREAM_SALT_PEPPER: u64 = 1;
const STREAM_LINES: u64 = 2;
const STREAM_SAMPLING: u64 = 3;

fn rng_for(seed: Seed, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(stream);
    rng
}

/// Voxels touched by a sparse degradation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionMask {
    dims: CubeDims,
    hit: Vec<bool>,
}

impl CorruptionMask {
    fn empty(dims: CubeDims) -> Self {
        Self {
            dims,
            hit: vec![false; dims.nb()],
        }
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn is_hit(&self, flat0: usize) -> bool {
        self.hit[flat0]
    }

    pub fn count(&self) -> usize {
        self.hit.iter().filter(|&&h| h).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.dims.nb() as f64
    }

    /// 0-based flat positions of the corrupted voxels, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.hit
            .iter()
            .enumerate()
            .filter_map(|(i, &h)| h.then_some(i))
            .collect()
    }

    pub fn union(&self, other: &CorruptionMask) -> Result<CorruptionMask> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "mask dims differ: {} vs {}",
                self.dims, other.dims
            )));
        }
        Ok(CorruptionMask {
            dims: self.dims,
            hit: self
                .hit
                .iter()
                .zip(&other.hit)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    pub fn from_indices(dims: CubeDims, zero_based: &[usize]) -> Result<Self> {
        let mut hit = vec![false; dims.nb()];
        for &i in zero_based {
            if i >= dims.nb() {
                return Err(Error::OutOfRange(format!(
                    "corruption index {i} outside cube {dims}"
                )));
            }
            hit[i] = true;
        }
        Ok(Self { dims, hit })
    }
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma`.
/// The output is not clipped: the fidelity-ball heuristic assumes the raw
/// noise model.
pub fn add_gaussian(u: &HsCube, sigma: f64, seed: Seed) -> Result<HsCube> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(u.clone());
    }
    let normal =
        Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("gaussian: {e}")))?;
    let mut rng = rng_for(seed, STREAM_GAUSSIAN);
    let data = u
        .data()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    HsCube::from_vec(u.dims(), data)
}

/// Replaces each voxel independently with probability `s_p` by one of the
/// dynamic-range extremes (equal odds).
pub fn add_salt_pepper(
    u: &HsCube,
    s_p: f64,
    range: &BoxSpec,
    seed: Seed,
) -> Result<(HsCube, CorruptionMask)> {
    check_rate("s_p", s_p)?;
    let mut mask = CorruptionMask::empty(u.dims());
    if s_p == 0.0 {
        return Ok((u.clone(), mask));
    }
    let mut rng = rng_for(seed, STREAM_SALT_PEPPER);
    let mut data = u.data().to_vec();
    for (i, v) in data.iter_mut().enumerate() {
        if rng.gen::<f64>() < s_p {
            *v = if rng.gen::<bool>() {
                range.hi()
            } else {
                range.lo()
            };
            mask.hit[i] = true;
        }
    }
    Ok((HsCube::from_vec(u.dims(), data)?, mask))
}

/// Kills whole lines: each (column, band) pair independently with
/// probability `l_v` and each (row, band) pair with probability `l_h`;
/// every voxel on a selected line drops to zero. Vertical decisions are
/// drawn first (band-major, column within band), then horizontal.
pub fn add_line_noise(
    u: &HsCube,
    l_v: f64,
    l_h: f64,
    seed: Seed,
) -> Result<(HsCube, CorruptionMask)> {
    check_rate("l_v", l_v)?;
    check_rate("l_h", l_h)?;
    let dims = u.dims();
    let mut mask = CorruptionMask::empty(dims);
    if l_v == 0.0 && l_h == 0.0 {
        return Ok((u.clone(), mask));
    }
    let mut rng = rng_for(seed, STREAM_LINES);
    let mut data = u.data().to_vec();
    let n = dims.n();
    for band in 0..dims.bands {
        for col in 0..dims.n_h {
            if rng.gen::<f64>() < l_v {
                let off = band * n + col * dims.n_v;
                for r in 0..dims.n_v {
                    data[off + r] = 0.0;
                    mask.hit[off + r] = true;
                }
            }
        }
    }
    for band in 0..dims.bands {
        for row in 0..dims.n_v {
            if rng.gen::<f64>() < l_h {
                for col in 0..dims.n_h {
                    let i = band * n + col * dims.n_v + row;
                    data[i] = 0.0;
                    mask.hit[i] = true;
                }
            }
        }
    }
    Ok((HsCube::from_vec(dims, data)?, mask))
}

/// The full mixed-noise pipeline: Gaussian noise first, then salt-and-pepper
/// replacement, then dead lines. Sparse corruption overwrites whatever the
/// Gaussian stage produced at the same voxel.
pub fn degrade_mixed(
    u: &HsCube,
    params: &MixedNoiseParams,
    range: &BoxSpec,
    seed: Seed,
) -> Result<(HsCube, CorruptionMask)> {
    let noisy = add_gaussian(u, params.sigma, seed)?;
    let (speckled, sp_mask) = add_salt_pepper(&noisy, params.s_p, range, seed)?;
    let (lined, line_mask) = add_line_noise(&speckled, params.l_v, params.l_h, seed)?;
    Ok((lined, sp_mask.union(&line_mask)?))
}

/// Draws `round(m * NB)` distinct voxel positions uniformly without
/// replacement and returns them as a sorted sampling mask.
pub fn make_sampling_mask(dims: CubeDims, m: f64, seed: Seed) -> Result<SamplingMask> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sampling rate must lie in (0, 1), got {m}"
        )));
    }
    let count = (m * dims.nb() as f64).round() as usize;
    let count = count.clamp(1, dims.nb());
    let mut rng = rng_for(seed, STREAM_SAMPLING);
    let mut kept = index_sample(&mut rng, dims.nb(), count).into_vec();
    kept.sort_unstable();
    SamplingMask::new(dims, kept)
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    if !((0.0..1.0).contains(&rate) && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}
