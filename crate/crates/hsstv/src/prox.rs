//! Closed-form proximity operators and metric projections used by the ADMM
//! z-updates: elementwise soft-thresholding, per-voxel group shrinkage for
//! the mixed l1,2 norms, and projections onto the l2 ball, the l1 ball, and
//! the dynamic-range box.

use crate::linop::SamplingMask;
use crate::{Error, Result};

/// A centered l2-norm ball `{ x : ||x - center|| <= radius }`.
#[derive(Debug, Clone)]
pub struct Ball2Spec {
    center: Vec<f64>,
    radius: f64,
}

impl Ball2Spec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "l2 ball radius must be positive, got {radius}"
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "l2 ball center must be finite".into(),
            ));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        distance(x, &self.center) <= self.radius * (1.0 + slack)
    }
}

/// The origin-centered l1-norm ball `{ x : ||x||_1 <= radius }`.
#[derive(Debug, Clone, Copy)]
pub struct Ball1Spec {
    radius: f64,
}

impl Ball1Spec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "l1 ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// The dynamic-range box `[lo, hi]` applied elementwise.
#[derive(Debug, Clone, Copy)]
pub struct BoxSpec {
    lo: f64,
    hi: f64,
}

impl BoxSpec {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "box bounds must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "prox step must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// Elementwise `sgn(x) * max(|x| - gamma, 0)`: the prox of `gamma ||.||_1`.
pub fn soft_threshold(x: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    Ok(x.iter()
        .map(|&v| v.signum() * (v.abs() - gamma).max(0.0))
        .collect())
}

/// Prox of the mixed l1,2 norm over per-voxel groups of four: entry `i`
/// belongs to the group of voxel `(i-1) mod NB + 1`, i.e. the four stacked
/// blocks of the analysis output are grouped positionally.
pub fn group_shrink_l12(x: &[f64], gamma: f64, nb: usize) -> Result<Vec<f64>> {
    group_shrink(x, gamma, nb, 4)
}

/// Same shrinkage over per-voxel pairs (vertical, horizontal), the prox of
/// the bandwise isotropic TV norm.
pub fn group_shrink_l2_pairs(x: &[f64], gamma: f64, nb: usize) -> Result<Vec<f64>> {
    group_shrink(x, gamma, nb, 2)
}

fn group_shrink(x: &[f64], gamma: f64, nb: usize, groups: usize) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if nb == 0 || x.len() != groups * nb {
        return Err(Error::ShapeMismatch(format!(
            "expected {groups}*{nb} entries, got {}",
            x.len()
        )));
    }
    let mut out = vec![0.0; x.len()];
    for i in 0..nb {
        let norm_sq: f64 = (0..groups).map(|j| x[i + j * nb] * x[i + j * nb]).sum();
        let norm = norm_sq.sqrt();
        // zero-norm groups stay zero (the subdifferential-consistent choice)
        let factor = if norm > gamma {
            1.0 - gamma / norm
        } else {
            0.0
        };
        for j in 0..groups {
            out[i + j * nb] = factor * x[i + j * nb];
        }
    }
    Ok(out)
}

fn distance(x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Metric projection onto a centered l2 ball: identity inside, radial pull
/// to the surface outside.
pub fn project_l2_ball(x: &[f64], spec: &Ball2Spec) -> Result<Vec<f64>> {
    if x.len() != spec.center.len() {
        return Err(Error::ShapeMismatch(format!(
            "ball center has {} entries, input {}",
            spec.center.len(),
            x.len()
        )));
    }
    let dist = distance(x, &spec.center);
    if dist <= spec.radius {
        return Ok(x.to_vec());
    }
    let scale = spec.radius / dist;
    Ok(x.iter()
        .zip(&spec.center)
        .map(|(xi, ci)| ci + scale * (xi - ci))
        .collect())
}

/// Exact Euclidean projection onto the l1 ball, by sorting magnitudes and
/// scanning for the unique threshold that lands the output on the sphere.
/// (Soft-thresholding by the radius itself is not the metric projection:
/// its output can stay outside the ball.)
pub fn project_l1_ball(x: &[f64], spec: &Ball1Spec) -> Result<Vec<f64>> {
    let eta = spec.radius;
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= eta {
        return Ok(x.to_vec());
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - eta) / (j + 1) as f64;
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(x.iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect())
}

/// Elementwise clamp onto the dynamic-range box.
pub fn project_box(x: &[f64], spec: &BoxSpec) -> Vec<f64> {
    x.iter().map(|&v| v.clamp(spec.lo, spec.hi)).collect()
}

/// Prox of the composition `indicator(ball) . Phi` for a row-selection
/// sampling operator (`Phi Phi^T = I`): the sampled entries move toward the
/// ball, untouched entries pass through bit-identically.
pub fn prox_l2ball_after_sampling(
    x: &[f64],
    mask: &SamplingMask,
    spec: &Ball2Spec,
) -> Result<Vec<f64>> {
    if x.len() != mask.dims().nb() {
        return Err(Error::ShapeMismatch(format!(
            "expected a cube-length vector of {}, got {}",
            mask.dims().nb(),
            x.len()
        )));
    }
    if spec.center.len() != mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "ball center length {} does not match mask size {}",
            spec.center.len(),
            mask.len()
        )));
    }
    let sampled: Vec<f64> = mask.kept().iter().map(|&i| x[i]).collect();
    let projected = project_l2_ball(&sampled, spec)?;
    // row selection makes x + Phi^T(P(Phi x) - Phi x) a plain overwrite of
    // the sampled entries, so the projection lands exactly
    let mut out = x.to_vec();
    for (&i, p) in mask.kept().iter().zip(&projected) {
        out[i] = *p;
    }
    Ok(out)
}
