//! Concrete restoration problem instances: mixed-noise denoising and
//! compressed-sensing reconstruction, including the radius heuristics that
//! set the data-fidelity constraints from the noise statistics alone.

use crate::cube::{CubeDims, HsCube};
use crate::linop::SamplingMask;
use crate::prox::{Ball1Spec, Ball2Spec, BoxSpec};
use crate::reg::{RegularizerSpec, SplitRecipe};
use crate::{Error, Result};

/// Mixed-noise statistics: Gaussian standard deviation plus salt-and-pepper
/// and line-noise rates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixedNoiseParams {
    pub sigma: f64,
    pub s_p: f64,
    pub l_v: f64,
    pub l_h: f64,
}

impl MixedNoiseParams {
    pub fn new(sigma: f64, s_p: f64, l_v: f64, l_h: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        for (name, rate) in [("s_p", s_p), ("l_v", l_v), ("l_h", l_h)] {
            if !((0.0..1.0).contains(&rate) && rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1), got {rate}"
                )));
            }
        }
        Ok(Self {
            sigma,
            s_p,
            l_v,
            l_h,
        })
    }

    /// Expected fraction of voxels hit by any sparse corruption.
    pub fn sparse_fraction(&self) -> f64 {
        self.s_p * (1.0 - self.l_v - self.l_h) + self.l_v + self.l_h - self.l_v * self.l_h
    }
}

/// Radius of the l2 data-fidelity ball for mixed-noise denoising:
/// `0.83 * sqrt(NB * (1 - sparse_fraction) * sigma^2)`. The inner factor is
/// the expected share of voxels left carrying only Gaussian noise.
pub fn epsilon_mixed(params: &MixedNoiseParams, dims: CubeDims) -> f64 {
    let clean = 1.0 - params.sparse_fraction();
    0.83 * (dims.nb() as f64 * clean * params.sigma * params.sigma).sqrt()
}

/// Radius of the l1 ball bounding the sparse noise:
/// `NB * (0.45 s_p + (l_v + l_h) v_ave - l_v l_h v_ave)` where `v_ave` is
/// the mean of the observation.
pub fn eta_mixed(params: &MixedNoiseParams, v_ave: f64, dims: CubeDims) -> f64 {
    dims.nb() as f64
        * (0.45 * params.s_p + (params.l_v + params.l_h) * v_ave - params.l_v * params.l_h * v_ave)
}

/// Radius of the l2 ball for CS reconstruction at sampling rate `m`:
/// `sigma * sqrt(m * NB)`.
pub fn epsilon_cs(m: f64, dims: CubeDims, sigma: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sampling rate must lie in (0, 1), got {m}"
        )));
    }
    Ok(sigma * (m * dims.nb() as f64).sqrt())
}

/// How the quadratic step inverts its system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolverPath {
    /// Direct inversion via the 3D-FFT diagonalization (identity or absent
    /// sampling operator in the quadratic).
    FftDirect,
    /// Unpreconditioned conjugate gradients on the normal equations.
    Cg,
}

/// The mixed-noise denoising problem: minimize the regularizer subject to
/// the observation ball on `Phi u + s`, the l1 ball on `s`, and the box
/// on `u`.
pub struct DenoiseProblem {
    dims: CubeDims,
    observation: Vec<f64>,
    mask: Option<SamplingMask>,
    regularizer: RegularizerSpec,
    recipe: SplitRecipe,
    ball2: Ball2Spec,
    ball1: Ball1Spec,
    range: BoxSpec,
    path: SolverPath,
}

impl DenoiseProblem {
    /// Identity observation operator with explicit constraint radii.
    pub fn with_radii(
        v: &HsCube,
        reg: &RegularizerSpec,
        epsilon: f64,
        eta: f64,
        range: BoxSpec,
    ) -> Result<Self> {
        let recipe = reg.split_recipe(v.dims())?;
        Ok(Self {
            dims: v.dims(),
            observation: v.data().to_vec(),
            mask: None,
            regularizer: reg.clone(),
            recipe,
            ball2: Ball2Spec::new(v.data().to_vec(), epsilon)?,
            ball1: Ball1Spec::new(eta)?,
            range,
            path: SolverPath::FftDirect,
        })
    }

    /// General sampling operator; the quadratic step falls back to CG since
    /// `Phi^T Phi` for a mask is not diagonalized by the FFT.
    pub fn with_sampling(
        observation: Vec<f64>,
        mask: SamplingMask,
        reg: &RegularizerSpec,
        epsilon: f64,
        eta: f64,
        range: BoxSpec,
    ) -> Result<Self> {
        if observation.len() != mask.len() {
            return Err(Error::ShapeMismatch(format!(
                "observation has {} entries but mask keeps {}",
                observation.len(),
                mask.len()
            )));
        }
        let dims = mask.dims();
        let recipe = reg.split_recipe(dims)?;
        let path = if mask.is_identity() {
            SolverPath::FftDirect
        } else {
            SolverPath::Cg
        };
        let mask = if mask.is_identity() { None } else { Some(mask) };
        Ok(Self {
            dims,
            ball2: Ball2Spec::new(observation.clone(), epsilon)?,
            observation,
            mask,
            regularizer: reg.clone(),
            recipe,
            ball1: Ball1Spec::new(eta)?,
            range,
            path,
        })
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    /// Observed data, length `M` (`= NB` when the operator is the identity).
    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    pub fn mask(&self) -> Option<&SamplingMask> {
        self.mask.as_ref()
    }

    /// Length of the observation vector.
    pub fn m_len(&self) -> usize {
        self.observation.len()
    }

    pub fn regularizer(&self) -> &RegularizerSpec {
        &self.regularizer
    }

    pub fn recipe(&self) -> &SplitRecipe {
        &self.recipe
    }

    pub fn ball2(&self) -> &Ball2Spec {
        &self.ball2
    }

    pub fn ball1(&self) -> &Ball1Spec {
        &self.ball1
    }

    pub fn range(&self) -> &BoxSpec {
        &self.range
    }

    pub fn path(&self) -> SolverPath {
        self.path
    }

    /// Applies the observation operator to a cube.
    pub fn apply_phi(&self, u: &HsCube) -> Result<Vec<f64>> {
        match &self.mask {
            None => Ok(u.data().to_vec()),
            Some(mask) => mask.sample(u),
        }
    }

    /// Adjoint of the observation operator.
    pub fn apply_phi_adjoint(&self, v: &[f64]) -> Result<HsCube> {
        match &self.mask {
            None => HsCube::from_vec(self.dims, v.to_vec()),
            Some(mask) => mask.scatter(v),
        }
    }

    /// Constraint violations of a candidate `(u, s)` pair, as absolute
    /// excesses over each bound (zero when satisfied).
    pub fn constraint_slacks(&self, u: &HsCube, s: &[f64]) -> Result<ConstraintSlacks> {
        let phi_u = self.apply_phi(u)?;
        if s.len() != phi_u.len() {
            return Err(Error::ShapeMismatch(format!(
                "sparse estimate has {} entries, expected {}",
                s.len(),
                phi_u.len()
            )));
        }
        let fit: Vec<f64> = phi_u.iter().zip(s).map(|(a, b)| a + b).collect();
        let l2_dist = fit
            .iter()
            .zip(self.ball2.center())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let l1_norm: f64 = s.iter().map(|v| v.abs()).sum();
        Ok(ConstraintSlacks {
            l2_ball: (l2_dist - self.ball2.radius()).max(0.0),
            l2_radius: self.ball2.radius(),
            l1_ball: Some((l1_norm - self.ball1.radius()).max(0.0)),
            l1_radius: Some(self.ball1.radius()),
            box_range: box_violation(u.data(), &self.range),
            box_width: self.range.width(),
        })
    }
}

/// The CS reconstruction problem: the denoising problem with the sparse
/// noise variable and its l1 ball removed, and the fidelity ball composed
/// with the sampling operator.
pub struct CsProblem {
    mask: SamplingMask,
    samples: Vec<f64>,
    regularizer: RegularizerSpec,
    recipe: SplitRecipe,
    ball2: Ball2Spec,
    range: BoxSpec,
}

impl CsProblem {
    pub fn with_epsilon(
        samples: Vec<f64>,
        mask: SamplingMask,
        reg: &RegularizerSpec,
        epsilon: f64,
        range: BoxSpec,
    ) -> Result<Self> {
        if samples.len() != mask.len() {
            return Err(Error::ShapeMismatch(format!(
                "measurement vector has {} entries but mask keeps {}",
                samples.len(),
                mask.len()
            )));
        }
        let recipe = reg.split_recipe(mask.dims())?;
        Ok(Self {
            ball2: Ball2Spec::new(samples.clone(), epsilon)?,
            samples,
            regularizer: reg.clone(),
            recipe,
            mask,
            range,
        })
    }

    pub fn dims(&self) -> CubeDims {
        self.mask.dims()
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn regularizer(&self) -> &RegularizerSpec {
        &self.regularizer
    }

    pub fn recipe(&self) -> &SplitRecipe {
        &self.recipe
    }

    pub fn ball2(&self) -> &Ball2Spec {
        &self.ball2
    }

    pub fn range(&self) -> &BoxSpec {
        &self.range
    }

    /// Zero-filled adjoint reconstruction, the usual baseline.
    pub fn zero_fill(&self) -> Result<HsCube> {
        self.mask.scatter(&self.samples)
    }

    pub fn constraint_slacks(&self, u: &HsCube) -> Result<ConstraintSlacks> {
        let phi_u = self.mask.sample(u)?;
        let l2_dist = phi_u
            .iter()
            .zip(&self.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(ConstraintSlacks {
            l2_ball: (l2_dist - self.ball2.radius()).max(0.0),
            l2_radius: self.ball2.radius(),
            l1_ball: None,
            l1_radius: None,
            box_range: box_violation(u.data(), &self.range),
            box_width: self.range.width(),
        })
    }
}

/// Absolute constraint violations with the scales needed to judge them.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConstraintSlacks {
    pub l2_ball: f64,
    pub l2_radius: f64,
    pub l1_ball: Option<f64>,
    pub l1_radius: Option<f64>,
    pub box_range: f64,
    pub box_width: f64,
}

impl ConstraintSlacks {
    /// Largest violation relative to its constraint's scale.
    pub fn max_relative(&self) -> f64 {
        let mut worst = self.l2_ball / self.l2_radius;
        if let (Some(slack), Some(radius)) = (self.l1_ball, self.l1_radius) {
            worst = worst.max(slack / radius);
        }
        worst.max(self.box_range / self.box_width)
    }
}

fn box_violation(x: &[f64], range: &BoxSpec) -> f64 {
    x.iter()
        .map(|&v| (range.lo() - v).max(v - range.hi()).max(0.0))
        .fold(0.0, f64::max)
}

/// Builds the denoising problem with the heuristic radii: `epsilon` from
/// the noise statistics and `eta` from the statistics plus the observation
/// mean, identity observation operator, FFT-direct quadratic step.
pub fn build_denoise(
    v: &HsCube,
    reg: &RegularizerSpec,
    params: &MixedNoiseParams,
    range: BoxSpec,
) -> Result<DenoiseProblem> {
    let epsilon = epsilon_mixed(params, v.dims());
    let v_ave = v.data().iter().sum::<f64>() / v.dims().nb() as f64;
    let eta = eta_mixed(params, v_ave, v.dims());
    if epsilon <= 0.0 || eta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "degenerate noise model: epsilon = {epsilon}, eta = {eta}; the \
             constraints would collapse to equalities"
        )));
    }
    DenoiseProblem::with_radii(v, reg, epsilon, eta, range)
}

/// Builds the CS reconstruction problem; the radius comes from the mask's
/// realized sample count: `sigma * sqrt(M)`.
pub fn build_cs(
    samples: Vec<f64>,
    mask: SamplingMask,
    reg: &RegularizerSpec,
    sigma: f64,
    range: BoxSpec,
) -> Result<CsProblem> {
    let epsilon = sigma * (mask.len() as f64).sqrt();
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate CS model: sigma = 0 gives a zero-radius ball".into(),
        ));
    }
    CsProblem::with_epsilon(samples, mask, reg, epsilon, range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reg::MixedNorm;

    fn dims(v: usize, h: usize, b: usize) -> CubeDims {
        CubeDims::new(v, h, b).unwrap()
    }

    #[test]
    fn epsilon_mixed_values() {
        let d = dims(32, 32, 8);
        let zero_sigma = MixedNoiseParams::new(0.0, 0.04, 0.04, 0.04).unwrap();
        assert_eq!(epsilon_mixed(&zero_sigma, d), 0.0);

        // level (i): recomputed directly from the formula
        let level1 = MixedNoiseParams::new(0.05, 0.04, 0.04, 0.04).unwrap();
        let fraction = 0.04 * (1.0 - 0.08) + 0.08 - 0.0016;
        let expected = 0.83 * (8192.0 * (1.0 - fraction) * 0.0025f64).sqrt();
        assert!((epsilon_mixed(&level1, d) - expected).abs() < 1e-12);
        assert!((expected - 3.5332).abs() < 1e-3);

        // no sparse noise: collapses to 0.83 sigma sqrt(NB)
        let clean = MixedNoiseParams::new(0.05, 0.0, 0.0, 0.0).unwrap();
        let collapse = 0.83 * 0.05 * (8192.0f64).sqrt();
        assert!((epsilon_mixed(&clean, d) - collapse).abs() < 1e-12);
    }

    #[test]
    fn eta_mixed_values() {
        let d = dims(32, 32, 8);
        let no_sparse = MixedNoiseParams::new(0.1, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(eta_mixed(&no_sparse, 0.4, d), 0.0);

        // level (ii) with v_ave = 0.4
        let level2 = MixedNoiseParams::new(0.1, 0.05, 0.05, 0.05).unwrap();
        let expected = 8192.0 * (0.0225 + 0.1 * 0.4 - 0.0025 * 0.4);
        let got = eta_mixed(&level2, 0.4, d);
        assert!((got - expected).abs() < 1e-9);
        assert!((got - 503.808).abs() < 1e-3);

        // linear in NB
        let double = dims(32, 32, 16);
        assert!((eta_mixed(&level2, 0.4, double) - 2.0 * got).abs() < 1e-9);
    }

    #[test]
    fn epsilon_cs_values() {
        let d = dims(32, 32, 8);
        assert_eq!(epsilon_cs(0.4, d, 0.0).unwrap(), 0.0);
        let got = epsilon_cs(0.4, d, 0.1).unwrap();
        assert!((got - (0.4f64 * 8192.0 * 0.01).sqrt()).abs() < 1e-12);
        assert!((got - 5.7243).abs() < 1e-3);
        assert!(epsilon_cs(0.0, d, 0.1).is_err());
        assert!(epsilon_cs(1.0, d, 0.1).is_err());
    }

    #[test]
    fn heuristics_monotone() {
        let d = dims(16, 16, 4);
        let mut last = 0.0;
        for k in 1..6 {
            let params = MixedNoiseParams::new(0.02 * k as f64, 0.04, 0.04, 0.04).unwrap();
            let eps = epsilon_mixed(&params, d);
            assert!(eps > last);
            last = eps;
        }
        let mut last = 0.0;
        for k in 1..6 {
            let params = MixedNoiseParams::new(0.05, 0.02 * k as f64, 0.04, 0.04).unwrap();
            let eta = eta_mixed(&params, 0.4, d);
            assert!(eta > last);
            last = eta;
        }
    }

    #[test]
    fn build_denoise_wires_the_heuristics() {
        let d = dims(8, 8, 2);
        let v = HsCube::constant(d, 0.5).unwrap();
        let params = MixedNoiseParams::new(0.05, 0.04, 0.04, 0.04).unwrap();
        let reg = RegularizerSpec::hsstv(0.04, MixedNorm::L1).unwrap();
        let problem = build_denoise(&v, &reg, &params, BoxSpec::unit()).unwrap();

        assert_eq!(problem.ball2().center(), v.data());
        assert!((problem.ball2().radius() - epsilon_mixed(&params, d)).abs() < 1e-12);
        assert!((problem.ball1().radius() - eta_mixed(&params, 0.5, d)).abs() < 1e-12);
        assert_eq!(problem.path(), SolverPath::FftDirect);

        // degenerate model rejected
        let silent = MixedNoiseParams::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(build_denoise(&v, &reg, &silent, BoxSpec::unit()).is_err());
    }

    #[test]
    fn noiseless_observation_of_feasible_cube_stays_feasible() {
        let d = dims(6, 6, 3);
        let data: Vec<f64> = (0..d.nb()).map(|i| (i % 7) as f64 / 10.0).collect();
        let truth = HsCube::from_vec(d, data).unwrap();
        let params = MixedNoiseParams::new(0.05, 0.04, 0.04, 0.04).unwrap();
        let reg = RegularizerSpec::hsstv(0.04, MixedNorm::L1).unwrap();
        let problem = build_denoise(&truth, &reg, &params, BoxSpec::unit()).unwrap();
        let slacks = problem
            .constraint_slacks(&truth, &vec![0.0; d.nb()])
            .unwrap();
        assert_eq!(slacks.l2_ball, 0.0);
        assert_eq!(slacks.l1_ball, Some(0.0));
        assert_eq!(slacks.box_range, 0.0);
    }

    #[test]
    fn build_cs_radius_from_sample_count() {
        let d = dims(8, 8, 2);
        let mask = SamplingMask::new(d, (0..64).collect()).unwrap();
        let reg = RegularizerSpec::hsstv(0.05, MixedNorm::L1).unwrap();
        let samples = vec![0.3; 64];
        let problem = build_cs(samples, mask, &reg, 0.1, BoxSpec::unit()).unwrap();
        assert!((problem.ball2().radius() - 0.1 * 8.0).abs() < 1e-12);

        let full = SamplingMask::full(d);
        let problem = build_cs(vec![0.2; d.nb()], full, &reg, 0.1, BoxSpec::unit()).unwrap();
        assert!((problem.ball2().radius() - 0.1 * (d.nb() as f64).sqrt()).abs() < 1e-12);

        let mask = SamplingMask::new(d, (0..64).collect()).unwrap();
        assert!(build_cs(vec![0.2; 64], mask, &reg, 0.0, BoxSpec::unit()).is_err());
    }

    #[test]
    fn denoise_with_sampling_uses_cg_path() {
        let d = dims(4, 4, 2);
        let mask = SamplingMask::new(d, (0..16).collect()).unwrap();
        let reg = RegularizerSpec::Sstv;
        let problem =
            DenoiseProblem::with_sampling(vec![0.5; 16], mask, &reg, 1.0, 2.0, BoxSpec::unit())
                .unwrap();
        assert_eq!(problem.path(), SolverPath::Cg);
        assert_eq!(problem.m_len(), 16);
        let u = HsCube::constant(d, 0.5).unwrap();
        assert_eq!(problem.apply_phi(&u).unwrap().len(), 16);
    }
}
