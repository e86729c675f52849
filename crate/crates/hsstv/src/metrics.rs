//! Restoration quality metrics: PSNR on the unit dynamic range, sliding
//! window SSIM (pooled over all bands and also reported per band), and the
//! spatial/spectral profile extraction used for response plots.

use crate::cube::{CubeDims, HsCube};
use crate::{Error, Result};

/// SSIM window, stride, and stabilization constants. Defaults: 8x8 patches,
/// stride 1, `C1 = 0.01^2` and `C2 = 0.03^2` for data in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub stride: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 8,
            stride: 1,
            c1: 0.01 * 0.01,
            c2: 0.03 * 0.03,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self, dims: CubeDims) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParameter(format!(
                "ssim window must be >= 2, got {}",
                self.window
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("ssim stride must be >= 1".into()));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::InvalidParameter(
                "ssim stabilization constants must be positive".into(),
            ));
        }
        if self.window > dims.n_v || self.window > dims.n_h {
            return Err(Error::InvalidParameter(format!(
                "ssim window {} exceeds spatial extent {}x{}",
                self.window, dims.n_v, dims.n_h
            )));
        }
        Ok(())
    }
}

/// Global and per-band quality numbers.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricsReport {
    pub psnr: f64,
    pub ssim: f64,
    pub band_psnr: Vec<f64>,
    pub band_ssim: Vec<f64>,
}

impl MetricsReport {
    /// Global row followed by per-band rows; infinite PSNR prints as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,psnr,ssim\n");
        out.push_str(&format!("all,{},{}\n", self.psnr, self.ssim));
        for (i, (p, s)) in self.band_psnr.iter().zip(&self.band_ssim).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, p, s));
        }
        out
    }
}

fn check_dims(u: &HsCube, reference: &HsCube) -> Result<CubeDims> {
    if u.dims() != reference.dims() {
        return Err(Error::ShapeMismatch(format!(
            "metric inputs differ: {} vs {}",
            u.dims(),
            reference.dims()
        )));
    }
    Ok(u.dims())
}

fn sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `10 log10(NB / ||u - ref||^2)` for unit dynamic range; equal inputs give
/// the `+inf` sentinel.
pub fn psnr(u: &HsCube, reference: &HsCube) -> Result<f64> {
    let dims = check_dims(u, reference)?;
    let err = sq_err(u.data(), reference.data());
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (dims.nb() as f64 / err).log10())
}

/// Mean structural similarity over all sliding patches of every band.
pub fn ssim(u: &HsCube, reference: &HsCube, cfg: &SsimConfig) -> Result<f64> {
    let dims = check_dims(u, reference)?;
    cfg.validate(dims)?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for band in 1..=dims.bands {
        let (band_acc, band_count) = ssim_band(u, reference, cfg, band);
        acc += band_acc;
        count += band_count;
    }
    Ok(acc / count as f64)
}

/// Sum and count of patch scores for one band (1-based).
fn ssim_band(u: &HsCube, reference: &HsCube, cfg: &SsimConfig, band: usize) -> (f64, usize) {
    let dims = u.dims();
    let (w, stride) = (cfg.window, cfg.stride);
    let band_off = (band - 1) * dims.n();
    let at = |data: &[f64], row: usize, col: usize| data[band_off + col * dims.n_v + row];
    let patch_len = (w * w) as f64;

    let mut acc = 0.0;
    let mut count = 0usize;
    let mut top = 0;
    while top + w <= dims.n_v {
        let mut left = 0;
        while left + w <= dims.n_h {
            let mut mean_a = 0.0;
            let mut mean_b = 0.0;
            for c in left..left + w {
                for r in top..top + w {
                    mean_a += at(u.data(), r, c);
                    mean_b += at(reference.data(), r, c);
                }
            }
            mean_a /= patch_len;
            mean_b /= patch_len;

            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for c in left..left + w {
                for r in top..top + w {
                    let da = at(u.data(), r, c) - mean_a;
                    let db = at(reference.data(), r, c) - mean_b;
                    var_a += da * da;
                    var_b += db * db;
                    cov += da * db;
                }
            }
            var_a /= patch_len;
            var_b /= patch_len;
            cov /= patch_len;

            acc += (2.0 * mean_a * mean_b + cfg.c1) * (2.0 * cov + cfg.c2)
                / ((mean_a * mean_a + mean_b * mean_b + cfg.c1) * (var_a + var_b + cfg.c2));
            count += 1;
            left += stride;
        }
        top += stride;
    }
    (acc, count)
}

/// Per-band PSNR (with the per-band pixel count in place of `NB`) and SSIM.
pub fn bandwise_metrics(
    u: &HsCube,
    reference: &HsCube,
    cfg: &SsimConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dims = check_dims(u, reference)?;
    cfg.validate(dims)?;
    let n = dims.n();
    let mut psnrs = Vec::with_capacity(dims.bands);
    let mut ssims = Vec::with_capacity(dims.bands);
    for band in 1..=dims.bands {
        let off = (band - 1) * n;
        let err = sq_err(&u.data()[off..off + n], &reference.data()[off..off + n]);
        psnrs.push(if err == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (n as f64 / err).log10()
        });
        let (acc, count) = ssim_band(u, reference, cfg, band);
        ssims.push(acc / count as f64);
    }
    Ok((psnrs, ssims))
}

/// Convenience bundle of the global and per-band numbers.
pub fn metrics_report(u: &HsCube, reference: &HsCube, cfg: &SsimConfig) -> Result<MetricsReport> {
    let (band_psnr, band_ssim) = bandwise_metrics(u, reference, cfg)?;
    Ok(MetricsReport {
        psnr: psnr(u, reference)?,
        ssim: ssim(u, reference, cfg)?,
        band_psnr,
        band_ssim,
    })
}

/// The values along one row of one band (1-based indices); length `N_h`.
pub fn spatial_response(u: &HsCube, row: usize, band: usize) -> Result<Vec<f64>> {
    let dims = u.dims();
    if row == 0 || row > dims.n_v || band == 0 || band > dims.bands {
        return Err(Error::OutOfRange(format!(
            "row {row}, band {band} outside cube {dims}"
        )));
    }
    let off = (band - 1) * dims.n() + (row - 1);
    Ok((0..dims.n_h)
        .map(|c| u.data()[off + c * dims.n_v])
        .collect())
}

/// The spectrum of one pixel (1-based indices); length `B`.
pub fn spectral_response(u: &HsCube, row: usize, col: usize) -> Result<Vec<f64>> {
    let dims = u.dims();
    if row == 0 || row > dims.n_v || col == 0 || col > dims.n_h {
        return Err(Error::OutOfRange(format!(
            "row {row}, col {col} outside cube {dims}"
        )));
    }
    let off = (col - 1) * dims.n_v + (row - 1);
    Ok((0..dims.bands)
        .map(|b| u.data()[off + b * dims.n()])
        .collect())
}

/// Two-column CSV (`index,value`) for a response curve; the first column is
/// labeled by the caller (`col` or `band`).
pub fn response_csv(index_label: &str, values: &[f64]) -> String {
    let mut out = format!("{index_label},value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dims(v: usize, h: usize, b: usize) -> CubeDims {
        CubeDims::new(v, h, b).unwrap()
    }

    fn random_cube(d: CubeDims, rng: &mut StdRng) -> HsCube {
        let data = (0..d.nb()).map(|_| rng.gen_range(0.0..1.0)).collect();
        HsCube::from_vec(d, data).unwrap()
    }

    #[test]
    fn psnr_spot_values() {
        // NB = 4, squared error 0.04 -> 20 dB
        let d = dims(2, 2, 1);
        let a = HsCube::zeros(d);
        let b = HsCube::from_vec(d, vec![0.2, 0.0, 0.0, 0.0]).unwrap();
        assert!((psnr(&b, &a).unwrap() - 20.0).abs() < 1e-12);

        // equal cubes -> sentinel
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);

        // uniform error 0.1 -> 20 dB independent of NB
        for d in [dims(4, 4, 2), dims(8, 8, 8)] {
            let r = HsCube::constant(d, 0.5).unwrap();
            let u = HsCube::constant(d, 0.6).unwrap();
            assert!((psnr(&u, &r).unwrap() - 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_decreases_with_error() {
        let d = dims(4, 4, 2);
        let r = HsCube::constant(d, 0.5).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..5 {
            let u = HsCube::constant(d, 0.5 + 0.05 * k as f64).unwrap();
            let value = psnr(&u, &r).unwrap();
            assert!(value < last);
            last = value;
        }
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let mut rng = StdRng::seed_from_u64(3);
        let d = dims(12, 12, 2);
        let a = random_cube(d, &mut rng);
        let b = random_cube(d, &mut rng);
        let cfg = SsimConfig::default();
        assert_eq!(ssim(&a, &a, &cfg).unwrap(), 1.0);
        let ab = ssim(&a, &b, &cfg).unwrap();
        let ba = ssim(&b, &a, &cfg).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab < 1.0);
    }

    #[test]
    fn ssim_ranks_mild_perturbation_above_noise() {
        let mut rng = StdRng::seed_from_u64(5);
        let d = dims(16, 16, 1);
        // smooth structure
        let data: Vec<f64> = (0..d.nb())
            .map(|i| {
                let r = (i % 16) as f64;
                let c = (i / 16) as f64;
                0.5 + 0.3 * ((r + c) / 30.0).sin()
            })
            .collect();
        let truth = HsCube::from_vec(d, data).unwrap();
        let mild: Vec<f64> = truth
            .data()
            .iter()
            .map(|v| v + rng.gen_range(-0.01..0.01))
            .collect();
        let noise: Vec<f64> = (0..d.nb()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cfg = SsimConfig::default();
        let s_mild = ssim(&HsCube::from_vec(d, mild).unwrap(), &truth, &cfg).unwrap();
        let s_noise = ssim(&HsCube::from_vec(d, noise).unwrap(), &truth, &cfg).unwrap();
        assert!(s_mild > s_noise);
    }

    #[test]
    fn ssim_matches_scalar_loop_on_8x8() {
        // one band, one patch: the loop below recomputes the formula from
        // scratch over the single 8x8 window
        let mut rng = StdRng::seed_from_u64(7);
        let d = dims(8, 8, 1);
        let a = random_cube(d, &mut rng);
        let b = random_cube(d, &mut rng);
        let cfg = SsimConfig::default();

        let n = 64.0;
        let ma = a.data().iter().sum::<f64>() / n;
        let mb = b.data().iter().sum::<f64>() / n;
        let va = a.data().iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / n;
        let vb = b.data().iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / n;
        let cov = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / n;
        let expected = (2.0 * ma * mb + cfg.c1) * (2.0 * cov + cfg.c2)
            / ((ma * ma + mb * mb + cfg.c1) * (va + vb + cfg.c2));

        assert!((ssim(&a, &b, &cfg).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn bandwise_localizes_damage_and_pools_to_global() {
        let mut rng = StdRng::seed_from_u64(9);
        let d = dims(10, 10, 3);
        let truth = random_cube(d, &mut rng);
        // corrupt only band 2
        let mut data = truth.data().to_vec();
        for v in data[d.n()..2 * d.n()].iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let damaged = HsCube::from_vec(d, data).unwrap();
        let cfg = SsimConfig::default();

        let (band_psnr, band_ssim) = bandwise_metrics(&damaged, &truth, &cfg).unwrap();
        assert_eq!(band_psnr[0], f64::INFINITY);
        assert_eq!(band_psnr[2], f64::INFINITY);
        assert!(band_psnr[1] < 40.0);
        assert_eq!(band_ssim[0], 1.0);

        // equal patch counts per band: pooled mean equals mean of band means
        let global = ssim(&damaged, &truth, &cfg).unwrap();
        let mean_bands = band_ssim.iter().sum::<f64>() / 3.0;
        assert!((global - mean_bands).abs() < 1e-12);

        // identical cubes give the all-infinite / all-one sequences
        let (p_same, s_same) = bandwise_metrics(&truth, &truth, &cfg).unwrap();
        assert!(p_same.iter().all(|&p| p == f64::INFINITY));
        assert!(s_same.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn profile_extraction_matches_direct_indexing() {
        let mut rng = StdRng::seed_from_u64(11);
        let d = dims(5, 7, 4);
        let u = random_cube(d, &mut rng);

        let profile = spatial_response(&u, 3, 2).unwrap();
        assert_eq!(profile.len(), d.n_h);
        for (c, &val) in profile.iter().enumerate() {
            let expected = u.at(crate::cube::VoxelIndex::new(3, c + 1, 2)).unwrap();
            assert_eq!(val, expected);
        }

        let spectrum = spectral_response(&u, 2, 6).unwrap();
        assert_eq!(spectrum.len(), d.bands);
        for (b, &val) in spectrum.iter().enumerate() {
            let expected = u.at(crate::cube::VoxelIndex::new(2, 6, b + 1)).unwrap();
            assert_eq!(val, expected);
        }

        let constant = HsCube::constant(d, 0.3).unwrap();
        assert!(spatial_response(&constant, 1, 1)
            .unwrap()
            .iter()
            .all(|&v| v == 0.3));
        assert!(spatial_response(&u, 0, 1).is_err());
        assert!(spatial_response(&u, 6, 1).is_err());
        assert!(spectral_response(&u, 1, 8).is_err());
    }

    #[test]
    fn csv_uses_inf_sentinel() {
        let d = dims(8, 8, 1);
        let u = HsCube::constant(d, 0.4).unwrap();
        let report = metrics_report(&u, &u, &SsimConfig::default()).unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with("band,psnr,ssim\nall,inf,1\n"));
    }
}
