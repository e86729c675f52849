//! Flag parsing helpers and the flag > config file > default precedence.

use std::path::Path;

use hsstv::admm::SolverConfig;
use hsstv::degrade::Seed;
use hsstv::io::RunConfig;
use hsstv::problem::MixedNoiseParams;
use hsstv::prox::BoxSpec;
use hsstv::reg::{MixedNorm, RegularizerSpec};

use crate::{BoxFlags, CliError, CliResult, NoiseFlags, RegFlags, SolverFlags};

#[derive(Debug, Clone, Copy)]
pub struct Triple(pub f64, pub f64, pub f64);

#[derive(Debug, Clone, Copy)]
pub struct Pair(pub usize, pub usize);

#[derive(Debug, Clone, Copy)]
pub struct BandTriple(pub usize, pub usize, pub usize);

pub fn parse_triple(text: &str) -> Result<Triple, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated values, got '{text}'"
        ));
    }
    let mut vals = [0.0; 3];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("'{part}' is not a number"))?;
    }
    Ok(Triple(vals[0], vals[1], vals[2]))
}

pub fn parse_pair(text: &str) -> Result<Pair, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(format!(
            "expected two comma-separated indices, got '{text}'"
        ));
    }
    let a = parts[0]
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("'{}' is not an index", parts[0]))?;
    let b = parts[1]
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("'{}' is not an index", parts[1]))?;
    Ok(Pair(a, b))
}

pub fn parse_band_triple(text: &str) -> Result<BandTriple, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated bands, got '{text}'"
        ));
    }
    let mut vals = [0usize; 3];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("'{part}' is not a band index"))?;
    }
    Ok(BandTriple(vals[0], vals[1], vals[2]))
}

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

/// Noise statistics: flag, else config, else zero (no noise).
pub fn resolve_noise(flags: &NoiseFlags, config: &RunConfig) -> CliResult<MixedNoiseParams> {
    let sigma = flags.sigma.or(config.noise.sigma).unwrap_or(0.0);
    let s_p = flags.s_p.or(config.noise.s_p).unwrap_or(0.0);
    let l_v = flags.l_v.or(config.noise.l_v).unwrap_or(0.0);
    let l_h = flags.l_h.or(config.noise.l_h).unwrap_or(0.0);
    Ok(MixedNoiseParams::new(sigma, s_p, l_v, l_h)?)
}

/// Dynamic range: flags, else config, else [0, 1].
pub fn resolve_box(flags: &BoxFlags, config: &RunConfig) -> CliResult<BoxSpec> {
    let lo = flags.box_min.or(config.constraints.box_min).unwrap_or(0.0);
    let hi = flags.box_max.or(config.constraints.box_max).unwrap_or(1.0);
    Ok(BoxSpec::new(lo, hi)?)
}

pub fn resolve_solver(flags: &SolverFlags, config: &RunConfig) -> CliResult<SolverConfig> {
    let defaults = SolverConfig::default();
    let resolved = SolverConfig {
        gamma: flags
            .gamma
            .or(config.solver.gamma)
            .unwrap_or(defaults.gamma),
        max_iter: flags
            .max_iter
            .or(config.solver.max_iter)
            .unwrap_or(defaults.max_iter),
        stop_tol: flags
            .tol
            .or(config.solver.stop_tol)
            .unwrap_or(defaults.stop_tol),
    };
    resolved.validate()?;
    Ok(resolved)
}

pub fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> Seed {
    Seed(flag.or(config.seed).unwrap_or(0))
}

/// Regularizer choice. `default_omega` differs between denoising (0.04) and
/// CS reconstruction (0.05); ASSTV weights default to (1, 1, 3).
pub fn resolve_regularizer(
    flags: &RegFlags,
    config: &RunConfig,
    default_omega: f64,
) -> CliResult<RegularizerSpec> {
    let kind = flags
        .reg
        .clone()
        .or_else(|| config.regularizer.kind.clone())
        .unwrap_or_else(|| "hsstv".to_string());
    let omega = flags
        .omega
        .or(config.regularizer.omega)
        .unwrap_or(default_omega);
    let p = flags.p.or(config.regularizer.p).unwrap_or(1);
    let (tau_v, tau_h, tau_b) = match flags.tau {
        Some(Triple(v, h, b)) => (Some(v), Some(h), Some(b)),
        None => (
            config.regularizer.tau_v,
            config.regularizer.tau_h,
            config.regularizer.tau_b,
        ),
    };
    let spec = match kind.as_str() {
        "hsstv" => RegularizerSpec::hsstv(omega, MixedNorm::from_p(p)?)?,
        "htv" => RegularizerSpec::Htv,
        "sstv" => RegularizerSpec::Sstv,
        "asstv" => RegularizerSpec::asstv(
            tau_v.unwrap_or(1.0),
            tau_h.unwrap_or(1.0),
            tau_b.unwrap_or(3.0),
        )?,
        other => {
            return Err(CliError::Invalid(format!(
                "unknown regularizer '{other}' (expected hsstv, htv, sstv, or asstv)"
            )))
        }
    };
    Ok(spec)
}

/// JSON fragment describing a regularizer for reports.
pub fn regularizer_json(spec: &RegularizerSpec) -> serde_json::Value {
    match spec {
        RegularizerSpec::Hsstv { omega, p } => serde_json::json!({
            "kind": "hsstv", "omega": omega, "p": p.as_p(),
        }),
        RegularizerSpec::Htv => serde_json::json!({ "kind": "htv" }),
        RegularizerSpec::Sstv => serde_json::json!({ "kind": "sstv" }),
        RegularizerSpec::Asstv {
            tau_v,
            tau_h,
            tau_b,
        } => serde_json::json!({
            "kind": "asstv", "tau_v": tau_v, "tau_h": tau_h, "tau_b": tau_b,
        }),
    }
}
