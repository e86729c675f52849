//! Command bodies: each one reads inputs, resolves the effective settings,
//! runs the library, and writes outputs atomically.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use hsstv::admm::{solve_cs, solve_denoise, SolveReport};
use hsstv::cube::{CubeDims, HsCube};
use hsstv::degrade::{add_gaussian, degrade_mixed, make_sampling_mask};
use hsstv::io::{
    read_cube, read_raw_cube, read_sampling_mask, write_cube, write_mask_file, write_sampling_mask,
    RawDtype,
};
use hsstv::metrics::{
    metrics_report, response_csv, spatial_response, spectral_response, SsimConfig,
};
use hsstv::problem::{
    build_cs, build_denoise, epsilon_mixed, eta_mixed, CsProblem, DenoiseProblem,
};
use hsstv::prox::BoxSpec;
use hsstv::reg::RegularizerSpec;

use crate::settings::{self, BandTriple, Pair};
use crate::{
    CliError, CliResult, CsRestoreArgs, CsSampleArgs, DegradeArgs, ExportRgbArgs, ImportArgs,
    MetricsArgs, RestoreArgs, SweepArgs,
};

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::from)?;
    tmp.write_all(bytes).map_err(CliError::from)?;
    tmp.persist(path)
        .map_err(|e| CliError::Invalid(e.error.to_string()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

fn resolve_path(
    flag: Option<PathBuf>,
    config_value: &Option<String>,
    what: &str,
) -> CliResult<PathBuf> {
    flag.or_else(|| config_value.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Invalid(format!(
                "no {what} path given (flag or [paths] in the config)"
            ))
        })
}

fn optional_path(flag: Option<PathBuf>, config_value: &Option<String>) -> Option<PathBuf> {
    flag.or_else(|| config_value.as_ref().map(PathBuf::from))
}

fn trace_csv(report: &SolveReport) -> String {
    let mut out = String::from("iteration,u_change,primal_residual\n");
    for rec in &report.history {
        out.push_str(&format!(
            "{},{},{}\n",
            rec.iteration, rec.u_change, rec.primal_residual
        ));
    }
    out
}

fn emit_solver_outputs(
    command: &str,
    spec: &RegularizerSpec,
    settings_json: serde_json::Value,
    report: &SolveReport,
    report_path: Option<&Path>,
    trace_path: Option<&Path>,
) -> CliResult<()> {
    println!(
        "{command}: {} after {} iterations (u change {:.3e}, residual {:.3e}, {:.2}s)",
        if report.converged {
            "converged"
        } else {
            "hit the iteration cap"
        },
        report.iterations,
        report.final_u_change,
        report.final_primal_residual,
        report.wall_time_secs,
    );
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(path) = report_path {
        let body = serde_json::json!({
            "command": command,
            "regularizer": settings::regularizer_json(spec),
            "settings": settings_json,
            "result": report,
        });
        write_text(path, &format!("{:#}\n", body))?;
    }
    if let Some(path) = trace_path {
        write_text(path, &trace_csv(report))?;
    }
    Ok(())
}

pub fn degrade(args: DegradeArgs) -> CliResult<()> {
    let config = settings::load_config(args.config.as_deref())?;
    let params = settings::resolve_noise(&args.noise, &config)?;
    let range = settings::resolve_box(&args.range, &config)?;
    let seed = settings::resolve_seed(args.seed, &config);
    let input_path = resolve_path(args.input, &config.paths.input, "input")?;
    let out_path = resolve_path(args.out, &config.paths.output, "output")?;

    let input = read_cube(&input_path)?;
    let (degraded, corruption) = degrade_mixed(&input, &params, &range, seed)?;
    write_cube(&out_path, &degraded)?;
    if let Some(mask_path) = optional_path(args.mask_out, &config.paths.mask) {
        let one_based: Vec<u64> = corruption.indices().iter().map(|&i| i as u64 + 1).collect();
        write_mask_file(&mask_path, input.dims(), &one_based)?;
    }

    // radii the heuristics would pick for this observation
    let v_ave = degraded.data().iter().sum::<f64>() / degraded.dims().nb() as f64;
    let epsilon = epsilon_mixed(&params, degraded.dims());
    let eta = eta_mixed(&params, v_ave, degraded.dims());
    println!(
        "degraded {} ({} voxels corrupted); heuristic epsilon = {:.6}, eta = {:.6}",
        out_path.display(),
        corruption.count(),
        epsilon,
        eta,
    );
    Ok(())
}

fn denoise_problem_from(
    observed: &HsCube,
    spec: &RegularizerSpec,
    epsilon: Option<f64>,
    eta: Option<f64>,
    params: &hsstv::problem::MixedNoiseParams,
    range: BoxSpec,
) -> CliResult<(DenoiseProblem, f64, f64)> {
    let v_ave = observed.data().iter().sum::<f64>() / observed.dims().nb() as f64;
    let explicit = epsilon.is_some() || eta.is_some();
    let eps = epsilon.unwrap_or_else(|| epsilon_mixed(params, observed.dims()));
    let eta = eta.unwrap_or_else(|| eta_mixed(params, v_ave, observed.dims()));
    if eps <= 0.0 || eta <= 0.0 {
        return Err(CliError::Invalid(format!(
            "constraint radii must be positive (epsilon = {eps}, eta = {eta}); \
             pass --epsilon/--eta or the noise statistics (--sigma/--sp/--lv/--lh)"
        )));
    }
    let problem = if explicit {
        DenoiseProblem::with_radii(observed, spec, eps, eta, range)?
    } else {
        build_denoise(observed, spec, params, range)?
    };
    Ok((problem, eps, eta))
}

pub fn restore(args: RestoreArgs) -> CliResult<()> {
    let config = settings::load_config(args.config.as_deref())?;
    let spec = settings::resolve_regularizer(&args.reg, &config, 0.04)?;
    let params = settings::resolve_noise(&args.noise, &config)?;
    let range = settings::resolve_box(&args.range, &config)?;
    let solver = settings::resolve_solver(&args.solver, &config)?;
    let epsilon = args.epsilon.or(config.constraints.epsilon);
    let eta = args.eta.or(config.constraints.eta);
    let input_path = resolve_path(args.input, &config.paths.input, "input")?;
    let out_path = resolve_path(args.out, &config.paths.output, "output")?;

    let observed = read_cube(&input_path)?;
    let (problem, eps, eta) = denoise_problem_from(&observed, &spec, epsilon, eta, &params, range)?;
    let solution = solve_denoise(&problem, &solver, None)?;
    write_cube(&out_path, &solution.u)?;

    let settings_json = serde_json::json!({
        "epsilon": eps,
        "eta": eta,
        "box": [range.lo(), range.hi()],
        "noise": params,
        "solver": solver,
    });
    emit_solver_outputs(
        "restore",
        &spec,
        settings_json,
        &solution.report,
        optional_path(args.report, &config.paths.report).as_deref(),
        optional_path(args.trace, &config.paths.trace).as_deref(),
    )
}

pub fn cs_sample(args: CsSampleArgs) -> CliResult<()> {
    let config = settings::load_config(args.config.as_deref())?;
    let seed = settings::resolve_seed(args.seed, &config);
    let input_path = resolve_path(args.input, &config.paths.input, "input")?;
    let out_path = resolve_path(args.out, &config.paths.output, "output")?;
    let mask_path = resolve_path(args.mask_out, &config.paths.mask, "mask output")?;
    let input = read_cube(&input_path)?;
    let mask = make_sampling_mask(input.dims(), args.rate, seed)?;
    let noisy = add_gaussian(&input, args.sigma, seed)?;
    let samples = mask.sample(&noisy)?;

    // the measurement vector travels as an Mx1x1 cube
    let m = samples.len();
    let vector = HsCube::from_vec(CubeDims::new(m, 1, 1)?, samples)?;
    write_cube(&out_path, &vector)?;
    write_sampling_mask(&mask_path, &mask)?;
    println!(
        "sampled {} of {} voxels (rate {:.4}); heuristic epsilon = {:.6}",
        m,
        input.dims().nb(),
        mask.rate(),
        args.sigma * (m as f64).sqrt(),
    );
    Ok(())
}

pub fn cs_restore(args: CsRestoreArgs) -> CliResult<()> {
    let config = settings::load_config(args.config.as_deref())?;
    let spec = settings::resolve_regularizer(&args.reg, &config, 0.05)?;
    let range = settings::resolve_box(&args.range, &config)?;
    let solver = settings::resolve_solver(&args.solver, &config)?;

    let input_path = resolve_path(args.input, &config.paths.input, "input")?;
    let out_path = resolve_path(args.out, &config.paths.output, "output")?;
    let mask_path = resolve_path(args.mask, &config.paths.mask, "mask")?;
    let mask = read_sampling_mask(&mask_path)?;
    let vector = read_cube(&input_path)?;
    if vector.dims().nb() != mask.len() {
        return Err(CliError::Invalid(format!(
            "measurement vector holds {} values but the mask keeps {}",
            vector.dims().nb(),
            mask.len()
        )));
    }
    let samples = vector.data().to_vec();

    let epsilon = args.epsilon.or(config.constraints.epsilon);
    let sigma = args.sigma.or(config.noise.sigma);
    let problem = match (epsilon, sigma) {
        (Some(eps), _) => CsProblem::with_epsilon(samples, mask, &spec, eps, range)?,
        (None, Some(sigma)) => build_cs(samples, mask, &spec, sigma, range)?,
        (None, None) => {
            return Err(CliError::Invalid(
                "the fidelity radius is undetermined; pass --epsilon or --sigma".into(),
            ))
        }
    };
    let eps = problem.ball2().radius();
    let solution = solve_cs(&problem, &solver, None)?;
    write_cube(&out_path, &solution.u)?;

    let settings_json = serde_json::json!({
        "epsilon": eps,
        "sampling_rate": problem.mask().rate(),
        "box": [range.lo(), range.hi()],
        "solver": solver,
    });
    emit_solver_outputs(
        "cs-restore",
        &spec,
        settings_json,
        &solution.report,
        optional_path(args.report, &config.paths.report).as_deref(),
        optional_path(args.trace, &config.paths.trace).as_deref(),
    )
}

pub fn metrics(args: MetricsArgs) -> CliResult<()> {
    let cube = read_cube(&args.input)?;
    let reference = read_cube(&args.reference)?;
    let cfg = SsimConfig {
        window: args.window,
        stride: args.stride,
        ..SsimConfig::default()
    };
    let report = metrics_report(&cube, &reference, &cfg)?;
    let csv = report.to_csv();
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }

    if let Some(Pair(row, band)) = args.spatial {
        let profile = spatial_response(&cube, row, band)?;
        let text = response_csv("col", &profile);
        match &args.spatial_out {
            Some(path) => write_text(path, &text)?,
            None => print!("{text}"),
        }
    }
    if let Some(Pair(row, col)) = args.spectral {
        let spectrum = spectral_response(&cube, row, col)?;
        let text = response_csv("band", &spectrum);
        match &args.spectral_out {
            Some(path) => write_text(path, &text)?,
            None => print!("{text}"),
        }
    }
    Ok(())
}

pub fn export_rgb(args: ExportRgbArgs) -> CliResult<()> {
    let cube = read_cube(&args.input)?;
    let dims = cube.dims();
    let BandTriple(r, g, b) = args.bands;
    for band in [r, g, b] {
        if band == 0 || band > dims.bands {
            return Err(CliError::Invalid(format!(
                "band {band} outside 1..={}",
                dims.bands
            )));
        }
    }
    // clamp to the unit range before quantization: noisy cubes overshoot it
    let quantize = |band: usize, row: u32, col: u32| -> u8 {
        let i = (band - 1) * dims.n() + (col as usize) * dims.n_v + row as usize;
        (cube.data()[i].clamp(0.0, 1.0) * 255.0).round() as u8
    };
    let image = image::RgbImage::from_fn(dims.n_h as u32, dims.n_v as u32, |x, y| {
        image::Rgb([quantize(r, y, x), quantize(g, y, x), quantize(b, y, x)])
    });
    let mut encoded = std::io::Cursor::new(Vec::new());
    image
        .write_to(&mut encoded, image::ImageFormat::Png)
        .map_err(|e| CliError::Invalid(format!("png encode failed: {e}")))?;
    write_bytes(&args.out, encoded.get_ref())?;
    println!(
        "wrote {} ({}x{}, bands {r},{g},{b})",
        args.out.display(),
        dims.n_h,
        dims.n_v
    );
    Ok(())
}

pub fn sweep(args: SweepArgs) -> CliResult<()> {
    let config = settings::load_config(args.config.as_deref())?;
    let params = settings::resolve_noise(&args.noise, &config)?;
    let range = settings::resolve_box(&args.range, &config)?;
    let solver = settings::resolve_solver(&args.solver, &config)?;
    let p = hsstv::reg::MixedNorm::from_p(args.p)?;

    let observed = read_cube(&args.input)?;
    let reference = read_cube(&args.reference)?;
    let omegas: Vec<f64> = match &args.omegas {
        Some(list) if !list.is_empty() => list.clone(),
        _ => (1..=20).map(|k| k as f64 / 100.0).collect(),
    };

    struct SweepRow {
        omega: f64,
        psnr: f64,
        ssim: f64,
        iterations: usize,
        converged: bool,
    }

    let solve_one = |omega: f64| -> CliResult<SweepRow> {
        let spec = RegularizerSpec::hsstv(omega, p)?;
        let (problem, _, _) = denoise_problem_from(
            &observed,
            &spec,
            args.epsilon.or(config.constraints.epsilon),
            args.eta.or(config.constraints.eta),
            &params,
            range,
        )?;
        let solution = solve_denoise(&problem, &solver, None)?;
        let report = metrics_report(&solution.u, &reference, &SsimConfig::default())?;
        Ok(SweepRow {
            omega,
            psnr: report.psnr,
            ssim: report.ssim,
            iterations: solution.report.iterations,
            converged: solution.report.converged,
        })
    };

    let jobs = args.jobs.unwrap_or_else(|| omegas.len().min(8)).max(1);
    let mut rows: Vec<CliResult<SweepRow>> = Vec::with_capacity(omegas.len());
    if jobs == 1 {
        for &omega in &omegas {
            rows.push(solve_one(omega));
        }
    } else {
        // one independent solver per omega point, capped at `jobs` at a time
        for chunk in omegas.chunks(jobs) {
            let chunk_rows: Vec<CliResult<SweepRow>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&omega| scope.spawn(move || solve_one(omega)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| match h.join() {
                        Ok(row) => row,
                        Err(_) => Err(CliError::Solver("sweep worker panicked".into())),
                    })
                    .collect()
            });
            rows.extend(chunk_rows);
        }
    }

    let mut csv = String::from("omega,psnr,ssim,iterations,converged\n");
    for row in rows {
        let row = row?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.omega, row.psnr, row.ssim, row.iterations, row.converged
        ));
    }
    write_text(&args.out, &csv)?;
    println!(
        "swept {} omega points into {}",
        omegas.len(),
        args.out.display()
    );
    Ok(())
}

pub fn import(args: ImportArgs) -> CliResult<()> {
    let dims = CubeDims::new(args.nv, args.nh, args.bands)?;
    let dtype = match args.dtype.as_str() {
        "f32" => RawDtype::F32,
        "f64" => RawDtype::F64,
        other => {
            return Err(CliError::Invalid(format!(
                "unknown dtype '{other}' (expected f32 or f64)"
            )))
        }
    };
    let cube = read_raw_cube(&args.input, dims, dtype)?;
    write_cube(&args.out, &cube)?;
    println!(
        "imported {} as {}",
        args.input.display(),
        args.out.display()
    );
    Ok(())
}
