//! The ADMM engine shared by the denoising and CS problems: an exact
//! quadratic step (FFT-diagonalized where the observation operator allows
//! it, conjugate gradients otherwise), prox updates for every split block,
//! dual ascent, and the stopping rule on the iterate change.

use std::time::Instant;

use crate::cube::{cube_l2_change, HsCube};
use crate::fft::Fft3;
use crate::linop::{cg_solve, AnalysisOp};
use crate::problem::{ConstraintSlacks, CsProblem, DenoiseProblem, SolverPath};
use crate::prox::{project_box, project_l1_ball, project_l2_ball, prox_l2ball_after_sampling};
use crate::{Error, Result};

const CG_TOL: f64 = 1e-8;
const CG_MAX_ITER: usize = 1000;

/// Step size, iteration cap, and the l2 threshold on the change of `u`
/// between iterations. Defaults follow the reference settings
/// (0.05, 10000, 0.01).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            max_iter: 10_000,
            stop_tol: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.stop_tol > 0.0 && self.stop_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stop_tol must be positive, got {}",
                self.stop_tol
            )));
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub iteration: usize,
    pub u_change: f64,
    pub primal_residual: f64,
}

/// Split variables, duals, and bookkeeping of one solve. Block sizes depend
/// on the problem: denoising uses four blocks (analysis output, two
/// observation-length blocks, one cube block) plus the sparse estimate `s`;
/// CS drops `s` and the fourth block.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub u: HsCube,
    pub s: Option<Vec<f64>>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub z3: Vec<f64>,
    pub z4: Option<Vec<f64>>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub d4: Option<Vec<f64>>,
    pub iterations: usize,
    pub history: Vec<IterRecord>,
}

impl AdmmState {
    /// All-zero initialization for the denoising splitting.
    pub fn zeros_denoise(problem: &DenoiseProblem) -> Self {
        let nb = problem.dims().nb();
        let m = problem.m_len();
        let len1 = problem.recipe().output_len();
        Self {
            u: HsCube::zeros(problem.dims()),
            s: Some(vec![0.0; m]),
            z1: vec![0.0; len1],
            z2: vec![0.0; m],
            z3: vec![0.0; m],
            z4: Some(vec![0.0; nb]),
            d1: vec![0.0; len1],
            d2: vec![0.0; m],
            d3: vec![0.0; m],
            d4: Some(vec![0.0; nb]),
            iterations: 0,
            history: Vec::new(),
        }
    }

    /// All-zero initialization for the three-block CS splitting.
    pub fn zeros_cs(problem: &CsProblem) -> Self {
        let nb = problem.dims().nb();
        let len1 = problem.recipe().output_len();
        Self {
            u: HsCube::zeros(problem.dims()),
            s: None,
            z1: vec![0.0; len1],
            z2: vec![0.0; nb],
            z3: vec![0.0; nb],
            z4: None,
            d1: vec![0.0; len1],
            d2: vec![0.0; nb],
            d3: vec![0.0; nb],
            d4: None,
            iterations: 0,
            history: Vec::new(),
        }
    }
}

/// Outcome of a full solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_u_change: f64,
    pub final_primal_residual: f64,
    pub feasibility: ConstraintSlacks,
    pub wall_time_secs: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub history: Vec<IterRecord>,
}

pub struct DenoiseSolution {
    pub u: HsCube,
    pub s: Vec<f64>,
    pub report: SolveReport,
}

pub struct CsSolution {
    pub u: HsCube,
    pub report: SolveReport,
}

enum QuadSolver {
    Direct { fft: Fft3, inv_weights: Vec<f64> },
    Cg,
}

impl QuadSolver {
    fn direct(op: &dyn AnalysisOp, c: f64) -> Self {
        let symbol = op.gram_symbol();
        let inv_weights = symbol.values().iter().map(|&l| 1.0 / (l + c)).collect();
        Self::Direct {
            fft: Fft3::new(op.dims()),
            inv_weights,
        }
    }

    fn for_denoise(problem: &DenoiseProblem) -> Self {
        match problem.path() {
            SolverPath::FftDirect => Self::direct(problem.recipe().op(), 1.5),
            SolverPath::Cg => Self::Cg,
        }
    }
}

fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Adds `gx - z` into the dual block and returns `||gx - z||^2`.
fn dual_ascend(d: &mut [f64], gx: &[f64], z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..d.len() {
        let r = gx[i] - z[i];
        d[i] += r;
        acc += r * r;
    }
    acc
}

fn finite_cube(dims: crate::cube::CubeDims, data: Vec<f64>, iter: usize) -> Result<HsCube> {
    HsCube::from_vec(dims, data).map_err(|e| Error::SolverFailure(format!("iteration {iter}: {e}")))
}

/// Exact minimizer of the joint quadratic of the denoising step:
/// `||z1 - A u - d1||^2 + ||z2 - (Phi u + s) - d2||^2 + ||z3 - s - d3||^2 +
/// ||z4 - u - d4||^2` over `(u, s)`. Eliminating `s` gives the normal
/// equations `(A^T A + (1/2) Phi^T Phi + I) u = A^T(z1-d1) +
/// (1/2) Phi^T(z2-d2) -(1/2) Phi^T(z3-d3) + (z4-d4)` and
/// `s = ((z2-d2) - Phi u + (z3-d3)) / 2`.
pub fn solve_joint_quadratic(
    problem: &DenoiseProblem,
    state: &AdmmState,
) -> Result<(HsCube, Vec<f64>)> {
    let quad = QuadSolver::for_denoise(problem);
    let mut warnings = Vec::new();
    joint_quadratic(problem, state, &quad, &mut warnings, state.iterations)
}

fn joint_quadratic(
    problem: &DenoiseProblem,
    state: &AdmmState,
    quad: &QuadSolver,
    warnings: &mut Vec<String>,
    iter: usize,
) -> Result<(HsCube, Vec<f64>)> {
    let op = problem.recipe().op();
    let dims = problem.dims();
    let z4 = state.z4.as_ref().expect("denoising state has a z4 block");
    let d4 = state.d4.as_ref().expect("denoising state has a d4 block");

    let r1 = vsub(&state.z1, &state.d1);
    let r2 = vsub(&state.z2, &state.d2);
    let r3 = vsub(&state.z3, &state.d3);
    let r4 = vsub(z4, d4);

    let mut rhs = op.adjoint(&r1)?.into_data();
    let half_r2_minus_r3: Vec<f64> = r2.iter().zip(&r3).map(|(a, b)| 0.5 * (a - b)).collect();
    let scattered = problem.apply_phi_adjoint(&half_r2_minus_r3)?;
    for ((rhs_i, sc), r4_i) in rhs.iter_mut().zip(scattered.data()).zip(&r4) {
        *rhs_i += sc + r4_i;
    }

    let u_data = match quad {
        QuadSolver::Direct { fft, inv_weights } => {
            let mut spec = fft.forward(&rhs);
            for (s, w) in spec.iter_mut().zip(inv_weights) {
                *s *= *w;
            }
            fft.inverse_real(spec)
        }
        QuadSolver::Cg => {
            let matvec = |x: &[f64]| -> Vec<f64> {
                let xc = HsCube::from_vec(dims, x.to_vec()).expect("finite CG iterate");
                let mut out = op
                    .adjoint(&op.forward(&xc).expect("dims fixed"))
                    .expect("dims fixed")
                    .into_data();
                let phi_x = problem.apply_phi(&xc).expect("dims fixed");
                let back = problem.apply_phi_adjoint(&phi_x).expect("dims fixed");
                for i in 0..out.len() {
                    out[i] += 0.5 * back.data()[i] + x[i];
                }
                out
            };
            let outcome = cg_solve(matvec, &rhs, CG_TOL, CG_MAX_ITER)?;
            if !outcome.converged {
                warnings.push(format!(
                    "iteration {iter}: cg stopped at {} iterations with relative residual {:.3e}",
                    outcome.iterations, outcome.rel_residual
                ));
            }
            outcome.x
        }
    };
    let u = finite_cube(dims, u_data, iter)?;

    let phi_u = problem.apply_phi(&u)?;
    let s = r2
        .iter()
        .zip(&phi_u)
        .zip(&r3)
        .map(|((a, p), b)| 0.5 * (a - p + b))
        .collect();
    Ok((u, s))
}

/// Exact minimizer of the CS quadratic `||z1 - A u - d1||^2 +
/// ||z2 - u - d2||^2 + ||z3 - u - d3||^2`: the sampling operator stays out
/// of the quadratic (it lives in the z2 prox), so
/// `(A^T A + 2 I) u = A^T(z1-d1) + (z2-d2) + (z3-d3)` is FFT-diagonal.
pub fn solve_cs_quadratic(problem: &CsProblem, state: &AdmmState) -> Result<HsCube> {
    let quad = QuadSolver::direct(problem.recipe().op(), 2.0);
    cs_quadratic(problem, state, &quad, state.iterations)
}

fn cs_quadratic(
    problem: &CsProblem,
    state: &AdmmState,
    quad: &QuadSolver,
    iter: usize,
) -> Result<HsCube> {
    let op = problem.recipe().op();
    let r1 = vsub(&state.z1, &state.d1);
    let mut rhs = op.adjoint(&r1)?.into_data();
    for i in 0..rhs.len() {
        rhs[i] += (state.z2[i] - state.d2[i]) + (state.z3[i] - state.d3[i]);
    }
    let u_data = match quad {
        QuadSolver::Direct { fft, inv_weights } => {
            let mut spec = fft.forward(&rhs);
            for (s, w) in spec.iter_mut().zip(inv_weights) {
                *s *= *w;
            }
            fft.inverse_real(spec)
        }
        QuadSolver::Cg => unreachable!("CS quadratic always uses the FFT path"),
    };
    finite_cube(problem.dims(), u_data, iter)
}

struct DenoiseStepper<'a> {
    problem: &'a DenoiseProblem,
    gamma: f64,
    quad: QuadSolver,
}

impl<'a> DenoiseStepper<'a> {
    fn new(problem: &'a DenoiseProblem, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            problem,
            gamma: config.gamma,
            quad: QuadSolver::for_denoise(problem),
        })
    }

    /// One full ADMM cycle; returns `(u_change, primal_residual)`.
    fn step(&self, state: &mut AdmmState, warnings: &mut Vec<String>) -> Result<(f64, f64)> {
        let problem = self.problem;
        let iter = state.iterations + 1;
        let (u_new, s_new) = joint_quadratic(problem, state, &self.quad, warnings, iter)?;

        let a_u = problem.recipe().op().forward(&u_new)?;
        let phi_u = problem.apply_phi(&u_new)?;
        let fit = vadd(&phi_u, &s_new);

        state.z1 = problem.recipe().prox(&vadd(&a_u, &state.d1), self.gamma)?;
        state.z2 = project_l2_ball(&vadd(&fit, &state.d2), problem.ball2())?;
        state.z3 = project_l1_ball(&vadd(&s_new, &state.d3), problem.ball1())?;
        let z4 = project_box(
            &vadd(u_new.data(), state.d4.as_ref().expect("denoise d4")),
            problem.range(),
        );

        let mut res_sq = dual_ascend(&mut state.d1, &a_u, &state.z1);
        res_sq += dual_ascend(&mut state.d2, &fit, &state.z2);
        res_sq += dual_ascend(&mut state.d3, &s_new, &state.z3);
        res_sq += dual_ascend(state.d4.as_mut().expect("denoise d4"), u_new.data(), &z4);
        state.z4 = Some(z4);

        let u_change = cube_l2_change(&u_new, &state.u)?;
        state.u = u_new;
        state.s = Some(s_new);
        state.iterations = iter;
        let primal_residual = res_sq.sqrt();
        state.history.push(IterRecord {
            iteration: iter,
            u_change,
            primal_residual,
        });
        Ok((u_change, primal_residual))
    }
}

struct CsStepper<'a> {
    problem: &'a CsProblem,
    gamma: f64,
    quad: QuadSolver,
}

impl<'a> CsStepper<'a> {
    fn new(problem: &'a CsProblem, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            problem,
            gamma: config.gamma,
            quad: QuadSolver::direct(problem.recipe().op(), 2.0),
        })
    }

    fn step(&self, state: &mut AdmmState) -> Result<(f64, f64)> {
        let problem = self.problem;
        let iter = state.iterations + 1;
        let u_new = cs_quadratic(problem, state, &self.quad, iter)?;

        let a_u = problem.recipe().op().forward(&u_new)?;
        state.z1 = problem.recipe().prox(&vadd(&a_u, &state.d1), self.gamma)?;
        state.z2 = prox_l2ball_after_sampling(
            &vadd(u_new.data(), &state.d2),
            problem.mask(),
            problem.ball2(),
        )?;
        state.z3 = project_box(&vadd(u_new.data(), &state.d3), problem.range());

        let mut res_sq = dual_ascend(&mut state.d1, &a_u, &state.z1);
        res_sq += dual_ascend(&mut state.d2, u_new.data(), &state.z2);
        res_sq += dual_ascend(&mut state.d3, u_new.data(), &state.z3);

        let u_change = cube_l2_change(&u_new, &state.u)?;
        state.u = u_new;
        state.iterations = iter;
        let primal_residual = res_sq.sqrt();
        state.history.push(IterRecord {
            iteration: iter,
            u_change,
            primal_residual,
        });
        Ok((u_change, primal_residual))
    }
}

/// One ADMM cycle of the denoising problem (quadratic step, four prox
/// updates, four dual updates). Prefer [`solve_denoise`] for full runs; this
/// entry point rebuilds the FFT plans every call.
pub fn admm_denoise_step(
    problem: &DenoiseProblem,
    config: &SolverConfig,
    state: &mut AdmmState,
) -> Result<()> {
    let mut warnings = Vec::new();
    DenoiseStepper::new(problem, config)?
        .step(state, &mut warnings)
        .map(|_| ())
}

/// One ADMM cycle of the three-block CS splitting.
pub fn admm_cs_step(
    problem: &CsProblem,
    config: &SolverConfig,
    state: &mut AdmmState,
) -> Result<()> {
    CsStepper::new(problem, config)?.step(state).map(|_| ())
}

fn run_loop(
    config: &SolverConfig,
    mut state: AdmmState,
    mut step: impl FnMut(&mut AdmmState) -> Result<(f64, f64)>,
) -> Result<(AdmmState, bool, f64, f64, f64)> {
    let start = Instant::now();
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    let mut last_residual = f64::INFINITY;
    while state.iterations < config.max_iter {
        let (u_change, residual) = step(&mut state)?;
        last_change = u_change;
        last_residual = residual;
        // the first cycle from a cold start leaves u at zero before the
        // duals move, so the change test only arms at the second cycle
        if state.iterations >= 2 && u_change < config.stop_tol {
            converged = true;
            break;
        }
    }
    let wall = start.elapsed().as_secs_f64();
    Ok((state, converged, last_change, last_residual, wall))
}

/// Runs ADMM on the denoising problem until the iterate change drops below
/// `stop_tol` or `max_iter` is reached. `initial` defaults to all zeros;
/// iteration-cap exhaustion is reported, not an error.
pub fn solve_denoise(
    problem: &DenoiseProblem,
    config: &SolverConfig,
    initial: Option<AdmmState>,
) -> Result<DenoiseSolution> {
    let stepper = DenoiseStepper::new(problem, config)?;
    let state = initial.unwrap_or_else(|| AdmmState::zeros_denoise(problem));
    let mut warnings = Vec::new();
    let (state, converged, change, residual, wall) =
        run_loop(config, state, |s| stepper.step(s, &mut warnings))?;

    let s = state.s.clone().expect("denoising state carries s");
    let feasibility = problem.constraint_slacks(&state.u, &s)?;
    Ok(DenoiseSolution {
        report: SolveReport {
            iterations: state.iterations,
            converged,
            final_u_change: change,
            final_primal_residual: residual,
            feasibility,
            wall_time_secs: wall,
            warnings,
            history: state.history.clone(),
        },
        u: state.u,
        s,
    })
}

/// Runs ADMM on the CS reconstruction problem.
pub fn solve_cs(
    problem: &CsProblem,
    config: &SolverConfig,
    initial: Option<AdmmState>,
) -> Result<CsSolution> {
    let stepper = CsStepper::new(problem, config)?;
    let state = initial.unwrap_or_else(|| AdmmState::zeros_cs(problem));
    let (state, converged, change, residual, wall) = run_loop(config, state, |s| stepper.step(s))?;

    let feasibility = problem.constraint_slacks(&state.u)?;
    Ok(CsSolution {
        report: SolveReport {
            iterations: state.iterations,
            converged,
            final_u_change: change,
            final_primal_residual: residual,
            feasibility,
            wall_time_secs: wall,
            warnings: Vec::new(),
            history: state.history.clone(),
        },
        u: state.u,
    })
}
