//! Backward Euler time stepping with Picard linearization, shared by the
//! fully meshed and the mortar/thin-shell discretizations.

mod linear;
mod problem;

pub use linear::{solve_sparse, Factorization, SymbolicFactor, RESIDUAL_TOL};
pub use problem::{EliminateSide, GlobalBlocks, Problem, ShellInterface, TsaInterfaceSpec};

use problem::AssemblyCache;
use serde::{Deserialize, Serialize};

use crate::assembly::{apply_dirichlet, CsrMatrix, ReducedSystem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransientConfig {
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Uniform initial temperature.
    pub t0: f64,
    /// Stop early once the relative change over one step drops below this.
    pub steady_tol: Option<f64>,
}

impl Default for TransientConfig {
    fn default() -> Self {
        TransientConfig { dt: 0.01, t_end: 2.0, picard_tol: 1e-8, picard_max_iters: 50, t0: 4.2, steady_tol: None }
    }
}

impl TransientConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("end time must be non-negative, got {}", self.t_end)));
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iters == 0 {
            return Err(Error::Config("Picard tolerance and iteration limit must be positive".into()));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Config(format!("initial temperature must be positive, got {}", self.t0)));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; `t_end` must be a whole number of
    /// steps up to rounding.
    pub fn steps(&self) -> Result<usize> {
        self.check()?;
        let n = self.t_end / self.dt;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::Config(format!("t_end = {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        Ok(rounded as usize)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub picard_iters: usize,
    /// Relative max-norm of the last Picard update of the temperatures.
    pub last_update: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientState {
    pub time: f64,
    /// All DoFs: volume nodes, shell sheets, multipliers.
    pub values: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

struct LinearCache {
    dt: f64,
    blocks: GlobalBlocks,
    matrix: CsrMatrix,
    reduced: ReducedSystem,
    factor: Factorization,
}

/// Reusable state of a time integration: assembly patterns, symbolic LU
/// and, for linear problems, the factorized system.
pub struct Stepper<'a> {
    problem: &'a Problem,
    config: TransientConfig,
    assembly: AssemblyCache,
    symbolic: Option<SymbolicFactor>,
    linear: Option<LinearCache>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `base - Σ A_k x` per row with error-free products and compensated
/// summation.
fn accurate_residual(terms: &[&CsrMatrix], x: &[f64], base: &[f64]) -> Vec<f64> {
    let mut out = base.to_vec();
    for (i, o) in out.iter_mut().enumerate() {
        let (mut sum, mut comp) = (*o, 0.0);
        let mut add = |v: f64| {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        };
        for a in terms {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let prod = -v * x[c];
                add(prod);
                add(v.mul_add(-x[c], -prod));
            }
        }
        *o = sum + comp;
    }
    out
}

/// Relative max-norm update over the temperature DoFs.
fn relative_update(new: &[f64], old: &[f64], n_temp: usize) -> f64 {
    let diff = new[..n_temp].iter().zip(&old[..n_temp]).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    diff / max_abs(&new[..n_temp]).max(1e-30)
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, config: TransientConfig) -> Result<Self> {
        config.check()?;
        Ok(Stepper { problem, config, assembly: AssemblyCache::default(), symbolic: None, linear: None })
    }

    pub fn config(&self) -> &TransientConfig {
        &self.config
    }

    fn system(&self, blocks: &GlobalBlocks, dt: f64) -> CsrMatrix {
        let p = self.problem;
        CsrMatrix::linear_combination(&[
            (1.0 / dt, &blocks.m),
            (1.0, &blocks.k),
            (1.0, p.robin_matrix()),
            (1.0, p.coupling()),
        ])
    }

    fn rhs(&self, blocks: &GlobalBlocks, prev: &[f64], dt: f64) -> Vec<f64> {
        let mx = blocks.m.mul_vec(prev);
        let r = self.problem.robin_rhs();
        (0..prev.len()).map(|i| mx[i] / dt + blocks.f[i] + r[i]).collect()
    }

    fn factor(&mut self, matrix: &CsrMatrix) -> Result<Factorization> {
        if self.symbolic.is_none() {
            self.symbolic = Some(SymbolicFactor::analyze(matrix)?);
        }
        match Factorization::new(matrix, self.symbolic.as_ref()) {
            Ok(f) => Ok(f),
            Err(_) if self.problem.is_linear() => Factorization::new(matrix, None),
            Err(e) => Err(e),
        }
    }

    /// Linear steps solve for the increment `x - prev` with the right-hand
    /// side `f + r - (K + R + C) prev` evaluated by compensated summation.
    /// Rounding then scales with the increment rather than the temperature
    /// level, which keeps the discrete energy balance at round-off.
    fn linear_step(&mut self, prev: &[f64], dt: f64) -> Result<Vec<f64>> {
        let stale = self.linear.as_ref().is_none_or(|c| c.dt != dt);
        if stale {
            let blocks = match self.linear.take() {
                Some(c) => c.blocks,
                None => self.problem.assemble_cached(prev, &mut self.assembly)?,
            };
            let a = self.system(&blocks, dt);
            let zero = vec![0.0; a.nrows()];
            let reduced = apply_dirichlet(&a, &zero, self.problem.fixed())?;
            let factor = self.factor(&reduced.matrix)?;
            self.linear = Some(LinearCache { dt, blocks, matrix: a, reduced, factor });
        }
        let p = self.problem;
        let cache = self.linear.as_ref().unwrap();
        let base: Vec<f64> = cache.blocks.f.iter().zip(p.robin_rhs()).map(|(f, r)| f + r).collect();
        let b = accurate_residual(&[&cache.blocks.k, p.robin_matrix(), p.coupling()], prev, &base);
        let mut fixed_step = vec![0.0; prev.len()];
        let mut moved = false;
        for (&d, &g) in p.fixed() {
            fixed_step[d] = g - prev[d];
            moved |= fixed_step[d] != 0.0;
        }
        let mut rhs = cache.reduced.restrict(&b);
        if moved {
            let lift = cache.reduced.restrict(&cache.matrix.mul_vec(&fixed_step));
            for (v, l) in rhs.iter_mut().zip(lift) {
                *v -= l;
            }
        }
        let y = cache.factor.solve(&rhs)?;
        let mut next = prev.to_vec();
        for (&d, &v) in cache.reduced.free.iter().zip(&y) {
            next[d] += v;
        }
        for (&d, &g) in p.fixed() {
            next[d] = g;
        }
        Ok(next)
    }

    /// Advances `prev` by one step of size `dt`.
    pub fn step(&mut self, prev: &TransientState, dt: f64) -> Result<TransientState> {
        let time = prev.time + dt;
        let n_temp = self.problem.dofs().n_temperature();
        if self.problem.is_linear() {
            let values = self.linear_step(&prev.values, dt)?;
            let last_update = relative_update(&values, &prev.values, n_temp);
            return Ok(TransientState { time, values, diagnostics: StepDiagnostics { picard_iters: 1, last_update } });
        }
        let mut iterate = prev.values.clone();
        let mut last_update = f64::INFINITY;
        for it in 1..=self.config.picard_max_iters {
            let blocks = self.problem.assemble_cached(&iterate, &mut self.assembly)?;
            let a = self.system(&blocks, dt);
            let b = self.rhs(&blocks, &prev.values, dt);
            let reduced = apply_dirichlet(&a, &b, self.problem.fixed())?;
            let factor = self.factor(&reduced.matrix)?;
            let next = reduced.expand(&factor.solve(&reduced.rhs)?);
            if let Some(bad) = next[..n_temp].iter().find(|v| !(**v > 0.0)) {
                return Err(Error::Solver(format!("non-physical temperature {bad} at t = {time}")));
            }
            last_update = relative_update(&next, &iterate, n_temp);
            iterate = next;
            log::trace!("t = {time:.6}: Picard iteration {it}, update {last_update:.3e}");
            if last_update < self.config.picard_tol {
                return Ok(TransientState {
                    time,
                    values: iterate,
                    diagnostics: StepDiagnostics { picard_iters: it, last_update },
                });
            }
        }
        Err(Error::PicardNonConvergence { iterations: self.config.picard_max_iters, last_update, time })
    }
}

/// Runs from the uniform initial state to `t_end`, returning every state
/// including the initial one.
pub fn run_transient(problem: &Problem, config: &TransientConfig) -> Result<Vec<TransientState>> {
    run_transient_with(problem, config, |_| Ok(()))
}

/// Like [`run_transient`], calling `observe` on each new state.
pub fn run_transient_with(
    problem: &Problem,
    config: &TransientConfig,
    mut observe: impl FnMut(&TransientState) -> Result<()>,
) -> Result<Vec<TransientState>> {
    let steps = config.steps()?;
    let mut stepper = Stepper::new(problem, *config)?;
    let initial = TransientState { time: 0.0, values: problem.initial_values(config.t0), diagnostics: StepDiagnostics::default() };
    observe(&initial)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial);
    for k in 1..=steps {
        let prev = states.last().unwrap();
        let mut next = stepper.step(prev, config.dt)?;
        next.time = k as f64 * config.dt;
        observe(&next)?;
        let change = relative_update(&next.values, &prev.values, problem.dofs().n_temperature());
        log::debug!("t = {:.6}: {} Picard iteration(s), step change {change:.3e}", next.time, next.diagnostics.picard_iters);
        states.push(next);
        if config.steady_tol.is_some_and(|tol| change < tol) {
            log::info!("steady state reached at t = {:.6}", k as f64 * config.dt);
            break;
        }
    }
    Ok(states)
}

/// Stationary solution by Picard iteration starting from `guess`.
pub fn solve_steady(problem: &Problem, guess: f64, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let mut iterate = problem.initial_values(guess);
    let n_temp = problem.dofs().n_temperature();
    let mut cache = AssemblyCache::default();
    let mut last_update = f64::INFINITY;
    for _ in 0..max_iters.max(1) {
        let blocks = problem.assemble_cached(&iterate, &mut cache)?;
        let a = CsrMatrix::linear_combination(&[(1.0, &blocks.k), (1.0, problem.robin_matrix()), (1.0, problem.coupling())]);
        let b: Vec<f64> = blocks.f.iter().zip(problem.robin_rhs()).map(|(f, r)| f + r).collect();
        let reduced = apply_dirichlet(&a, &b, problem.fixed())?;
        let next = reduced.expand(&solve_sparse(&reduced.matrix, &reduced.rhs)?);
        last_update = relative_update(&next, &iterate, n_temp);
        iterate = next;
        if problem.is_linear() || last_update < tol {
            return Ok(iterate);
        }
    }
    Err(Error::PicardNonConvergence { iterations: max_iters, last_update, time: f64::INFINITY })
}

/// Power terms of one step; positive source and Dirichlet terms heat the
/// domain, positive Robin power leaves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    pub stored: f64,
    pub source: f64,
    pub robin: f64,
    pub dirichlet: f64,
    /// `(stored - source + robin - dirichlet)` over the largest term.
    pub residual: f64,
}

/// Discrete energy balance of the step `prev -> next` (linear problems).
pub fn energy_balance(problem: &Problem, prev: &[f64], next: &[f64], dt: f64) -> Result<EnergyBalance> {
    if !problem.is_linear() {
        return Err(Error::Solver("energy balance is only available for linear problems".into()));
    }
    let n_temp = problem.dofs().n_temperature();
    let blocks = problem.assemble(prev)?;
    let delta: Vec<f64> = next.iter().zip(prev).map(|(a, b)| (a - b) / dt).collect();
    let stored: f64 = blocks.m.mul_vec(&delta)[..n_temp].iter().sum();
    let source: f64 = blocks.f[..n_temp].iter().sum();
    let rx = problem.robin_matrix().mul_vec(next);
    let robin: f64 = rx[..n_temp].iter().zip(&problem.robin_rhs()[..n_temp]).map(|(a, r)| a - r).sum();
    let a = CsrMatrix::linear_combination(&[
        (1.0 / dt, &blocks.m),
        (1.0, &blocks.k),
        (1.0, problem.robin_matrix()),
        (1.0, problem.coupling()),
    ]);
    let ax = a.mul_vec(next);
    let mx = blocks.m.mul_vec(prev);
    let dirichlet: f64 = problem
        .fixed()
        .keys()
        .filter(|&&d| d < n_temp)
        .map(|&d| ax[d] - (mx[d] / dt + blocks.f[d] + problem.robin_rhs()[d]))
        .sum();
    let scale = [source, robin, dirichlet, stored].iter().fold(1e-30_f64, |m, v| m.max(v.abs()));
    let residual = (stored - source + robin - dirichlet) / scale;
    Ok(EnergyBalance { stored, source, robin, dirichlet, residual })
}
