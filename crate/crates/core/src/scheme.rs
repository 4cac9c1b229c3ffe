//! Reaction-trajectory time stepping.
//!
//! Each step minimizes `J(R) = d(R, R^n)^2 + F(c0 + S R)` where the distance
//! term is `sum_l (x_l + a_l) ln(x_l / a_l + 1) - x_l`, `x = R - R^n` and
//! `a_l = k-_l (c^n)^{beta^l} dt`. The objective is strictly convex on its
//! open domain and its critical point satisfies the discrete trajectory
//! equation `ln(x_l / a_l + 1) = -(S^T mu(c(R)))_l`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::model::{self, ConservationBasis, EquilibriumState, ModelError, ReactionNetwork};

pub const DEFAULT_MAX_NEWTON: usize = 100;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
/// Trial points keep at least this fraction of each positive quantity.
const BOUNDARY_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("outside the admissible region: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dissipation scale for reaction {reaction} overflows (ln a = {log_scale})")]
    ScaleOverflow { reaction: usize, log_scale: f64 },
    #[error("Newton did not converge in {} iterations (gradient norm {:e})", .best.newton_iters, .best.gradient_norm)]
    MaxIterationsExceeded { best: Box<StepReport> },
    #[error("line search stalled at Newton iteration {iteration} (gradient norm {gradient_norm:e})")]
    LineSearchStall {
        iteration: usize,
        gradient_norm: f64,
    },
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
}

/// Data frozen at the start of a step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepContext {
    pub r_n: Vec<f64>,
    pub c_n: Vec<f64>,
    /// `a_l = k-_l (c^n)^{beta^l} dt`.
    pub a: Vec<f64>,
    pub dt: f64,
}

impl StepContext {
    pub fn new(
        network: &ReactionNetwork,
        c0: &[f64],
        r_n: &[f64],
        dt: f64,
    ) -> Result<Self, SchemeError> {
        network.check_species_len("c0", c0)?;
        network.check_reaction_len("R^n", r_n)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SchemeError::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let c_n = network.concentrations(c0, r_n);
        if let Some((i, v)) = c_n.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(SchemeError::Domain(format!("c^n[{i}] = {v} is not strictly positive")));
        }
        // log space so that large dt or high-order beta fails loudly
        let a = network
            .reactions()
            .iter()
            .enumerate()
            .map(|(l, r)| {
                let log_scale = r.k_minus.ln()
                    + r.beta
                        .iter()
                        .zip(&c_n)
                        .map(|(&b, &c)| f64::from(b) * c.ln())
                        .sum::<f64>()
                    + dt.ln();
                let a = log_scale.exp();
                if a.is_finite() && a > 0.0 {
                    Ok(a)
                } else {
                    Err(SchemeError::ScaleOverflow { reaction: l, log_scale })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StepContext {
            r_n: r_n.to_vec(),
            c_n,
            a,
            dt,
        })
    }

    /// Trajectory distance `d(R, R^n)^2`.
    pub fn d_r_squared(&self, r: &[f64]) -> Result<f64, SchemeError> {
        let mut total = 0.0;
        for (l, ((&rl, &rn), &a)) in r.iter().zip(&self.r_n).zip(&self.a).enumerate() {
            let t = (rl - rn) / a;
            if !(t > -1.0) {
                return Err(SchemeError::Domain(format!(
                    "R[{l}] - R^n[{l}] + a[{l}] must be positive"
                )));
            }
            total += a * dissipation_potential(t);
        }
        Ok(total)
    }
}

/// `h(t) = (1 + t) ln(1 + t) - t`, so that each distance term is `a h(x / a)`.
/// Nonnegative on `t > -1` with `h(0) = 0`.
pub fn dissipation_potential(t: f64) -> f64 {
    if t.abs() < 1e-2 {
        // sum_{k>=2} (-1)^k t^k / (k (k - 1))
        let mut sum = 0.0;
        let mut pow = t * t;
        for k in 2..12 {
            let term = pow / (k * (k - 1)) as f64;
            sum += if k % 2 == 0 { term } else { -term };
            pow *= t;
        }
        sum
    } else {
        ((1.0 + t) * t.ln_1p() - t).max(0.0)
    }
}

/// Inner solver settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Gradient tolerance; defaults to `1e-12 max(1, |affinity(c^n)|_inf)`.
    pub tol: Option<f64>,
    pub max_newton: usize,
    /// Start Newton from an explicit mass-action step when that is admissible
    /// and lowers the objective.
    pub predictor: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: None,
            max_newton: DEFAULT_MAX_NEWTON,
            predictor: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub r_next: Vec<f64>,
    pub c_next: Vec<f64>,
    pub objective_value: f64,
    pub gradient_norm: f64,
    pub newton_iters: usize,
    pub linesearch_backtracks: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Tolerance the gradient was tested against.
    pub tol: f64,
}

/// One minimization step.
#[derive(Debug, Clone, Copy)]
pub struct StepProblem<'a> {
    pub network: &'a ReactionNetwork,
    pub c0: &'a [f64],
    pub c_inf: &'a [f64],
    pub ctx: &'a StepContext,
}

/// Positive quantities at an admissible point.
struct Interior {
    c: Vec<f64>,
    /// `ln(x_l / a_l + 1)`
    log_ratio: Vec<f64>,
    /// `x_l + a_l`
    u: Vec<f64>,
}

impl<'a> StepProblem<'a> {
    pub fn new(
        network: &'a ReactionNetwork,
        c0: &'a [f64],
        eq: &'a EquilibriumState,
        ctx: &'a StepContext,
    ) -> Self {
        StepProblem {
            network,
            c0,
            c_inf: eq.c_inf(),
            ctx,
        }
    }

    fn interior(&self, r: &[f64]) -> Result<Interior, SchemeError> {
        self.network.check_reaction_len("R", r)?;
        let c = self.network.concentrations(self.c0, r);
        if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(SchemeError::Domain(format!("c[{i}] = {v} is not positive")));
        }
        let mut log_ratio = Vec::with_capacity(r.len());
        let mut u = Vec::with_capacity(r.len());
        for (l, ((&rl, &rn), &a)) in r.iter().zip(&self.ctx.r_n).zip(&self.ctx.a).enumerate() {
            let x = rl - rn;
            let t = x / a;
            if !(t > -1.0) {
                return Err(SchemeError::Domain(format!(
                    "R[{l}] - R^n[{l}] + a[{l}] must be positive"
                )));
            }
            log_ratio.push(t.ln_1p());
            u.push(x + a);
        }
        Ok(Interior { c, log_ratio, u })
    }

    pub fn is_admissible(&self, r: &[f64]) -> bool {
        self.interior(r).is_ok()
    }

    /// Concentrations at `R`.
    pub fn concentrations(&self, r: &[f64]) -> Vec<f64> {
        self.network.concentrations(self.c0, r)
    }

    pub fn objective(&self, r: &[f64]) -> Result<f64, SchemeError> {
        let it = self.interior(r)?;
        Ok(self.ctx.d_r_squared(r)? + model::free_energy(&it.c, self.c_inf))
    }

    /// Objective value together with the sum of absolute term magnitudes,
    /// which bounds its rounding error.
    fn objective_with_scale(&self, r: &[f64]) -> Result<(f64, f64), SchemeError> {
        let it = self.interior(r)?;
        let d = self.ctx.d_r_squared(r)?;
        let mut f = 0.0;
        let mut mag = d.abs();
        for (&c, &ci) in it.c.iter().zip(self.c_inf) {
            let term = c * ((c / ci).ln() - 1.0);
            f += term;
            mag += c * ((c / ci).ln().abs() + 1.0);
        }
        Ok((d + f, mag))
    }

    pub fn gradient(&self, r: &[f64]) -> Result<Vec<f64>, SchemeError> {
        Ok(self.gradient_with_scale(r)?.0)
    }

    /// Gradient plus a first-order bound, in units of machine epsilon, on
    /// its rounding error. The bound covers cancellation in `c0 + S R` and
    /// in `x + a`, which dominates near the boundary.
    fn gradient_with_scale(&self, r: &[f64]) -> Result<(Vec<f64>, f64), SchemeError> {
        let it = self.interior(r)?;
        let mu = model::chemical_potential(&it.c, self.c_inf)?;
        let stoich = self.network.stoich();
        // relative error of each ln c_i / c_inf_i, plus the log itself
        let mu_noise: Vec<f64> = stoich
            .iter()
            .zip(self.c0)
            .zip(&it.c)
            .zip(&mu)
            .map(|(((row, &c0), &c), &m)| {
                let mag = row.iter().zip(r).fold(c0.abs(), |acc, (&s, &rl)| acc + (s as f64 * rl).abs());
                mag / c + m.abs()
            })
            .collect();
        let mut scale = 0.0f64;
        let g = it
            .log_ratio
            .iter()
            .enumerate()
            .map(|(l, &lr)| {
                let x_mag = r[l].abs() + self.ctx.r_n[l].abs() + self.ctx.a[l];
                let mut sum = lr;
                let mut mag = lr.abs() + x_mag / it.u[l];
                for ((row, &m), &noise) in stoich.iter().zip(&mu).zip(&mu_noise) {
                    let s = row[l] as f64;
                    sum += s * m;
                    mag += s.abs() * noise;
                }
                scale = scale.max(mag);
                sum
            })
            .collect();
        Ok((g, scale))
    }

    /// `diag(1 / (x + a)) + S^T diag(1 / c) S`.
    pub fn hessian(&self, r: &[f64]) -> Result<DMatrix<f64>, SchemeError> {
        let it = self.interior(r)?;
        let mut h = free_energy_hessian(self.network, &it.c);
        for (l, &u) in it.u.iter().enumerate() {
            h[(l, l)] += 1.0 / u;
        }
        Ok(h)
    }

    /// Discrete trajectory equation residual
    /// `ln(x_l / a_l + 1) + (S^T mu)_l`, which equals the gradient.
    pub fn scheme_residual(&self, r: &[f64]) -> Result<Vec<f64>, SchemeError> {
        self.gradient(r)
    }

    /// Largest step length in `(0, 1]` along `p` keeping every concentration
    /// and every `x_l + a_l` above `BOUNDARY_FRACTION` of its current value.
    fn max_step(&self, r: &[f64], p: &[f64]) -> f64 {
        let c = self.network.concentrations(self.c0, r);
        let sp = self.network.apply_stoich(p);
        let mut alpha = 1.0f64;
        for (&ci, &di) in c.iter().zip(&sp) {
            if di < 0.0 {
                alpha = alpha.min((1.0 - BOUNDARY_FRACTION) * ci / -di);
            }
        }
        for (((&rl, &rn), &a), &pl) in r.iter().zip(&self.ctx.r_n).zip(&self.ctx.a).zip(p) {
            if pl < 0.0 {
                let u = rl - rn + a;
                alpha = alpha.min((1.0 - BOUNDARY_FRACTION) * u / -pl);
            }
        }
        alpha
    }

    fn initial_guess(&self, opts: &SolverOptions) -> Vec<f64> {
        let r_n = self.ctx.r_n.clone();
        if !opts.predictor {
            return r_n;
        }
        let rates = self.network.lma_rates(&self.ctx.c_n).net;
        let guess: Vec<f64> = r_n
            .iter()
            .zip(&rates)
            .map(|(r, v)| r + self.ctx.dt * v)
            .collect();
        match (self.objective(&guess), self.objective(&r_n)) {
            (Ok(jg), Ok(jn)) if jg < jn => guess,
            _ => r_n,
        }
    }

    /// Damped Newton minimization of the step objective from an interior
    /// start, with fraction-to-boundary clipping and Armijo backtracking.
    pub fn solve(&self, opts: &SolverOptions) -> Result<StepReport, SchemeError> {
        let network = self.network;
        let energy_before = model::free_energy(&self.ctx.c_n, self.c_inf);
        let tol = match opts.tol {
            Some(t) => t,
            None => {
                let aff = network.apply_stoich_transpose(&model::chemical_potential(
                    &self.ctx.c_n,
                    self.c_inf,
                )?);
                1e-12 * inf_norm(&aff).max(1.0)
            }
        };

        let mut r = self.initial_guess(opts);
        let (mut j, mut j_mag) = self.objective_with_scale(&r)?;
        let mut backtracks = 0;
        let report = |r: &[f64], j: f64, gnorm: f64, iters: usize, backtracks: usize| {
            let c_next = network.concentrations(self.c0, r);
            StepReport {
                r_next: r.to_vec(),
                energy_after: model::free_energy(&c_next, self.c_inf),
                c_next,
                objective_value: j,
                gradient_norm: gnorm,
                newton_iters: iters,
                linesearch_backtracks: backtracks,
                energy_before,
                tol,
            }
        };

        for iter in 0..=opts.max_newton {
            let (g, g_scale) = self.gradient_with_scale(&r)?;
            let gnorm = inf_norm(&g);
            // evaluation noise of the gradient itself
            let floor = 16.0 * f64::EPSILON * g_scale;
            if gnorm <= tol.max(floor) {
                return Ok(report(&r, j, gnorm, iter, backtracks));
            }
            if iter == opts.max_newton {
                return Err(SchemeError::MaxIterationsExceeded {
                    best: Box::new(report(&r, j, gnorm, iter, backtracks)),
                });
            }

            let h = self.hessian(&r)?;
            let chol = h.cholesky().ok_or(SchemeError::NotPositiveDefinite)?;
            let p: Vec<f64> = chol
                .solve(&DVector::from_iterator(g.len(), g.iter().map(|v| -v)))
                .iter()
                .copied()
                .collect();
            let slope: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();

            let mut alpha = self.max_step(&r, &p);
            let r_norm = inf_norm(&r).max(1.0);
            let p_norm = inf_norm(&p);
            loop {
                let trial: Vec<f64> = r.iter().zip(&p).map(|(ri, pi)| ri + alpha * pi).collect();
                if let Ok((jt, jt_mag)) = self.objective_with_scale(&trial) {
                    let slack = 16.0 * f64::EPSILON * j_mag.max(jt_mag);
                    if jt <= j + ARMIJO_C1 * alpha * slope + slack {
                        r = trial;
                        j = jt;
                        j_mag = jt_mag;
                        break;
                    }
                }
                alpha *= BACKTRACK;
                backtracks += 1;
                if alpha * p_norm <= f64::EPSILON * r_norm {
                    return Err(SchemeError::LineSearchStall {
                        iteration: iter,
                        gradient_norm: gnorm,
                    });
                }
            }
        }
        unreachable!("loop returns on its last iteration")
    }
}

/// `S^T diag(1 / c) S`.
pub fn free_energy_hessian(network: &ReactionNetwork, c: &[f64]) -> DMatrix<f64> {
    let m = network.n_reactions();
    let stoich = network.stoich();
    DMatrix::from_fn(m, m, |l, k| {
        stoich
            .iter()
            .zip(c)
            .map(|(row, &ci)| (row[l] * row[k]) as f64 / ci)
            .sum()
    })
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One row of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub c: Vec<f64>,
    /// Reaction extents; empty for concentration-based integrators.
    #[serde(rename = "R")]
    pub extents: Vec<f64>,
    #[serde(rename = "F")]
    pub free_energy: f64,
    /// `gamma_k . c - gamma_k . c0` per conservation vector.
    pub conservation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub dt: f64,
    pub t_end: f64,
    pub c_inf: Vec<f64>,
    pub basis: ConservationBasis,
    pub records: Vec<Record>,
    pub steps: Vec<StepReport>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {step} failed: {source}")]
pub struct SimulationFailure {
    pub step: usize,
    #[source]
    pub source: SchemeError,
    /// Records accepted before the failure.
    pub partial: Box<SimulationResult>,
}

/// Number of uniform steps covering `[0, t_end]`.
pub fn step_count(dt: f64, t_end: f64) -> usize {
    let ratio = t_end / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

pub(crate) fn validate_run(c0: &[f64], dt: f64, t_end: f64, strict: bool) -> Result<(), SchemeError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SchemeError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(SchemeError::InvalidInput(format!("t_end must be nonnegative, got {t_end}")));
    }
    let ok = |v: f64| v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
    if let Some((i, v)) = c0.iter().enumerate().find(|(_, v)| !ok(**v)) {
        return Err(SchemeError::InvalidInput(format!(
            "initial concentration c0[{i}] = {v} is not {}",
            if strict { "strictly positive" } else { "nonnegative" }
        )));
    }
    Ok(())
}

/// Runs the trajectory scheme from `R^0 = 0` with uniform steps.
/// Concentrations are always recomputed as `c0 + S R^n`.
pub fn simulate(
    network: &ReactionNetwork,
    c0: &[f64],
    eq: &EquilibriumState,
    dt: f64,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<SimulationResult, SimulationFailure> {
    let basis = network.conservation_basis();
    let mut result = SimulationResult {
        dt,
        t_end,
        c_inf: eq.c_inf().to_vec(),
        basis,
        records: Vec::new(),
        steps: Vec::new(),
    };
    let fail = |step: usize, source: SchemeError, partial: &SimulationResult| SimulationFailure {
        step,
        source,
        partial: Box::new(partial.clone()),
    };
    if let Err(e) = network
        .check_species_len("c0", c0)
        .map_err(SchemeError::from)
        .and_then(|_| validate_run(c0, dt, t_end, true))
    {
        return Err(fail(0, e, &result));
    }

    let mut extents = vec![0.0; network.n_reactions()];
    result.records.push(Record {
        t: 0.0,
        c: c0.to_vec(),
        extents: extents.clone(),
        free_energy: model::free_energy(c0, eq.c_inf()),
        conservation: result.basis.residuals(c0, c0),
    });

    for n in 1..=step_count(dt, t_end) {
        let step = StepContext::new(network, c0, &extents, dt)
            .and_then(|ctx| StepProblem::new(network, c0, eq, &ctx).solve(opts));
        let report = match step {
            Ok(r) => r,
            Err(e) => return Err(fail(n, e, &result)),
        };
        extents.clone_from(&report.r_next);
        let c = network.concentrations(c0, &extents);
        result.records.push(Record {
            t: n as f64 * dt,
            free_energy: model::free_energy(&c, eq.c_inf()),
            conservation: result.basis.residuals(c0, &c),
            c,
            extents: extents.clone(),
        });
        result.steps.push(report);
    }
    Ok(result)
}
