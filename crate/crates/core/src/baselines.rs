//! Forward and backward Euler on the concentration ODE `dc/dt = S r(c)`.
//!
//! These are comparison points only. Neither integrator rescues a run that
//! leaves the positive orthant: negative concentrations are recorded and the
//! rates keep being evaluated by the same signed monomials.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::model::{self, int_pow, EquilibriumState, ReactionNetwork};
use crate::scheme::{self, inf_norm, Record, SchemeError};

pub const IMPLICIT_TOL: f64 = 1e-12;
pub const IMPLICIT_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Input(#[from] SchemeError),
    #[error("non-finite concentration at step {step}")]
    NonFinite { step: usize },
    #[error("implicit Euler Newton diverged at step {step}; residual trace {trace:?}")]
    NewtonDivergence { step: usize, trace: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityViolation {
    pub step: usize,
    pub species: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub dt: f64,
    pub t_end: f64,
    pub records: Vec<Record>,
    /// Every (step, species) with a negative concentration.
    pub positivity_violations: Vec<PositivityViolation>,
}

impl BaselineResult {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.free_energy).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source}")]
pub struct BaselineFailure {
    #[source]
    pub source: BaselineError,
    pub partial: Box<BaselineResult>,
}

struct Recorder<'a> {
    eq: &'a EquilibriumState,
    c0: Vec<f64>,
    basis: model::ConservationBasis,
    result: BaselineResult,
}

impl<'a> Recorder<'a> {
    fn new(network: &ReactionNetwork, eq: &'a EquilibriumState, c0: &[f64], dt: f64, t_end: f64) -> Self {
        Recorder {
            eq,
            c0: c0.to_vec(),
            basis: network.conservation_basis(),
            result: BaselineResult {
                dt,
                t_end,
                records: Vec::new(),
                positivity_violations: Vec::new(),
            },
        }
    }

    fn push(&mut self, step: usize, c: Vec<f64>) {
        for (species, &value) in c.iter().enumerate() {
            if value < 0.0 {
                self.result.positivity_violations.push(PositivityViolation { step, species, value });
            }
        }
        self.result.records.push(Record {
            t: step as f64 * self.result.dt,
            free_energy: model::free_energy(&c, self.eq.c_inf()),
            conservation: self.basis.residuals(&self.c0, &c),
            extents: Vec::new(),
            c,
        });
    }

    fn fail(self, source: BaselineError) -> BaselineFailure {
        BaselineFailure {
            source,
            partial: Box::new(self.result),
        }
    }
}

fn check_input(network: &ReactionNetwork, c0: &[f64], dt: f64, t_end: f64) -> Result<(), SchemeError> {
    network.check_species_len("c0", c0)?;
    scheme::validate_run(c0, dt, t_end, false)
}

/// `c^{n+1} = c^n + dt S r(c^n)`.
pub fn explicit_euler(
    network: &ReactionNetwork,
    c0: &[f64],
    eq: &EquilibriumState,
    dt: f64,
    t_end: f64,
) -> Result<BaselineResult, BaselineFailure> {
    let mut rec = Recorder::new(network, eq, c0, dt, t_end);
    if let Err(e) = check_input(network, c0, dt, t_end) {
        return Err(rec.fail(e.into()));
    }
    let mut c = c0.to_vec();
    rec.push(0, c.clone());
    for n in 1..=scheme::step_count(dt, t_end) {
        let rhs = network.concentration_rhs(&c);
        c.iter_mut().zip(&rhs).for_each(|(ci, d)| *ci += dt * d);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(rec.fail(BaselineError::NonFinite { step: n }));
        }
        rec.push(n, c.clone());
    }
    Ok(rec.result)
}

/// Jacobian of the net rates, `dr_l / dc_j`, by exact differentiation of
/// the monomials (no division by `c_j`, so zeros are fine).
pub fn rate_jacobian(network: &ReactionNetwork, c: &[f64]) -> DMatrix<f64> {
    let reactions = network.reactions();
    DMatrix::from_fn(reactions.len(), c.len(), |l, j| {
        let r = &reactions[l];
        let d = |exps: &[u32]| -> f64 {
            if exps[j] == 0 {
                return 0.0;
            }
            c.iter()
                .zip(exps)
                .enumerate()
                .map(|(i, (&x, &e))| {
                    if i == j {
                        f64::from(e) * int_pow(x, e - 1)
                    } else {
                        int_pow(x, e)
                    }
                })
                .product()
        };
        r.k_plus * d(&r.alpha) - r.k_minus * d(&r.beta)
    })
}

/// Solves `c^{n+1} - dt S r(c^{n+1}) = c^n` by Newton from `c^n`.
pub fn implicit_euler(
    network: &ReactionNetwork,
    c0: &[f64],
    eq: &EquilibriumState,
    dt: f64,
    t_end: f64,
) -> Result<BaselineResult, BaselineFailure> {
    let mut rec = Recorder::new(network, eq, c0, dt, t_end);
    if let Err(e) = check_input(network, c0, dt, t_end) {
        return Err(rec.fail(e.into()));
    }
    let n_sp = network.n_species();
    let s = network.stoich_matrix();
    let mut c = c0.to_vec();
    rec.push(0, c.clone());
    for n in 1..=scheme::step_count(dt, t_end) {
        let prev = c.clone();
        let scale = inf_norm(&prev).max(1.0);
        let residual = |x: &[f64]| -> Vec<f64> {
            let rhs = network.concentration_rhs(x);
            (0..n_sp).map(|i| x[i] - dt * rhs[i] - prev[i]).collect()
        };
        let mut trace = Vec::new();
        let mut res = residual(&c);
        let mut converged = false;
        for _ in 0..=IMPLICIT_MAX_ITERS {
            let norm = inf_norm(&res);
            trace.push(norm);
            if !norm.is_finite() {
                break;
            }
            if norm <= IMPLICIT_TOL * scale {
                converged = true;
                break;
            }
            let jac = DMatrix::identity(n_sp, n_sp) - s * rate_jacobian(network, &c) * dt;
            let Some(delta) = jac.lu().solve(&DVector::from_column_slice(&res)) else {
                break;
            };
            c.iter_mut().zip(delta.iter()).for_each(|(ci, d)| *ci -= d);
            res = residual(&c);
        }
        if !converged {
            return Err(rec.fail(BaselineError::NewtonDivergence { step: n, trace }));
        }
        rec.push(n, c.clone());
    }
    Ok(rec.result)
}
