//! Invariant audit of a trajectory: energy decay, positivity, conservation
//! and final equilibrium residuals.
//!
//! The trajectory part of the audit depends only on the recorded
//! concentrations, so recomputing it from a written CSV gives the same
//! numbers bit for bit.

use serde::Serialize;

use crate::model::{self, ConservationBasis, EquilibriumState, ReactionNetwork};
use crate::scheme::{inf_norm, Record, StepReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditThresholds {
    pub max_energy_increase: f64,
    /// Relative to `|gamma| |c0|`.
    pub max_conservation: f64,
}

impl Default for AuditThresholds {
    fn default() -> Self {
        AuditThresholds {
            max_energy_increase: 1e-10,
            max_conservation: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub step: usize,
    pub species: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryAudit {
    pub rows: usize,
    /// `max_n F(c^{n+1}) - F(c^n)`; `+inf` if any energy is undefined,
    /// 0 for a single row.
    pub max_energy_increase: f64,
    pub min_concentration: f64,
    pub min_location: Location,
    /// First row with a nonpositive concentration.
    pub first_nonpositive: Option<Location>,
    /// Per basis vector, `max_n |gamma . c^n - gamma . c^0| / (|gamma| |c^0|)`.
    pub conservation: Vec<f64>,
    /// `|S^T mu(c^N)|_inf`, absent if the final state is not positive.
    pub final_affinity: Option<f64>,
    /// `|r(c^N)|_inf`
    pub final_lma_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStats {
    pub steps: usize,
    pub total_iters: usize,
    pub max_iters: usize,
    pub total_backtracks: usize,
    pub max_gradient_norm: f64,
}

impl NewtonStats {
    pub fn from_reports(reports: &[StepReport]) -> Self {
        NewtonStats {
            steps: reports.len(),
            total_iters: reports.iter().map(|r| r.newton_iters).sum(),
            max_iters: reports.iter().map(|r| r.newton_iters).max().unwrap_or(0),
            total_backtracks: reports.iter().map(|r| r.linesearch_backtracks).sum(),
            max_gradient_norm: reports.iter().map(|r| r.gradient_norm).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub trajectory: TrajectoryAudit,
    pub newton: Option<NewtonStats>,
    pub thresholds: AuditThresholds,
    pub failures: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn audit_trajectory(
    network: &ReactionNetwork,
    eq: &EquilibriumState,
    basis: &ConservationBasis,
    records: &[Record],
) -> TrajectoryAudit {
    let energies: Vec<f64> = records
        .iter()
        .map(|r| model::free_energy(&r.c, eq.c_inf()))
        .collect();
    let max_energy_increase = if energies.iter().any(|f| !f.is_finite()) {
        f64::INFINITY
    } else {
        energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(if energies.len() < 2 { 0.0 } else { f64::NEG_INFINITY }, f64::max)
    };

    let mut min_concentration = f64::INFINITY;
    let mut min_location = Location { step: 0, species: 0 };
    let mut first_nonpositive = None;
    for (step, r) in records.iter().enumerate() {
        for (species, &v) in r.c.iter().enumerate() {
            if v < min_concentration || v.is_nan() {
                min_concentration = v;
                min_location = Location { step, species };
            }
            if first_nonpositive.is_none() && !(v > 0.0) {
                first_nonpositive = Some(Location { step, species });
            }
        }
    }

    let conservation = match records.first() {
        None => vec![0.0; basis.dim()],
        Some(first) => {
            let c0_norm = first.c.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let norms = basis.norms();
            let mut worst = vec![0.0f64; basis.dim()];
            for r in records {
                for (k, res) in basis.residuals(&first.c, &r.c).iter().enumerate() {
                    let rel = res.abs() / (norms[k] * c0_norm);
                    worst[k] = if rel.is_nan() { f64::INFINITY } else { worst[k].max(rel) };
                }
            }
            worst
        }
    };

    let (final_affinity, final_lma_residual) = match records.last() {
        None => (None, 0.0),
        Some(last) => (
            network.affinity(&last.c, eq).ok().map(|a| inf_norm(&a)),
            inf_norm(&network.lma_rates(&last.c).net),
        ),
    };

    TrajectoryAudit {
        rows: records.len(),
        max_energy_increase,
        min_concentration,
        min_location,
        first_nonpositive,
        conservation,
        final_affinity,
        final_lma_residual,
    }
}

/// Checks a trajectory audit against thresholds.
pub fn evaluate(
    trajectory: TrajectoryAudit,
    newton: Option<NewtonStats>,
    thresholds: AuditThresholds,
    species: &[String],
) -> AuditReport {
    let mut failures = Vec::new();
    if !(trajectory.max_energy_increase <= thresholds.max_energy_increase) {
        failures.push(format!(
            "energy increased by {:e} (threshold {:e})",
            trajectory.max_energy_increase, thresholds.max_energy_increase
        ));
    }
    if let Some(loc) = trajectory.first_nonpositive {
        failures.push(format!(
            "positivity violated at row {} species {} (min concentration {:e} at row {})",
            loc.step,
            species.get(loc.species).map_or("?", String::as_str),
            trajectory.min_concentration,
            trajectory.min_location.step
        ));
    }
    for (k, &v) in trajectory.conservation.iter().enumerate() {
        if !(v <= thresholds.max_conservation) {
            failures.push(format!(
                "conservation law {} drifted by {v:e} relative (threshold {:e})",
                k + 1,
                thresholds.max_conservation
            ));
        }
    }
    AuditReport {
        trajectory,
        newton,
        thresholds,
        failures,
    }
}
